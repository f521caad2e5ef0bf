//! Experiment harness behind the `splitkit-bench` binary: configuration,
//! solver dispatch on synthetic low-rank-plus-sparse instances, sweeps, and
//! CSV / JSON-lines serialization.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::Serialize;
use splitkit::admm::{run_admm_with_state, AdmgConfig, AdmmMethod, SpadmmConfig};
use splitkit::ama::{run_ama_with_state, AlphaRule, AmaVariant};
use splitkit::model::{SolverParams, StoppingRule};
use splitkit::spcp::{assemble_spcp_problem, gen_spcp_instance, recovery_metrics};
use splitkit::splitting::{validate_params, ParamReport};

/// Reference penalty weight on the low-rank block; the sparse weight is
/// derived as `beta1/√m` per instance.
pub const BETA1: f64 = 0.05;
/// Reference noise standard deviation of the synthetic instances.
pub const NOISE_STD: f64 = 1e-5;

// ── errors ───────────────────────────────────────────────────────────────

/// Harness-level failures, each mapped to a process exit code by the binary.
#[derive(Debug)]
pub enum CliError {
    /// Malformed configuration: unknown axis or key, unparsable value.
    Config(String),
    /// Parameters rejected before running: either the step/relaxation/
    /// inertia gate (report attached) or a method-specific range gate.
    Infeasible { message: String, report: Option<ParamReport> },
    /// Error raised by the solver or instance generator mid-run.
    Run(splitkit::SplitError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Infeasible { message, report } => {
                write!(f, "infeasible parameters: {message}")?;
                if let Some(report) = report {
                    write!(f, "\n{}", format_report(report))?;
                }
                Ok(())
            }
            CliError::Run(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl From<splitkit::SplitError> for CliError {
    fn from(e: splitkit::SplitError) -> Self {
        CliError::Run(e)
    }
}

/// Multi-line human-readable rendering of a parameter-gate report.
pub fn format_report(report: &ParamReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("feasible: {}\n", report.feasible));
    out.push_str(&format!("step-size ceiling: {:.6e}\n", report.gamma_max));
    out.push_str(&format!("relaxation ceiling: {:.12}\n", report.lambda_upper));
    if let Some((sigma, delta)) = report.witness {
        out.push_str(&format!("witness (sigma, delta): ({sigma:.6e}, {delta:.12})\n"));
    }
    if report.summability_online {
        out.push_str("inertia summability: enforced online\n");
    }
    if report.violated.is_empty() {
        out.push_str("violated: none");
    } else {
        out.push_str(&format!("violated: {}", report.violated.join(", ")));
    }
    out
}

// ── configuration ────────────────────────────────────────────────────────

/// The seven solver entry points the harness can dispatch to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    /// Directly extended three-block sweep.
    Admm3,
    /// Sweep with Gaussian back-substitution correction.
    Admg,
    /// Semi-proximal sweep with a τγ multiplier step.
    Spadmm,
    /// Plain alternating minimization.
    Ama,
    /// Relaxed alternating minimization.
    Rama,
    /// Relaxed inertial method, constant inertia.
    RiamaConst,
    /// Relaxed inertial method, online inertia capped at `alpha`.
    RiamaAdaptive,
}

impl Method {
    pub fn token(self) -> &'static str {
        match self {
            Method::Admm3 => "admm3",
            Method::Admg => "admg",
            Method::Spadmm => "spadmm",
            Method::Ama => "ama",
            Method::Rama => "rama",
            Method::RiamaConst => "riama_const",
            Method::RiamaAdaptive => "riama_adaptive",
        }
    }

    pub fn is_sweep_family(self) -> bool {
        matches!(self, Method::Admm3 | Method::Admg | Method::Spadmm)
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "admm3" => Ok(Method::Admm3),
            "admg" => Ok(Method::Admg),
            "spadmm" => Ok(Method::Spadmm),
            "ama" => Ok(Method::Ama),
            "rama" => Ok(Method::Rama),
            "riama_const" | "riama-const" => Ok(Method::RiamaConst),
            "riama_adaptive" | "riama-adaptive" => Ok(Method::RiamaAdaptive),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// One experiment: a method, an instance recipe, and solver scalars.
///
/// `alpha` is the constant inertia for `riama_const` and the online cap for
/// `riama_adaptive`; `theta` and `tau` only apply to their respective sweep
/// variants. `eps_bar` is the validation safety margin: `None` picks the
/// reference value when the step size allows it and a feasible midpoint
/// otherwise.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub method: Method,
    pub m: usize,
    pub rank_frac: f64,
    pub sparsity_frac: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub theta: f64,
    pub tau: f64,
    pub eps: f64,
    pub eps_bar: Option<f64>,
    pub max_iter: usize,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Ama,
            m: 200,
            rank_frac: 0.05,
            sparsity_frac: 0.05,
            gamma: 0.0005,
            lambda: 1.0,
            alpha: 0.15,
            theta: 0.99999,
            tau: 1.2,
            eps: 1e-5,
            eps_bar: None,
            max_iter: 20_000,
            seed: 7,
            repeats: 1,
        }
    }
}

/// Reference safety margin: the value used throughout the tables when the
/// step size permits it.
pub const REFERENCE_EPS_BAR: f64 = 0.00026;

impl ExperimentConfig {
    /// The validation margin ε̄ for this configuration (β = 1 on these
    /// instances): an explicit value wins; otherwise the reference margin
    /// when `γ < 2β·ε̄_ref`, else the midpoint of the feasible interval
    /// `(γ/(2β), 1)`, else a sentinel that lets the gate report `c1`.
    pub fn effective_eps_bar(&self) -> f64 {
        if let Some(value) = self.eps_bar {
            return value;
        }
        let ratio = self.gamma / 2.0;
        if ratio < REFERENCE_EPS_BAR {
            REFERENCE_EPS_BAR
        } else if ratio < 1.0 {
            (ratio + 1.0) / 2.0
        } else {
            0.999
        }
    }

    /// Solver parameters with the schedules this method actually runs
    /// (methods ignore fields that do not apply to them).
    pub fn solver_params(&self) -> SolverParams {
        let base = SolverParams::new(self.gamma, 1.0, self.effective_eps_bar());
        match self.method {
            Method::Ama => base,
            Method::Rama => base.with_constant_relaxation(self.lambda),
            Method::RiamaConst => base
                .with_constant_relaxation(self.lambda)
                .with_constant_inertia(self.alpha),
            Method::RiamaAdaptive => base
                .with_constant_relaxation(self.lambda)
                .with_adaptive_inertia(self.alpha),
            // Sweep family: γ is the only shared scalar; the rest are gated
            // in their config structs.
            _ => base,
        }
    }

    /// Sets the field named `key` (snake or kebab case) from a string.
    pub fn set_field(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        let bad = |what: &str, v: &str| {
            CliError::Config(format!("field `{what}` cannot parse value `{v}`"))
        };
        match key.as_str() {
            "method" => self.method = value.parse().map_err(CliError::Config)?,
            "m" => self.m = value.parse().map_err(|_| bad("m", value))?,
            "rank_frac" => self.rank_frac = value.parse().map_err(|_| bad("rank_frac", value))?,
            "sparsity_frac" => {
                self.sparsity_frac = value.parse().map_err(|_| bad("sparsity_frac", value))?
            }
            "gamma" => self.gamma = value.parse().map_err(|_| bad("gamma", value))?,
            "lambda" => self.lambda = value.parse().map_err(|_| bad("lambda", value))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha", value))?,
            "theta" => self.theta = value.parse().map_err(|_| bad("theta", value))?,
            "tau" => self.tau = value.parse().map_err(|_| bad("tau", value))?,
            "eps" => self.eps = value.parse().map_err(|_| bad("eps", value))?,
            "eps_bar" => {
                self.eps_bar = Some(value.parse().map_err(|_| bad("eps_bar", value))?)
            }
            "max_iter" => self.max_iter = value.parse().map_err(|_| bad("max_iter", value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed", value))?,
            "repeats" => self.repeats = value.parse().map_err(|_| bad("repeats", value))?,
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a `key=value` config file body (`#` comments, blank lines ok).
    pub fn apply_file(&mut self, body: &str) -> Result<(), CliError> {
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1))
            })?;
            self.set_field(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

// ── result rows ──────────────────────────────────────────────────────────

/// One solved configuration. Serializes to the CSV column set and to JSON
/// lines with identical field names.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub k: usize,
    pub rank: usize,
    #[serde(rename = "rel_L_star")]
    pub rel_l_star: f64,
    #[serde(rename = "rel_S_star")]
    pub rel_s_star: f64,
    pub cpu_seconds: f64,
    pub converged: bool,
}

pub const CSV_HEADER: &str =
    "method,gamma,lambda,alpha,k,rank,rel_L_star,rel_S_star,cpu_seconds,converged";

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.gamma,
            self.lambda,
            self.alpha,
            self.k,
            self.rank,
            self.rel_l_star,
            self.rel_s_star,
            self.cpu_seconds,
            self.converged
        )
    }
}

/// Renders rows in the selected format, header included for CSV.
pub fn render(rows: &[ResultRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            for row in rows {
                out.push('\n');
                out.push_str(&row.to_csv());
            }
            out
        }
        OutputFormat::Jsonl => rows
            .iter()
            .map(|row| serde_json::to_string(row).expect("plain fields always serialize"))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

// ── the gate ─────────────────────────────────────────────────────────────

/// Validates the configuration without running it. For the alternating-
/// minimization family this is the step/relaxation/inertia gate (report
/// returned); for the sweep family the method-specific range gates run and
/// an always-feasible report is synthesized.
pub fn check_config(cfg: &ExperimentConfig) -> Result<ParamReport, CliError> {
    if cfg.eps <= 0.0 || !cfg.eps.is_finite() {
        return Err(CliError::Config("eps must be positive".into()));
    }
    if cfg.repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    match cfg.method {
        Method::Admg => {
            AdmgConfig::new(cfg.theta).map_err(|e| CliError::Infeasible {
                message: e.to_string(),
                report: None,
            })?;
        }
        Method::Spadmm => {
            SpadmmConfig::new(cfg.tau).map_err(|e| CliError::Infeasible {
                message: e.to_string(),
                report: None,
            })?;
        }
        Method::Admm3 => {}
        _ => {
            let params = cfg.solver_params();
            let report = validate_params(&params, cfg.max_iter);
            if !report.feasible {
                return Err(CliError::Infeasible {
                    message: format!("conditions violated: {}", report.violated.join(", ")),
                    report: Some(report),
                });
            }
            return Ok(report);
        }
    }
    Ok(ParamReport {
        feasible: true,
        gamma_max: f64::INFINITY,
        lambda_upper: f64::INFINITY,
        violated: Vec::new(),
        witness: None,
        summability_online: false,
    })
}

// ── running ──────────────────────────────────────────────────────────────

fn ama_variant(cfg: &ExperimentConfig) -> AmaVariant {
    match cfg.method {
        Method::Ama => AmaVariant::ama(),
        Method::Rama => AmaVariant::rama(),
        Method::RiamaConst => AmaVariant::riama(AlphaRule::Constant(cfg.alpha)),
        Method::RiamaAdaptive => AmaVariant::riama(AlphaRule::Adaptive(cfg.alpha)),
        _ => unreachable!("sweep-family methods never build a variant"),
    }
}

/// The `(lambda, alpha)` pair the method actually runs with: methods that
/// pin a schedule report the pinned value, not the configured one, and the
/// sweep family (whose multiplier step has no relaxation or inertia knob)
/// reports the neutral pair.
fn effective_lambda_alpha(cfg: &ExperimentConfig) -> (f64, f64) {
    match cfg.method {
        Method::Ama => (1.0, 0.0),
        Method::Rama => (cfg.lambda, 0.0),
        Method::RiamaConst | Method::RiamaAdaptive => (cfg.lambda, cfg.alpha),
        _ => (1.0, 0.0),
    }
}

fn solve_one(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRow, CliError> {
    let inst = gen_spcp_instance(cfg.m, cfg.rank_frac, cfg.sparsity_frac, NOISE_STD, BETA1, seed)?;
    let problem = assemble_spcp_problem(&inst);

    let (record, low_rank, sparse) = if cfg.method.is_sweep_family() {
        // Sweep order: noise, sparse, low rank; stopping watches (low rank,
        // sparse) — the same pair the other family watches.
        let permuted = problem.permuted([0, 2, 1]);
        let stop = StoppingRule::new(cfg.eps, cfg.max_iter).watching([2, 1]);
        let method = match cfg.method {
            Method::Admm3 => AdmmMethod::Direct,
            Method::Admg => AdmmMethod::BackSubstitution(
                AdmgConfig::new(cfg.theta).map_err(CliError::Run)?,
            ),
            _ => AdmmMethod::SemiProximal(SpadmmConfig::new(cfg.tau).map_err(CliError::Run)?),
        };
        let (record, state) = run_admm_with_state(&permuted, &method, cfg.gamma, &stop)?;
        (record, state.x3, state.x2)
    } else {
        let stop = StoppingRule::new(cfg.eps, cfg.max_iter);
        let params = cfg.solver_params();
        let (record, state) = run_ama_with_state(&problem, ama_variant(cfg), &params, &stop)?;
        (record, state.x2, state.x3)
    };

    let metrics = recovery_metrics(&inst, &low_rank, &sparse, &low_rank, &sparse)?;
    let (lambda, alpha) = effective_lambda_alpha(cfg);
    Ok(ResultRow {
        method: cfg.method.token().to_string(),
        gamma: cfg.gamma,
        lambda,
        alpha,
        k: record.iterations,
        rank: metrics.rank_l_k,
        rel_l_star: metrics.rel_l_star,
        rel_s_star: metrics.rel_s_star,
        cpu_seconds: record.terminal.wall_seconds,
        converged: record.terminal.converged,
    })
}

/// Runs the configuration once per repeat (seeds `seed..seed+repeats`) and
/// appends a median row (by iteration count, lower middle) whose method name
/// carries a `_median` suffix.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    check_config(cfg)?;
    let mut rows = Vec::with_capacity(cfg.repeats + 1);
    for rep in 0..cfg.repeats {
        rows.push(solve_one(cfg, cfg.seed + rep as u64)?);
    }
    let mut by_k: Vec<&ResultRow> = rows.iter().collect();
    by_k.sort_by_key(|row| row.k);
    let mut median = by_k[(by_k.len() - 1) / 2].clone();
    median.method.push_str("_median");
    rows.push(median);
    Ok(rows)
}

// ── sweeps ───────────────────────────────────────────────────────────────

/// Worker-thread cap for sweeps: `SPLITKIT_THREADS` when set (minimum 1),
/// otherwise the machine's available parallelism.
pub fn thread_cap() -> usize {
    std::env::var("SPLITKIT_THREADS")
        .ok()
        .and_then(|raw| raw.parse::<usize>().ok())
        .map(|n| n.max(1))
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

/// Runs one experiment per axis value (ascending), in parallel up to the
/// thread cap, and returns the rows in axis order. The axis must name a
/// numeric configuration field.
pub fn sweep(
    template: &ExperimentConfig,
    axis: &str,
    values: &[f64],
) -> Result<Vec<ResultRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one axis value".into()));
    }
    let mut ordered: Vec<f64> = values.to_vec();
    ordered.sort_by(|a, b| a.partial_cmp(b).expect("axis values must be ordered"));

    let mut configs = Vec::with_capacity(ordered.len());
    for value in &ordered {
        let mut cfg = template.clone();
        cfg.set_field(axis, &format!("{value}"))?;
        check_config(&cfg)?;
        configs.push(cfg);
    }

    let workers = thread_cap().min(configs.len());
    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..configs.len()).collect());
    let slots: Vec<Mutex<Option<Result<Vec<ResultRow>, CliError>>>> =
        (0..configs.len()).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue lock").pop_front();
                let Some(index) = next else { break };
                let outcome = run_experiment(&configs[index]);
                *slots[index].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut rows = Vec::new();
    for slot in slots {
        let outcome = slot.into_inner().expect("slot lock").expect("worker filled every slot");
        rows.extend(outcome?);
    }
    Ok(rows)
}
