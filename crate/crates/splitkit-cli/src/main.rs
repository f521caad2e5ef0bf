use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splitkit_cli::{
    check_config, format_report, render, run_experiment, sweep, CliError, ExperimentConfig,
    Method, OutputFormat, ResultRow, BETA1, NOISE_STD,
};

/// Benchmark runner for the splitkit solvers on synthetic
/// low-rank-plus-sparse decomposition instances.
#[derive(Parser)]
#[command(name = "splitkit-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Experiment fields as optional flags. Precedence: built-in defaults, then
/// the config file, then explicit flags.
#[derive(Args)]
struct ConfigFlags {
    /// key=value config file applied before the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Side length of the square matrices
    #[arg(long)]
    m: Option<usize>,
    /// Ground-truth rank as a fraction of m
    #[arg(long)]
    rank_frac: Option<f64>,
    /// Ground-truth support size as a fraction of m²
    #[arg(long)]
    sparsity_frac: Option<f64>,
    /// Step size γ
    #[arg(long)]
    gamma: Option<f64>,
    /// Relaxation factor λ (rama / riama_*)
    #[arg(long)]
    lambda: Option<f64>,
    /// Inertia: constant value (riama_const) or online cap (riama_adaptive)
    #[arg(long)]
    alpha: Option<f64>,
    /// Back-substitution factor θ (admg)
    #[arg(long)]
    theta: Option<f64>,
    /// Multiplier step factor τ (spadmm)
    #[arg(long)]
    tau: Option<f64>,
    /// Stopping tolerance on the watched relative steps
    #[arg(long)]
    eps: Option<f64>,
    /// Validation safety margin ε̄ (default: automatic)
    #[arg(long)]
    eps_bar: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds to run (seed, seed+1, …)
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct OutputFlags {
    /// Table format
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 3 if any run stops on the iteration budget
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration, repeated over consecutive seeds
    Run {
        #[command(flatten)]
        flags: ConfigFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Solve one configuration per value of a numeric field
    Sweep {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Configuration field to vary
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Check a configuration against the convergence conditions without solving
    Validate {
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Generate an instance and save it to a file
    Gen {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Destination instance file
        #[arg(long)]
        out: PathBuf,
        /// Noise standard deviation
        #[arg(long, default_value_t = NOISE_STD)]
        noise_std: f64,
        /// Penalty weight on the low-rank block
        #[arg(long, default_value_t = BETA1)]
        beta1: f64,
    },
}

impl ConfigFlags {
    fn build(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let body = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            cfg.apply_file(&body)?;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.rank_frac {
            cfg.rank_frac = v;
        }
        if let Some(v) = self.sparsity_frac {
            cfg.sparsity_frac = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.eps_bar {
            cfg.eps_bar = Some(v);
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        Ok(cfg)
    }
}

fn emit(rows: &[ResultRow], output: &OutputFlags) -> Result<ExitCode, CliError> {
    let table = render(rows, output.format);
    match &output.out {
        Some(path) => std::fs::write(path, table + "\n").map_err(|e| {
            CliError::Config(format!("cannot write {}: {e}", path.display()))
        })?,
        None => println!("{table}"),
    }
    if output.strict && rows.iter().any(|row| !row.converged) {
        eprintln!("strict mode: at least one run stopped on the iteration budget");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { flags, output } => {
            let cfg = flags.build()?;
            let rows = run_experiment(&cfg)?;
            emit(&rows, &output)
        }
        Command::Sweep { flags, axis, values, output } => {
            let cfg = flags.build()?;
            let rows = sweep(&cfg, &axis, &values)?;
            emit(&rows, &output)
        }
        Command::Validate { flags } => {
            let cfg = flags.build()?;
            let report = check_config(&cfg)?;
            println!("{}", format_report(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { flags, out, noise_std, beta1 } => {
            let cfg = flags.build()?;
            let inst = splitkit::spcp::gen_spcp_instance(
                cfg.m,
                cfg.rank_frac,
                cfg.sparsity_frac,
                noise_std,
                beta1,
                cfg.seed,
            )?;
            splitkit::spcp::save_instance(&inst, &out)?;
            println!(
                "wrote {} (m={}, rank={}, seed={})",
                out.display(),
                inst.m,
                inst.r,
                inst.seed
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Infeasible { .. } => ExitCode::from(2),
                CliError::Config(_) | CliError::Run(_) => ExitCode::from(1),
            }
        }
    }
}
