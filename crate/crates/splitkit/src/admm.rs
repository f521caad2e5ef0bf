//! Baseline methods for the three-block problem: the directly extended
//! three-block alternating direction method of multipliers, its
//! prediction–correction variant with Gaussian back substitution, and the
//! semi-proximal variant.
//!
//! All three share one Gauss–Seidel sweep over the blocks, each subproblem
//! minimizing the γ-augmented Lagrangian (plus an optional proximal term
//! `(t_i/2)‖x − x^k‖²`) with the other blocks held at their most recent
//! values. Closed forms require `L_i* L_i = c_i·I`, the same exactness
//! policy as the alternating-minimization module; zero-map blocks (`c_i=0`)
//! are left untouched.

use crate::model::{
    dual_objective, frobenius_norm, kkt_residual, primal_objective, rel_step, IterationState,
    Mat, RunRecord, SeparableProblem, StoppingRule, Terminal, TraceRow,
};
use crate::{Result, SplitError};
use std::sync::Arc;
use std::time::Instant;

/// Correction solve `(d2, d3, dw) ↦ y` with `G y = d` for a user-supplied
/// back-substitution operator (needed only when `L2* L2` is not a scaled
/// identity).
pub type CorrectionFn = Arc<dyn Fn(&Mat, &Mat, &Mat) -> (Mat, Mat, Mat) + Send + Sync>;

/// Configuration of the back-substitution variant: the correction damping
/// `θ ∈ (0,1)` (strict on both ends) and an optional explicit correction
/// solve. Without one, the correction is derived from the block maps' Gram
/// scales: `G` is unit upper triangular over `v = (x2, x3, w)` with the
/// single off-diagonal block `(L2*L2)^{-1} L2* L3`, and `G^{-1}` is applied
/// by back substitution — never formed densely.
#[derive(Clone)]
pub struct AdmgConfig {
    pub theta: f64,
    pub back_map: Option<CorrectionFn>,
}

impl std::fmt::Debug for AdmgConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdmgConfig")
            .field("theta", &self.theta)
            .field("back_map", &self.back_map.as_ref().map(|_| "<custom>"))
            .finish()
    }
}

impl AdmgConfig {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(SplitError::Parameter(format!(
                "correction damping θ = {theta} must lie strictly inside (0,1)"
            )));
        }
        Ok(AdmgConfig { theta, back_map: None })
    }

    /// Replaces the Gram-scale back substitution with an explicit solve.
    pub fn with_back_map(mut self, back_map: CorrectionFn) -> Self {
        self.back_map = Some(back_map);
        self
    }
}

/// Configuration of the semi-proximal variant: the multiplier step factor
/// `τ ∈ (0, (1+√5)/2)` and three scaled-identity proximal terms
/// `T_i = t_i·I` with `t_i ≥ 0` (the default `t_i = 0` recovers plain
/// subproblems). General self-adjoint `T_i` are out of scope — the scaled
/// identities keep every subproblem in closed form.
#[derive(Clone, Copy, Debug)]
pub struct SpadmmConfig {
    pub tau: f64,
    pub proximal_terms: [f64; 3],
}

impl SpadmmConfig {
    pub fn new(tau: f64) -> Result<Self> {
        let limit = (1.0 + 5f64.sqrt()) / 2.0;
        if !(tau > 0.0 && tau < limit) {
            return Err(SplitError::Parameter(format!(
                "multiplier factor τ = {tau} must lie in (0, (1+√5)/2 ≈ {limit:.6})"
            )));
        }
        Ok(SpadmmConfig { tau, proximal_terms: [0.0; 3] })
    }

    pub fn with_proximal_terms(mut self, terms: [f64; 3]) -> Result<Self> {
        if terms.iter().any(|t| *t < 0.0 || !t.is_finite()) {
            return Err(SplitError::Parameter(
                "proximal terms must be nonnegative and finite".into(),
            ));
        }
        self.proximal_terms = terms;
        Ok(self)
    }
}

// ── the Gauss–Seidel sweep ───────────────────────────────────────────────

/// Minimizes block `i`'s augmented subproblem
/// `f_i(x) − ⟨w, L_i x⟩ + (γ/2)‖L_i x + others − b‖² + (t_i/2)‖x − x^k‖²`
/// given the sum of the other blocks' images. `others` excludes `b`.
fn block_update(
    problem: &SeparableProblem,
    i: usize,
    x_old: &Mat,
    w: &Mat,
    others: &Mat,
    gamma: f64,
    t_i: f64,
) -> Result<Mat> {
    let c = problem.map(i).gram_scale()?;
    if c == 0.0 {
        return Ok(x_old.clone());
    }
    if c < 0.0 {
        return Err(SplitError::Configuration(format!(
            "block-{} map has a negative Gram scale",
            i + 1
        )));
    }
    let adjusted = problem.map(i).adjoint(&(&(&(w / gamma) + &problem.rhs) - others));
    if t_i == 0.0 {
        Ok(problem.objective(i).prox(&(adjusted / c), 1.0 / (gamma * c)))
    } else {
        let denom = gamma * c + t_i;
        let q = (&(adjusted * gamma) + &(x_old * t_i)) / denom;
        Ok(problem.objective(i).prox(&q, 1.0 / denom))
    }
}

/// One Gauss–Seidel pass over the three blocks followed by the multiplier
/// step `w − τγ(L1x1⁺ + L2x2⁺ + L3x3⁺ − b)`.
fn sweep(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
    tau: f64,
    terms: [f64; 3],
) -> Result<IterationState> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(SplitError::Parameter("step size γ must be positive".into()));
    }
    let image2 = problem.map(1).forward(&state.x2);
    let image3 = problem.map(2).forward(&state.x3);

    let others1 = &image2 + &image3;
    let x1 = block_update(problem, 0, &state.x1, &state.w, &others1, gamma, terms[0])?;
    let image1 = problem.map(0).forward(&x1);

    let others2 = &image1 + &image3;
    let x2 = block_update(problem, 1, &state.x2, &state.w, &others2, gamma, terms[1])?;
    let image2 = problem.map(1).forward(&x2);

    let others3 = &image1 + &image2;
    let x3 = block_update(problem, 2, &state.x3, &state.w, &others3, gamma, terms[2])?;
    let image3 = problem.map(2).forward(&x3);

    let residual = &(&(&image1 + &image2) + &image3) - &problem.rhs;
    let w = &state.w - &(residual * (tau * gamma));
    Ok(IterationState { x1, x2, x3, w, ..state.clone() })
}

// ── the three steps ──────────────────────────────────────────────────────

/// One step of the directly extended three-block method: the Gauss–Seidel
/// sweep with plain subproblems and multiplier factor 1. Shares the
/// semi-proximal code path, so [`spadmm_step`] with `τ = 1, T_i = 0`
/// reproduces it bitwise.
pub fn admm3_step(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
) -> Result<IterationState> {
    sweep(problem, state, gamma, 1.0, [0.0; 3])
}

/// One semi-proximal step: proximal-augmented subproblems and the
/// multiplier step scaled by `τγ`.
pub fn spadmm_step(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
    cfg: &SpadmmConfig,
) -> Result<IterationState> {
    sweep(problem, state, gamma, cfg.tau, cfg.proximal_terms)
}

/// One prediction–correction step: a plain sweep produces the prediction
/// `(x̃1, x̃2, x̃3, w̃)`, then `x1^{k+1} = x̃1` while `v = (x2, x3, w)` is
/// corrected by `v^{k+1} = v^k − θ G^{-1}(v^k − ṽ^k)`, the triangular solve
/// running bottom-up: `y_w = d_w`, `y_3 = d_3`,
/// `y_2 = d_2 − L2*(L3 d_3)/c_2`.
pub fn admg_step(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
    cfg: &AdmgConfig,
) -> Result<IterationState> {
    let prediction = sweep(problem, state, gamma, 1.0, [0.0; 3])?;
    let d2 = &state.x2 - &prediction.x2;
    let d3 = &state.x3 - &prediction.x3;
    let dw = &state.w - &prediction.w;

    let (y2, y3, yw) = match &cfg.back_map {
        Some(solve) => solve(&d2, &d3, &dw),
        None => {
            let c2 = problem.map(1).gram_scale()?;
            if c2 <= 0.0 {
                return Err(SplitError::Configuration(
                    "the correction needs an invertible L2*L2 (or an explicit back_map)".into(),
                ));
            }
            let coupled = problem.map(1).adjoint(&problem.map(2).forward(&d3)) / c2;
            (&d2 - &coupled, d3, dw)
        }
    };

    Ok(IterationState {
        x1: prediction.x1,
        x2: &state.x2 - &(&y2 * cfg.theta),
        x3: &state.x3 - &(&y3 * cfg.theta),
        w: &state.w - &(&yw * cfg.theta),
        ..state.clone()
    })
}

// ── the driver ───────────────────────────────────────────────────────────

/// Baseline selection for [`run_admm`].
#[derive(Clone, Debug)]
pub enum AdmmMethod {
    /// Directly extended three-block method.
    Direct,
    /// Prediction–correction with Gaussian back substitution.
    BackSubstitution(AdmgConfig),
    /// Semi-proximal variant.
    SemiProximal(SpadmmConfig),
}

fn block<'a>(state: &'a IterationState, i: usize) -> &'a Mat {
    match i {
        0 => &state.x1,
        1 => &state.x2,
        _ => &state.x3,
    }
}

/// Runs a baseline from a cold start until the larger watched-block relative
/// step drops to `stop.eps` or the budget runs out (non-converged record).
///
/// The trace records the full post-sweep constraint residual
/// `‖L1x1 + L2x2 + L3x3 − b‖_F` and — when objective recording is on — the
/// primal value at the new iterates and the dual value at `(w^k, u^k)` with
/// `u^k = w^k − γ(L1x1^{k+1} + L2x2^{k+1} + L3x3^k − b)`, the multiplier at
/// which block 2's subproblem optimality certifies dual feasibility. The
/// KKT residual lands in the last row only.
pub fn run_admm(
    problem: &SeparableProblem,
    method: &AdmmMethod,
    gamma: f64,
    stop: &StoppingRule,
) -> Result<RunRecord> {
    run_admm_with_state(problem, method, gamma, stop).map(|(record, _)| record)
}

/// [`run_admm`] plus the terminal iterate, for callers that need the final
/// blocks (e.g. to score recovery against a ground truth).
pub fn run_admm_with_state(
    problem: &SeparableProblem,
    method: &AdmmMethod,
    gamma: f64,
    stop: &StoppingRule,
) -> Result<(RunRecord, IterationState)> {
    if stop.watch.iter().any(|&i| i > 2) {
        return Err(SplitError::Parameter("watched block indices must be in 0..=2".into()));
    }
    let start = Instant::now();
    let mut state = IterationState::cold_start(problem, gamma);
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut converged = false;

    for _ in 1..=stop.max_iter {
        let next = match method {
            AdmmMethod::Direct => admm3_step(problem, &state, gamma)?,
            AdmmMethod::BackSubstitution(cfg) => admg_step(problem, &state, gamma, cfg)?,
            AdmmMethod::SemiProximal(cfg) => spadmm_step(problem, &state, gamma, cfg)?,
        };

        let rel_l = rel_step(block(&next, stop.watch[0]), block(&state, stop.watch[0]));
        let rel_s = rel_step(block(&next, stop.watch[1]), block(&state, stop.watch[1]));
        let full_residual = problem.residual(&next.x1, &next.x2, &next.x3);
        let (primal_value, dual_value) = if stop.record_objectives {
            let primal = primal_objective(problem, &next.x1, &next.x2, &next.x3)?;
            let mid = problem.residual(&next.x1, &next.x2, &state.x3);
            let u = &state.w - &(mid * gamma);
            let dual = dual_objective(problem, &state.w, &u)?;
            (primal, dual)
        } else {
            (f64::NAN, f64::NAN)
        };
        trace.push(TraceRow {
            constraint_residual: frobenius_norm(&full_residual),
            rel_step_l: rel_l,
            rel_step_s: rel_s,
            primal_value,
            dual_value,
            kkt_residual: f64::NAN,
        });
        state = next;
        if rel_l.max(rel_s) <= stop.eps {
            converged = true;
            break;
        }
    }

    if let Some(last) = trace.last_mut() {
        last.kkt_residual = kkt_residual(problem, &state.x1, &state.x2, &state.x3, &state.w)?;
    }

    let record = RunRecord {
        iterations: trace.len(),
        trace,
        terminal: Terminal { converged, wall_seconds: start.elapsed().as_secs_f64() },
    };
    Ok((record, state))
}

// ──────────────────────────────────────────────────────────────────────────
