//! Alternating minimization solvers for the three-block problem.
//!
//! The full method is the relaxed inertial step ([`riama_step`]): block 1 is
//! minimized against the bare Lagrangian (possible because `f1` is strongly
//! convex), block 2 against the γ-augmented Lagrangian, block 3 against a
//! proximal model with relaxation offset `(1+α_{k+1})λ_k` and the shifted
//! multiplier `w + α_{k+1}p`, followed by the multiplier and inertia-memory
//! updates. Two named special cases share its code path bitwise:
//! [`rama3_step`] (`α ≡ 0`, relaxation kept) and [`ama3_step`]
//! (`α ≡ 0, λ ≡ 1`, the plain three-block method whose multiplier update
//! uses the full residual).
//!
//! Every step also advances a shadow dual sequence `(z, y, u)` related to
//! the primal variables by `z = w + γL3x3 − γb − p`; the shadow trajectory
//! of a run must coincide with the generic dual-space splitting iteration,
//! which is exercised as a cross-module oracle in the integration tests.

use crate::model::{
    dual_objective, frobenius_norm, kkt_residual, primal_objective, rel_step, IterationState,
    Mat, RunRecord, SeparableProblem, SolverParams, StoppingRule, Terminal, TraceRow,
};
use crate::{Result, SplitError};
use std::time::Instant;

// ── variants ─────────────────────────────────────────────────────────────

/// How the inertia coefficient `α_{k+1}` is produced each iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaRule {
    /// `α ≡ 0` (no inertia).
    Zero,
    /// A fixed coefficient for every iteration (the first one is harmless
    /// because runs start with `p¹ = 0`, which encodes `z⁰ = z¹`).
    Constant(f64),
    /// `α_{k+1} = min(1/(k²‖p − γλ_k r‖²), cap)` — see [`adaptive_alpha`].
    Adaptive(f64),
}

/// Which member of the family runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmaKind {
    /// Relaxed inertial method (full generality).
    Riama,
    /// Relaxed method: forces `α ≡ 0`.
    Rama,
    /// Plain three-block method: forces `α ≡ 0` and `λ ≡ 1`.
    Ama,
}

/// A solver selection: the family member plus its inertia rule.
/// [`AmaKind::Ama`] and [`AmaKind::Rama`] override the rule to
/// [`AlphaRule::Zero`]; [`AmaKind::Ama`] also pins `λ ≡ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmaVariant {
    pub kind: AmaKind,
    pub alpha_rule: AlphaRule,
}

impl AmaVariant {
    pub fn ama() -> Self {
        AmaVariant { kind: AmaKind::Ama, alpha_rule: AlphaRule::Zero }
    }

    pub fn rama() -> Self {
        AmaVariant { kind: AmaKind::Rama, alpha_rule: AlphaRule::Zero }
    }

    pub fn riama(alpha_rule: AlphaRule) -> Self {
        AmaVariant { kind: AmaKind::Riama, alpha_rule }
    }

    fn effective_alpha_rule(&self) -> AlphaRule {
        match self.kind {
            AmaKind::Riama => self.alpha_rule,
            AmaKind::Rama | AmaKind::Ama => AlphaRule::Zero,
        }
    }

    fn effective_lambda(&self, params: &SolverParams, k: usize) -> f64 {
        match self.kind {
            AmaKind::Ama => 1.0,
            _ => params.lambda_at(k),
        }
    }
}

// ── the step ─────────────────────────────────────────────────────────────

struct StepParts {
    state: IterationState,
    /// `L1x1^{k+1} + L2x2^{k+1} + L3x3^k − b`: the residual the inertia
    /// rule, step 3, and the trace all consume.
    residual_mid: Mat,
}

/// One iteration of the relaxed inertial scheme. `resolve_alpha` receives
/// the mid-step residual and returns `α_{k+1}`; threading it as a closure
/// lets the adaptive rule share this exact code path with the constant one.
fn step_core(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
    lambda_k: f64,
    resolve_alpha: impl FnOnce(&Mat) -> f64,
) -> Result<StepParts> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(SplitError::Parameter("step size γ must be positive".into()));
    }

    // Block 1: minimize f1(x1) − ⟨w, L1x1⟩, i.e. x1 = ∇f1*(L1* w).
    let x1 = problem
        .objective(0)
        .conjugate_gradient(&problem.map(0).adjoint(&state.w))?;

    // Block 2: minimize against the γ-augmented Lagrangian. Needs
    // L2*L2 = c·I; a zero map (c = 0) decouples the block entirely and its
    // iterate is left in place.
    let c2 = problem.map(1).gram_scale()?;
    let x2 = if c2 == 0.0 {
        state.x2.clone()
    } else if c2 < 0.0 {
        return Err(SplitError::Configuration("block-2 map has a negative Gram scale".into()));
    } else {
        let inner =
            &(&(&state.w / gamma) + &problem.rhs - &problem.map(0).forward(&x1))
                - &problem.map(2).forward(&state.x3);
        let v = problem.map(1).adjoint(&inner) / c2;
        problem.objective(1).prox(&v, 1.0 / (gamma * c2))
    };

    // The residual at (x1^{k+1}, x2^{k+1}, x3^k): everything downstream —
    // the inertia coefficient, step 3's relaxation offset, the multiplier
    // update, and the inertia memory — is built from this one quantity.
    let r = problem.residual(&x1, &x2, &state.x3);
    let alpha_next = resolve_alpha(&r);

    // Block 3: proximal model with offset ρ = (1+α_{k+1})λ_k and shifted
    // multiplier w̃ = w + α_{k+1}p.
    let w_tilde = &state.w + &(&state.p * alpha_next);
    let rho = (1.0 + alpha_next) * lambda_k;
    let c3 = problem.map(2).gram_scale()?;
    let x3 = if c3 == 0.0 {
        state.x3.clone()
    } else if c3 < 0.0 {
        return Err(SplitError::Configuration("block-3 map has a negative Gram scale".into()));
    } else {
        let dir = &(&w_tilde / gamma) - &(&r * rho);
        let v = &state.x3 + &(problem.map(2).adjoint(&dir) / c3);
        problem.objective(2).prox(&v, 1.0 / (gamma * c3))
    };

    // Multiplier and inertia memory.
    let l3_dx = problem.map(2).forward(&(&x3 - &state.x3));
    let w_next = &w_tilde - &((&l3_dx + &(&r * rho)) * gamma);
    let p_next = (&state.p - &(&r * (gamma * lambda_k))) * alpha_next;

    // Shadow dual sequence: y from the entry state, u from the mid-step
    // residual, z from the inverted change of variables.
    let y = &state.z_curr + &state.p;
    let u = &state.w - &(&r * gamma);
    let z_next = &(&w_next + &(problem.map(2).forward(&x3) * gamma))
        - &(&problem.rhs * gamma)
        - &p_next;

    Ok(StepParts {
        state: IterationState {
            x1,
            x2,
            x3,
            w: w_next,
            p: p_next,
            z_prev: state.z_curr.clone(),
            z_curr: z_next,
            y,
            u,
        },
        residual_mid: r,
    })
}

/// One relaxed inertial step with an explicitly supplied `α_{k+1}`.
///
/// Executes, in order: the bare-Lagrangian block-1 minimization, the
/// augmented block-2 minimization, the offset block-3 proximal step, the
/// multiplier update, and the inertia-memory update, then advances the
/// shadow dual sequence. Requires strong convexity (or a conjugate-gradient
/// closed form) on block 1 and scaled-identity Gram matrices on blocks 2–3;
/// anything else is a configuration error, and an inner fixed-point solve
/// that stalls is a numerical error.
pub fn riama_step(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
    alpha_next: f64,
    lambda_k: f64,
) -> Result<IterationState> {
    step_core(problem, state, gamma, lambda_k, |_| alpha_next).map(|p| p.state)
}

/// One plain three-block step: [`riama_step`] at `α = 0, λ = 1`, where the
/// multiplier update collapses to `w − γ(L1x1⁺ + L2x2⁺ + L3x3⁺ − b)`.
pub fn ama3_step(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
) -> Result<IterationState> {
    riama_step(problem, state, gamma, 0.0, 1.0)
}

/// One relaxed step: [`riama_step`] at `α = 0`, keeping the relaxation
/// offset `λ_k` in block 3 and the multiplier update.
pub fn rama3_step(
    problem: &SeparableProblem,
    state: &IterationState,
    gamma: f64,
    lambda_k: f64,
) -> Result<IterationState> {
    riama_step(problem, state, gamma, 0.0, lambda_k)
}

/// The online inertia rule
///
/// ```text
///     α_{k+1} = min( 1 / (k² ‖p − γλ_k r‖²_F), cap )
/// ```
///
/// whose `1/k²` weight makes `Σ α_{k+1}‖p − γλ_k r‖²` summable by
/// construction. A norm below 1e-300 returns `cap` directly (division
/// guard).
pub fn adaptive_alpha(
    k: usize,
    p: &Mat,
    gamma: f64,
    lambda_k: f64,
    residual: &Mat,
    cap: f64,
) -> f64 {
    let drift = p - &(residual * (gamma * lambda_k));
    let sq = frobenius_norm(&drift).powi(2);
    if sq < 1e-300 {
        return cap;
    }
    (1.0 / (k as f64 * k as f64 * sq)).min(cap)
}

// ── the driver ───────────────────────────────────────────────────────────

fn block<'a>(state: &'a IterationState, i: usize) -> &'a Mat {
    match i {
        0 => &state.x1,
        1 => &state.x2,
        _ => &state.x3,
    }
}

/// Runs one family member from a cold start until the larger watched-block
/// relative step drops to `stop.eps` or the budget runs out (which yields a
/// non-converged record, not an error).
///
/// Per iteration the trace records the constraint residual
/// `‖L1x1^{k+1} + L2x2^{k+1} + L3x3^k − b‖_F`, the watched relative steps,
/// and — when objective recording is on — the primal value
/// `f1(x1^{k+1}) + f2(x2^{k+1}) + f3(x3^k)` and the dual value at
/// `(w^k, u^k)` with `u^k = w^k − γ·r`. The KKT residual is evaluated once,
/// at the final iterate, into the last trace row.
pub fn run_ama(
    problem: &SeparableProblem,
    variant: AmaVariant,
    params: &SolverParams,
    stop: &StoppingRule,
) -> Result<RunRecord> {
    run_ama_with_state(problem, variant, params, stop).map(|(record, _)| record)
}

/// [`run_ama`] plus the terminal iterate, for callers that need the final
/// blocks (e.g. to score recovery against a ground truth).
pub fn run_ama_with_state(
    problem: &SeparableProblem,
    variant: AmaVariant,
    params: &SolverParams,
    stop: &StoppingRule,
) -> Result<(RunRecord, IterationState)> {
    if stop.watch.iter().any(|&i| i > 2) {
        return Err(SplitError::Parameter("watched block indices must be in 0..=2".into()));
    }
    let start = Instant::now();
    let gamma = params.gamma;
    let rule = variant.effective_alpha_rule();
    let mut state = IterationState::cold_start(problem, gamma);
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut converged = false;

    for k in 1..=stop.max_iter {
        let lambda_k = variant.effective_lambda(params, k);
        let parts = match rule {
            AlphaRule::Zero => step_core(problem, &state, gamma, lambda_k, |_| 0.0)?,
            AlphaRule::Constant(a) => step_core(problem, &state, gamma, lambda_k, |_| a)?,
            AlphaRule::Adaptive(cap) => {
                let p = &state.p;
                step_core(problem, &state, gamma, lambda_k, |r| {
                    adaptive_alpha(k, p, gamma, lambda_k, r, cap)
                })?
            }
        };

        let rel_l = rel_step(block(&parts.state, stop.watch[0]), block(&state, stop.watch[0]));
        let rel_s = rel_step(block(&parts.state, stop.watch[1]), block(&state, stop.watch[1]));
        let (primal_value, dual_value) = if stop.record_objectives {
            let primal =
                primal_objective(problem, &parts.state.x1, &parts.state.x2, &state.x3)?;
            let dual = dual_objective(problem, &state.w, &parts.state.u)?;
            (primal, dual)
        } else {
            (f64::NAN, f64::NAN)
        };
        trace.push(TraceRow {
            constraint_residual: frobenius_norm(&parts.residual_mid),
            rel_step_l: rel_l,
            rel_step_s: rel_s,
            primal_value,
            dual_value,
            kkt_residual: f64::NAN,
        });
        state = parts.state;
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
