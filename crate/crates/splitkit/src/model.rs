//! Problem data model for three-block separable programs
//!
//! ```text
//!     minimize   f1(x1) + f2(x2) + f3(x3)
//!     subject to L1 x1 + L2 x2 + L3 x3 = b
//! ```
//!
//! with closed proper convex `f_i` given through proximal maps, and bounded
//! linear `L_i`. Everything is dense `f64` with the Frobenius inner product.
//! This module owns the problem/parameter/state containers and the three
//! scalar evaluations every solver and test shares: primal objective, dual
//! objective, and KKT residual.

use crate::{Result, SplitError};
use ndarray::Array2;
use std::sync::Arc;

/// Dense real matrix, the working element of every space here.
pub type Mat = Array2<f64>;

/// Proximal map handle: `(v, t) ↦ argmin_x f(x) + ‖x − v‖²_F / (2t)`.
pub type ProxFn = Arc<dyn Fn(&Mat, f64) -> Mat + Send + Sync>;
/// Extended-real function value handle (may return `±∞`).
pub type ValueFn = Arc<dyn Fn(&Mat) -> f64 + Send + Sync>;
/// Matrix-to-matrix map handle (gradients, linear maps).
pub type MapFn = Arc<dyn Fn(&Mat) -> Mat + Send + Sync>;
/// Per-iteration scalar schedule; the index is 1-based.
pub type Schedule = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

// ── small shared numerics ────────────────────────────────────────────────

/// Frobenius norm.
pub fn frobenius_norm(a: &Mat) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Frobenius inner product `⟨a, b⟩ = Σ a_ij b_ij`.
pub fn frobenius_dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Relative step size `‖new − old‖_F / ‖old‖_F`; falls back to the absolute
/// step when the reference point is zero.
pub fn rel_step(new: &Mat, old: &Mat) -> f64 {
    let diff = frobenius_norm(&(new - old));
    let denom = frobenius_norm(old);
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

// ── objective blocks ─────────────────────────────────────────────────────

/// One objective block `f_i`: a proximal map, a value handle, an optional
/// gradient (smooth blocks only), and the strong-convexity modulus `μ`
/// (zero when merely convex).
///
/// Optional conjugate handles let the dual side be evaluated exactly:
/// `conjugate_value` returns `f*(s)` (indicator-type conjugates decide
/// membership with absolute tolerance 1e-8), and `grad_conjugate` returns
/// `∇f*(s)` in closed form. When `strong_convexity > 0` and no closed forms
/// are supplied, both are recovered from the prox by a fixed-point loop.
#[derive(Clone)]
pub struct BlockObjective {
    pub prox: ProxFn,
    pub grad: Option<MapFn>,
    pub value: ValueFn,
    pub strong_convexity: f64,
    pub grad_conjugate: Option<MapFn>,
    pub conjugate_value: Option<ValueFn>,
}

impl std::fmt::Debug for BlockObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockObjective")
            .field("strong_convexity", &self.strong_convexity)
            .field("smooth", &self.grad.is_some())
            .field("has_conjugate", &self.conjugate_value.is_some())
            .finish()
    }
}

impl BlockObjective {
    /// A merely convex block from its value and proximal map.
    pub fn new(value: ValueFn, prox: ProxFn) -> Self {
        BlockObjective {
            prox,
            grad: None,
            value,
            strong_convexity: 0.0,
            grad_conjugate: None,
            conjugate_value: None,
        }
    }

    pub fn with_strong_convexity(mut self, mu: f64) -> Self {
        self.strong_convexity = mu;
        self
    }

    pub fn with_grad(mut self, grad: MapFn) -> Self {
        self.grad = Some(grad);
        self
    }

    pub fn with_grad_conjugate(mut self, g: MapFn) -> Self {
        self.grad_conjugate = Some(g);
        self
    }

    pub fn with_conjugate_value(mut self, c: ValueFn) -> Self {
        self.conjugate_value = Some(c);
        self
    }

    /// Evaluates `prox_{t·f}(v)`.
    pub fn prox(&self, v: &Mat, t: f64) -> Mat {
        (self.prox)(v, t)
    }

    /// Evaluates `f(x)`.
    pub fn value(&self, x: &Mat) -> f64 {
        (self.value)(x)
    }

    /// `∇f*(s) = argmax_x ⟨s, x⟩ − f(x)`, the conjugate gradient point.
    ///
    /// Uses the closed form when supplied. Otherwise requires
    /// `strong_convexity > 0` and iterates the fixed point
    /// `x ← prox_{f/μ}(x + s/μ)`, whose unique fixed point satisfies
    /// `s ∈ ∂f(x)`; the iteration contracts with factor ≤ 1/2. Stops at
    /// relative tolerance 1e-12 or 200 iterations.
    pub fn conjugate_gradient(&self, s: &Mat) -> Result<Mat> {
        if let Some(g) = &self.grad_conjugate {
            return Ok(g(s));
        }
        let mu = self.strong_convexity;
        if mu <= 0.0 {
            return Err(SplitError::Configuration(
                "conjugate gradient needs a closed form or strong convexity".into(),
            ));
        }
        let t = 1.0 / mu;
        let mut x = Mat::zeros(s.dim());
        for _ in 0..200 {
            let next = self.prox(&(&x + &(s * t)), t);
            let move_size = rel_step(&next, &x);
            x = next;
            if move_size <= 1e-12 {
                return Ok(x);
            }
        }
        Err(SplitError::Numerical(
            "conjugate-gradient fixed point did not reach 1e-12 within 200 iterations".into(),
        ))
    }

    /// `f*(s)`, through the closed form when supplied, otherwise via
    /// `f*(s) = ⟨s, x*⟩ − f(x*)` at the conjugate gradient point.
    pub fn conjugate_value(&self, s: &Mat) -> Result<f64> {
        if let Some(c) = &self.conjugate_value {
            return Ok(c(s));
        }
        let x = self.conjugate_gradient(s)?;
        Ok(frobenius_dot(s, &x) - self.value(&x))
    }
}

// ── linear block maps ────────────────────────────────────────────────────

/// A bounded linear map `L_i : H_i → H` with its adjoint and the two scalar
/// bounds the convergence theory consumes: an operator-norm bound `‖L_i‖`
/// and a lower bound `θ_i > 0` with `‖L_i x‖ ≥ θ_i ‖x‖`.
///
/// `gram_scale` is `Some(c)` exactly when `L_i* L_i = c·I`; the splitting
/// steps that need to invert block subproblems require it.
#[derive(Clone)]
pub struct LinearBlockMap {
    pub forward: MapFn,
    pub adjoint: MapFn,
    pub norm_bound: f64,
    pub lower_bound: f64,
    /// Shape of the domain `H_i` (solvers allocate block iterates from it).
    pub domain_shape: (usize, usize),
    /// `Some(c)` when `L* L = c I` on the domain.
    pub gram_scale: Option<f64>,
}

impl std::fmt::Debug for LinearBlockMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearBlockMap")
            .field("norm_bound", &self.norm_bound)
            .field("lower_bound", &self.lower_bound)
            .field("domain_shape", &self.domain_shape)
            .field("gram_scale", &self.gram_scale)
            .finish()
    }
}

impl LinearBlockMap {
    /// The identity on `shape`-sized matrices.
    pub fn identity(shape: (usize, usize)) -> Self {
        LinearBlockMap {
            forward: Arc::new(|x: &Mat| x.clone()),
            adjoint: Arc::new(|y: &Mat| y.clone()),
            norm_bound: 1.0,
            lower_bound: 1.0,
            domain_shape: shape,
            gram_scale: Some(1.0),
        }
    }

    /// The scaling `x ↦ a·x` with `a ≠ 0`.
    pub fn scaled_identity(shape: (usize, usize), a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(SplitError::Parameter(
                "scaled identity map needs a nonzero finite factor".into(),
            ));
        }
        Ok(LinearBlockMap {
            forward: Arc::new(move |x: &Mat| x * a),
            adjoint: Arc::new(move |y: &Mat| y * a),
            norm_bound: a.abs(),
            lower_bound: a.abs(),
            domain_shape: shape,
            gram_scale: Some(a * a),
        })
    }

    /// The zero map from `domain`-sized matrices into `range`-sized ones.
    ///
    /// Useful for collapsing a block out of the three-block template: a block
    /// with a zero map contributes nothing to the coupling constraint, and
    /// solvers leave its iterate untouched (`gram_scale` is 0, so the block
    /// subproblem has no curvature to invert).
    pub fn zero(domain: (usize, usize), range: (usize, usize)) -> Self {
        LinearBlockMap {
            forward: Arc::new(move |_: &Mat| Mat::zeros(range)),
            adjoint: Arc::new(move |_: &Mat| Mat::zeros(domain)),
            norm_bound: 0.0,
            lower_bound: 0.0,
            domain_shape: domain,
            gram_scale: Some(0.0),
        }
    }

    /// A custom map from explicit handles and bounds.
    pub fn custom(
        forward: MapFn,
        adjoint: MapFn,
        norm_bound: f64,
        lower_bound: f64,
        domain_shape: (usize, usize),
        gram_scale: Option<f64>,
    ) -> Self {
        LinearBlockMap { forward, adjoint, norm_bound, lower_bound, domain_shape, gram_scale }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        (self.forward)(x)
    }

    pub fn adjoint(&self, y: &Mat) -> Mat {
        (self.adjoint)(y)
    }

    /// The `c` with `L*L = cI`, or a configuration error for maps without
    /// a scaled-identity Gram matrix.
    pub fn gram_scale(&self) -> Result<f64> {
        self.gram_scale.ok_or_else(|| {
            SplitError::Configuration(
                "this step requires a block map with L*L = c·I (gram_scale)".into(),
            )
        })
    }
}

// ── the assembled problem ────────────────────────────────────────────────

/// Three `(f_i, L_i)` pairs plus the right-hand side `b`.
#[derive(Clone, Debug)]
pub struct SeparableProblem {
    pub blocks: [(BlockObjective, LinearBlockMap); 3],
    pub rhs: Mat,
}

impl SeparableProblem {
    pub fn new(blocks: [(BlockObjective, LinearBlockMap); 3], rhs: Mat) -> Self {
        SeparableProblem { blocks, rhs }
    }

    pub fn objective(&self, i: usize) -> &BlockObjective {
        &self.blocks[i].0
    }

    pub fn map(&self, i: usize) -> &LinearBlockMap {
        &self.blocks[i].1
    }

    /// Constraint residual `L1 x1 + L2 x2 + L3 x3 − b`.
    pub fn residual(&self, x1: &Mat, x2: &Mat, x3: &Mat) -> Mat {
        let mut r = self.map(0).forward(x1);
        r += &self.map(1).forward(x2);
        r += &self.map(2).forward(x3);
        r -= &self.rhs;
        r
    }

    /// The same problem with blocks reordered by `order` (a permutation of
    /// `{0,1,2}`): block `i` of the result is block `order[i]` of `self`.
    /// Handles are shared, not copied.
    pub fn permuted(&self, order: [usize; 3]) -> SeparableProblem {
        SeparableProblem {
            blocks: [
                self.blocks[order[0]].clone(),
                self.blocks[order[1]].clone(),
                self.blocks[order[2]].clone(),
            ],
            rhs: self.rhs.clone(),
        }
    }

    fn check_block_shape(&self, i: usize, x: &Mat) -> Result<()> {
        let want = self.map(i).domain_shape;
        if x.dim() != want {
            return Err(SplitError::Shape(format!(
                "block {} point has shape {:?}, expected {:?}",
                i + 1,
                x.dim(),
                want
            )));
        }
        Ok(())
    }

    fn check_dual_shape(&self, w: &Mat) -> Result<()> {
        if w.dim() != self.rhs.dim() {
            return Err(SplitError::Shape(format!(
                "dual point has shape {:?}, expected {:?}",
                w.dim(),
                self.rhs.dim()
            )));
        }
        Ok(())
    }
}

// ── solver parameters ────────────────────────────────────────────────────

/// Scalar data of the splitting iterations: step size γ, safety margin
/// ε̄ ∈ (0,1), cocoercivity constant β (= μ/‖L1‖² for the three-block
/// problem), the inertia schedule α_k and relaxation schedule λ_k (both
/// 1-based), the auxiliary bound constants σ, δ, and the inertia cap α.
///
/// `adaptive_inertia` switches the inertia rule from the fixed schedule to
/// the online choice `α_{k+1} = min(1/(k²‖p^k − γλ_k r^k‖²_F), alpha_cap)`,
/// which forces the summability the convergence theory asks for.
#[derive(Clone)]
pub struct SolverParams {
    pub gamma: f64,
    pub eps_bar: f64,
    pub beta: f64,
    pub alpha_schedule: Schedule,
    pub lambda_schedule: Schedule,
    pub sigma: f64,
    pub delta: f64,
    pub alpha_cap: f64,
    pub adaptive_inertia: bool,
}

impl std::fmt::Debug for SolverParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverParams")
            .field("gamma", &self.gamma)
            .field("eps_bar", &self.eps_bar)
            .field("beta", &self.beta)
            .field("sigma", &self.sigma)
            .field("delta", &self.delta)
            .field("alpha_cap", &self.alpha_cap)
            .field("adaptive_inertia", &self.adaptive_inertia)
            .finish()
    }
}

impl SolverParams {
    /// Parameters with no inertia (α ≡ 0) and no relaxation (λ ≡ 1);
    /// σ, δ default to 1e-6 and 1.
    pub fn new(gamma: f64, beta: f64, eps_bar: f64) -> Self {
        SolverParams {
            gamma,
            eps_bar,
            beta,
            alpha_schedule: Arc::new(|_| 0.0),
            lambda_schedule: Arc::new(|_| 1.0),
            sigma: 1e-6,
            delta: 1.0,
            alpha_cap: 0.0,
            adaptive_inertia: false,
        }
    }

    /// Constant inertia `α` from the second iteration on (`α_1 = 0`, as the
    /// convergence conditions require), with `alpha_cap = α`.
    pub fn with_constant_inertia(mut self, alpha: f64) -> Self {
        self.alpha_schedule = Arc::new(move |k| if k <= 1 { 0.0 } else { alpha });
        self.alpha_cap = alpha;
        self.adaptive_inertia = false;
        self
    }

    /// Online inertia capped at `cap` (see the type-level docs).
    pub fn with_adaptive_inertia(mut self, cap: f64) -> Self {
        self.alpha_schedule = Arc::new(|_| 0.0);
        self.alpha_cap = cap;
        self.adaptive_inertia = true;
        self
    }

    /// Constant relaxation `λ`.
    pub fn with_constant_relaxation(mut self, lambda: f64) -> Self {
        self.lambda_schedule = Arc::new(move |_| lambda);
        self
    }

    /// Explicit auxiliary bound constants σ, δ.
    pub fn with_bounds(mut self, sigma: f64, delta: f64) -> Self {
        self.sigma = sigma;
        self.delta = delta;
        self
    }

    /// `ᾱ = 1/(2 − ε̄)`, the averaging constant the relaxation bound uses.
    pub fn alpha_bar(&self) -> f64 {
        1.0 / (2.0 - self.eps_bar)
    }

    pub fn alpha_at(&self, k: usize) -> f64 {
        (self.alpha_schedule)(k)
    }

    pub fn lambda_at(&self, k: usize) -> f64 {
        (self.lambda_schedule)(k)
    }
}

// ── iteration state ──────────────────────────────────────────────────────

/// Full state of one splitting iteration: the three primal blocks, the
/// multiplier `w`, the inertia memory `p`, and the dual shadow sequence
/// `(z_prev, z_curr, y, u)` maintained for diagnostics and the dual-side
/// oracle. The invariant `p = α_k (z_curr − z_prev)` holds after every step
/// of the inertial methods.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub x1: Mat,
    pub x2: Mat,
    pub x3: Mat,
    pub w: Mat,
    pub p: Mat,
    pub z_prev: Mat,
    pub z_curr: Mat,
    pub y: Mat,
    pub u: Mat,
}

impl IterationState {
    /// Cold start: all blocks and the multiplier zero, shadow sequence
    /// seeded consistently (`z = w + γ L3 x3 − γ b`, both slots equal).
    pub fn cold_start(problem: &SeparableProblem, gamma: f64) -> Self {
        let x1 = Mat::zeros(problem.map(0).domain_shape);
        let x2 = Mat::zeros(problem.map(1).domain_shape);
        let x3 = Mat::zeros(problem.map(2).domain_shape);
        let w = Mat::zeros(problem.rhs.dim());
        Self::from_initial(problem, x1, x2, x3, w, gamma)
    }

    /// Warm start from explicit blocks and multiplier; `p = 0` and the
    /// shadow pair is initialized to `z = w + γ L3 x3 − γ b`.
    pub fn from_initial(
        problem: &SeparableProblem,
        x1: Mat,
        x2: Mat,
        x3: Mat,
        w: Mat,
        gamma: f64,
    ) -> Self {
        let z = &w + &(problem.map(2).forward(&x3) * gamma) - &(&problem.rhs * gamma);
        let p = Mat::zeros(w.dim());
        let u = w.clone();
        IterationState {
            x1,
            x2,
            x3,
            y: z.clone(),
            z_prev: z.clone(),
            z_curr: z,
            w,
            p,
            u,
        }
    }
}

// ── run records ──────────────────────────────────────────────────────────

/// One row of the per-iteration trace.
///
/// `rel_step_l` / `rel_step_s` are the relative step sizes of the two
/// watched blocks (for the low-rank-plus-sparse experiments: the low-rank
/// and sparse factors). `primal_value` / `dual_value` are NaN when objective
/// recording is off, and `kkt_residual` is NaN except where a stopping rule
/// requests it (it costs three prox calls).
#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub constraint_residual: f64,
    pub rel_step_l: f64,
    pub rel_step_s: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub kkt_residual: f64,
}

/// Terminal summary of a run.
#[derive(Clone, Copy, Debug)]
pub struct Terminal {
    pub converged: bool,
    pub wall_seconds: f64,
}

/// Iteration count, trace, and terminal summary of one solver run.
/// The trace has exactly `iterations` rows.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub terminal: Terminal,
}

/// Stopping policy shared by all iterative solvers: stop when the larger of
/// the two watched blocks' relative steps drops to `eps`, or at `max_iter`.
///
/// `watch` names the two block indices (0-based) whose relative steps feed
/// the test and the trace columns `rel_step_l` / `rel_step_s`, in that
/// order. `record_objectives` turns on per-iteration primal/dual values
/// (off by default: the dual value costs a singular value decomposition per
/// iteration on the low-rank experiments).
#[derive(Clone, Debug)]
pub struct StoppingRule {
    pub eps: f64,
    pub max_iter: usize,
    pub watch: [usize; 2],
    pub record_objectives: bool,
}

impl StoppingRule {
    pub fn new(eps: f64, max_iter: usize) -> Self {
        StoppingRule { eps, max_iter, watch: [1, 2], record_objectives: false }
    }

    pub fn watching(mut self, watch: [usize; 2]) -> Self {
        self.watch = watch;
        self
    }

    pub fn recording_objectives(mut self) -> Self {
        self.record_objectives = true;
        self
    }
}

// ── shared evaluations ───────────────────────────────────────────────────

/// Primal objective `f1(x1) + f2(x2) + f3(x3)`; `+∞` when a point is
/// outside a domain.
pub fn primal_objective(problem: &SeparableProblem, x1: &Mat, x2: &Mat, x3: &Mat) -> Result<f64> {
    problem.check_block_shape(0, x1)?;
    problem.check_block_shape(1, x2)?;
    problem.check_block_shape(2, x3)?;
    Ok(problem.objective(0).value(x1)
        + problem.objective(1).value(x2)
        + problem.objective(2).value(x3))
}

/// Dual objective under the mixed `(w, u)` evaluation
///
/// ```text
///   −f1*(L1* w) − f2*(L2* u) − f3*(L3* w) + ⟨w, b⟩ ,
/// ```
///
/// where `u` is the auxiliary dual point certifying the middle block.
/// Indicator-type conjugates decide feasibility with absolute tolerance
/// 1e-8; any infeasible slot makes the value `−∞`.
pub fn dual_objective(problem: &SeparableProblem, w: &Mat, u: &Mat) -> Result<f64> {
    problem.check_dual_shape(w)?;
    problem.check_dual_shape(u)?;
    let s1 = problem.map(0).adjoint(w);
    let s2 = problem.map(1).adjoint(u);
    let s3 = problem.map(2).adjoint(w);
    let c1 = problem.objective(0).conjugate_value(&s1)?;
    let c2 = problem.objective(1).conjugate_value(&s2)?;
    let c3 = problem.objective(2).conjugate_value(&s3)?;
    if c1.is_infinite() || c2.is_infinite() || c3.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-c1 - c2 - c3 + frobenius_dot(w, &problem.rhs))
}

/// KKT residual: the largest of the three stationarity residuals
/// `‖x_i − prox_{f_i}(x_i + L_i* w)‖_F` (zero exactly when
/// `L_i* w ∈ ∂f_i(x_i)`) and the feasibility residual
/// `‖L1 x1 + L2 x2 + L3 x3 − b‖_F`. Zero exactly at saddle points.
pub fn kkt_residual(
    problem: &SeparableProblem,
    x1: &Mat,
    x2: &Mat,
    x3: &Mat,
    w: &Mat,
) -> Result<f64> {
    problem.check_block_shape(0, x1)?;
    problem.check_block_shape(1, x2)?;
    problem.check_block_shape(2, x3)?;
    problem.check_dual_shape(w)?;
    let mut worst: f64 = frobenius_norm(&problem.residual(x1, x2, x3));
    for (i, x) in [(0usize, x1), (1, x2), (2, x3)] {
        let s = problem.map(i).adjoint(w);
        let proxed = problem.objective(i).prox(&(x + &s), 1.0);
        worst = worst.max(frobenius_norm(&(x - &proxed)));
    }
    Ok(worst)
}

// ──────────────────────────────────────────────────────────────────────────
