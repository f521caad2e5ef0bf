//! Solvers for linearly constrained three-block separable convex programs
//!
//! The problem class is
//!
//! ```text
//!     minimize   f1(x1) + f2(x2) + f3(x3)
//!     subject to L1 x1 + L2 x2 + L3 x3 = b
//! ```
//!
//! over real matrix variables with the Frobenius inner product, where each
//! `f_i` is closed proper convex and exposed through its proximal map, and
//! `f1` is strongly convex.
//!
//! The crate provides:
//!
//! * [`model`] — problem containers, parameter records, iteration state, and
//!   solution-quality diagnostics (primal/dual objectives, a KKT residual).
//! * [`svd`] — a dependency-free dense singular value decomposition.
//! * [`prox`] — soft-thresholding, singular value thresholding, and
//!   conjugate proximal maps via the Moreau identity.
//! * [`splitting`] — the generic relaxed inertial three-operator splitting
//!   iteration with full step-size/relaxation/inertia validation.
//! * [`ama`] — alternating minimization solvers for the three-block problem:
//!   the inertial relaxed method, its relaxed special case, and the plain
//!   three-block variant, with a shadow dual sequence for cross-checks.
//! * [`admm`] — baseline methods: directly extended three-block ADMM, its
//!   prediction–correction variant with back substitution, and the
//!   semi-proximal variant.
//! * [`spcp`] — stable principal component pursuit: synthetic instances,
//!   problem assembly, and recovery metrics.

pub mod admm;
pub mod ama;
pub mod model;
pub mod prox;
pub mod spcp;
pub mod splitting;
pub mod svd;

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum SplitError {
    /// Operand dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A numeric argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The problem is structurally unable to support the requested operation
    /// (e.g. a subproblem has no closed form for the given linear map).
    #[error("unsupported configuration: {0}")]
    Configuration(String),
    /// A numeric routine failed (non-finite input, iteration cap, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Reading or writing an instance file failed.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SplitError>;

// Doc-tested book chapters: every Rust snippet in the guide compiles and runs
// against the current API as part of `cargo test`.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(problem_model, "../../../book/src/problem-model.md");
    chapter!(prox_toolbox, "../../../book/src/prox-toolbox.md");
    chapter!(operator_splitting, "../../../book/src/operator-splitting.md");
    chapter!(ama_family, "../../../book/src/ama-family.md");
    chapter!(admm_baselines, "../../../book/src/admm-baselines.md");
    chapter!(spcp_experiments, "../../../book/src/spcp-experiments.md");
}

