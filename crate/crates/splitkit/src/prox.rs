//! Closed-form proximal kernels and ready-made objective blocks.
//!
//! The three kernels the low-rank-plus-sparse experiments need — elementwise
//! soft-thresholding, singular-value soft-thresholding, and the quadratic
//! shrink — plus the Moreau-identity route to conjugate proximal maps, which
//! turns primal prox handles into the dual resolvents the splitting oracle
//! consumes.

use crate::model::{frobenius_dot, BlockObjective, Mat};
use crate::svd;
use crate::{Result, SplitError};
use std::sync::Arc;

/// Elementwise soft-threshold: `sign(M) .* max(|M| − c, 0)`, the minimizer
/// of `c‖X‖₁ + ½‖X−M‖²_F`. Entries with `|entry| == c` map to exactly 0.
pub fn prox_l1(m: &Mat, c: f64) -> Result<Mat> {
    if c < 0.0 || !c.is_finite() {
        return Err(SplitError::Parameter("soft-threshold level must be ≥ 0".into()));
    }
    Ok(m.mapv(|x| x.signum() * (x.abs() - c).max(0.0)))
}

/// Singular-value soft-threshold: `U·diag(max(σ − c, 0))·Vᵀ`, the minimizer
/// of `c‖X‖* + ½‖X−M‖²_F`.
pub fn prox_nuclear(m: &Mat, c: f64) -> Result<Mat> {
    if c < 0.0 || !c.is_finite() {
        return Err(SplitError::Parameter("singular-value threshold must be ≥ 0".into()));
    }
    Ok(svd::shrink_singular_values(m, c)?.shrunk)
}

/// Proximal map of the scaled conjugate, `prox_{t·f*}(v)`, through the
/// Moreau identity: `v − t·f.prox(v/t, 1/t)`.
pub fn prox_conjugate(f: &BlockObjective, v: &Mat, t: f64) -> Result<Mat> {
    if t <= 0.0 || !t.is_finite() {
        return Err(SplitError::Parameter("conjugate prox step must be > 0".into()));
    }
    let inner = f.prox(&(v / t), 1.0 / t);
    Ok(v - &(inner * t))
}

// ── ready-made objective blocks ──────────────────────────────────────────

/// `f(x) = ½‖x‖²_F`: strongly convex with μ = 1, `∇f = id`, `∇f* = id`,
/// `f* = f`, `prox_{t f}(v) = v/(1+t)`.
pub fn quadratic_objective() -> BlockObjective {
    BlockObjective::new(
        Arc::new(|x: &Mat| 0.5 * frobenius_dot(x, x)),
        Arc::new(|v: &Mat, t: f64| v / (1.0 + t)),
    )
    .with_strong_convexity(1.0)
    .with_grad(Arc::new(|x: &Mat| x.clone()))
    .with_grad_conjugate(Arc::new(|s: &Mat| s.clone()))
    .with_conjugate_value(Arc::new(|s: &Mat| 0.5 * frobenius_dot(s, s)))
}

/// `f(x) = β‖x‖*` (scaled nuclear norm). The conjugate is the indicator of
/// the spectral-norm ball of radius β, evaluated with absolute tolerance
/// 1e-8. The prox handle panics on non-finite input (a diverged solver),
/// as proximal handles are infallible by contract.
pub fn nuclear_norm_objective(beta: f64) -> Result<BlockObjective> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(SplitError::Parameter("nuclear norm scale must be > 0".into()));
    }
    Ok(BlockObjective::new(
        Arc::new(move |x: &Mat| {
            beta * svd::singular_values(x)
                .expect("nuclear norm of a non-finite matrix")
                .iter()
                .sum::<f64>()
        }),
        Arc::new(move |v: &Mat, t: f64| {
            prox_nuclear(v, beta * t).expect("singular-value threshold failed")
        }),
    )
    .with_conjugate_value(Arc::new(move |s: &Mat| {
        let top = svd::spectral_norm(s).expect("spectral norm of a non-finite matrix");
        if top <= beta + 1e-8 {
            0.0
        } else {
            f64::INFINITY
        }
    })))
}

/// `f(x) = β‖x‖₁` (scaled elementwise ℓ1 norm). The conjugate is the
/// indicator of the ℓ∞ ball of radius β, evaluated with absolute tolerance
/// 1e-8.
pub fn l1_norm_objective(beta: f64) -> Result<BlockObjective> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(SplitError::Parameter("ℓ1 norm scale must be > 0".into()));
    }
    Ok(BlockObjective::new(
        Arc::new(move |x: &Mat| beta * x.iter().map(|v| v.abs()).sum::<f64>()),
        Arc::new(move |v: &Mat, t: f64| {
            prox_l1(v, beta * t).expect("soft-threshold level must be finite")
        }),
    )
    .with_conjugate_value(Arc::new(move |s: &Mat| {
        let top = s.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if top <= beta + 1e-8 {
            0.0
        } else {
            f64::INFINITY
        }
    })))
}

// ──────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::frobenius_norm;
    use ndarray::array;

    #[test]
    fn soft_threshold_closed_form() {
        let m = array![[3.0, -0.5]];
        let out = prox_l1(&m, 1.0).unwrap();
        assert_eq!(out, array![[2.0, 0.0]]);
        // c = 0 is the identity.
        assert_eq!(prox_l1(&m, 0.0).unwrap(), m);
        // Exact-threshold ties map to zero.
        assert_eq!(prox_l1(&array![[0.5, -0.5]], 0.5).unwrap(), array![[0.0, 0.0]]);
        assert!(prox_l1(&m, -0.1).is_err());
    }

    #[test]
    fn singular_value_threshold_on_diagonals() {
        let m = array![[3.0, 0.0], [0.0, 1.0]];
        let out = prox_nuclear(&m, 2.0).unwrap();
        let want = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(frobenius_norm(&(&out - &want)) <= 1e-10);
        // c = 0 reproduces the input to reconstruction accuracy.
        let back = prox_nuclear(&m, 0.0).unwrap();
        assert!(frobenius_norm(&(&back - &m)) <= 1e-8 * frobenius_norm(&m));
        assert!(prox_nuclear(&m, -1.0).is_err());
    }

    #[test]
    fn conjugate_prox_clips_to_dual_ball() {
        // f = β‖·‖₁ ⇒ prox of t·f* projects onto the ℓ∞ ball of radius β.
        let beta = 0.3;
        let f = l1_norm_objective(beta).unwrap();
        let v = array![[5.0, -2.0], [0.1, -0.25]];
        let out = prox_conjugate(&f, &v, 2.0).unwrap();
        let want = array![[0.3, -0.3], [0.1, -0.25]];
        assert!(frobenius_norm(&(&out - &want)) <= 1e-12);
        assert!(prox_conjugate(&f, &v, 0.0).is_err());
    }

    #[test]
    fn conjugate_prox_of_unit_quadratic_halves() {
        let f = quadratic_objective();
        let v = array![[2.0, -4.0], [1.0, 0.0]];
        let out = prox_conjugate(&f, &v, 1.0).unwrap();
        assert!(frobenius_norm(&(&out - &(&v / 2.0))) <= 1e-12);
    }

    #[test]
    fn kernels_agree_on_nonnegative_sorted_diagonals() {
        let m = array![[5.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.5]];
        let a = prox_l1(&m, 1.0).unwrap();
        let b = prox_nuclear(&m, 1.0).unwrap();
        assert!(frobenius_norm(&(&a - &b)) <= 1e-9);
    }

    #[test]
    fn objective_block_values() {
        let q = quadratic_objective();
        let n = nuclear_norm_objective(0.05).unwrap();
        let l = l1_norm_objective(0.1).unwrap();
        let eye = Mat::eye(2);
        assert!((q.value(&eye) - 1.0).abs() < 1e-12);
        assert!((n.value(&eye) - 0.1).abs() < 1e-10); // 0.05 · (1 + 1)
        assert!((l.value(&eye) - 0.2).abs() < 1e-12);
        assert!(nuclear_norm_objective(0.0).is_err());
        assert!(l1_norm_objective(-1.0).is_err());
    }

    #[test]
    fn indicator_conjugates_respect_tolerance() {
        let l = l1_norm_objective(0.3).unwrap();
        let inside = array![[0.3, -0.3]];
        let outside = array![[0.31, 0.0]];
        assert_eq!(l.conjugate_value(&inside).unwrap(), 0.0);
        assert_eq!(l.conjugate_value(&outside).unwrap(), f64::INFINITY);
        let n = nuclear_norm_objective(2.0).unwrap();
        let inside = array![[2.0, 0.0], [0.0, 1.0]];
        let outside = array![[2.1, 0.0], [0.0, 0.0]];
        assert_eq!(n.conjugate_value(&inside).unwrap(), 0.0);
        assert_eq!(n.conjugate_value(&outside).unwrap(), f64::INFINITY);
    }
}
