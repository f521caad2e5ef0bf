//! Proximal-kernel contracts checked against independent oracles: scalar
//! grid minimization, spectrum shrinkage through a Jacobi Gram eigensolver,
//! random-perturbation optimality, and the conjugate-prox identity.

use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use splitkit::model::{frobenius_norm, Mat};
use splitkit::prox::{
    l1_norm_objective, nuclear_norm_objective, prox_conjugate, prox_l1, prox_nuclear,
    quadratic_objective,
};

fn randn(shape: (usize, usize), rng: &mut ChaCha12Rng) -> Mat {
    Array2::from_shape_fn(shape, |_| StandardNormal.sample(rng))
}

/// Nuclear norm through a cyclic Jacobi eigensolver on the Gram matrix — a
/// route fully independent of the library's decomposition code.
fn jacobi_nuclear_norm(a: &Mat) -> f64 {
    let (rows, cols) = a.dim();
    let mut g = if cols <= rows { a.t().dot(a) } else { a.dot(&a.t()) };
    let dim = g.nrows();
    let scale = 1.0 + frobenius_norm(&g);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += g[[p, q]] * g[[p, q]];
            }
        }
        if off.sqrt() <= 1e-28 * scale {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = g[[p, q]];
                if apq.abs() <= 1e-300 * scale {
                    continue;
                }
                let theta = 0.5 * (g[[q, q]] - g[[p, p]]) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let gkp = g[[k, p]];
                    let gkq = g[[k, q]];
                    g[[k, p]] = c * gkp - s * gkq;
                    g[[k, q]] = s * gkp + c * gkq;
                }
                for k in 0..dim {
                    let gpk = g[[p, k]];
                    let gqk = g[[q, k]];
                    g[[p, k]] = c * gpk - s * gqk;
                    g[[q, k]] = s * gpk + c * gqk;
                }
            }
        }
    }
    (0..dim).map(|i| g[[i, i]].max(0.0).sqrt()).sum()
}

// ── scalar grid oracle ───────────────────────────────────────────────────

/// On 1×1 inputs the soft threshold must agree with a brute-force grid
/// minimizer of `c|x| + ½(x − v)²` to the grid resolution.
#[test]
fn scalar_soft_threshold_matches_a_grid_minimizer() {
    for &v in &[-3.2f64, -0.4, 0.0, 0.7, 2.3, 4.9] {
        for &c in &[0.25f64, 1.0, 2.5] {
            let input = array![[v]];
            let got = prox_l1(&input, c).unwrap()[[0, 0]];

            let mut best_x = 0.0f64;
            let mut best_val = f64::INFINITY;
            let mut x = -6.0f64;
            while x <= 6.0 {
                let val = c * x.abs() + 0.5 * (x - v) * (x - v);
                if val < best_val {
                    best_val = val;
                    best_x = x;
                }
                x += 1e-3;
            }
            assert!(
                (got - best_x).abs() <= 1e-3,
                "v={v}, c={c}: prox {got} vs grid argmin {best_x}"
            );
        }
    }
}

#[test]
fn hand_computed_thresholds_are_exact() {
    let got = prox_l1(&array![[3.0, -0.5]], 1.0).unwrap();
    assert_eq!(got, array![[2.0, 0.0]]);

    let got = prox_nuclear(&array![[3.0, 0.0], [0.0, 1.0]], 2.0).unwrap();
    let want = array![[1.0, 0.0], [0.0, 0.0]];
    assert!(frobenius_norm(&(&got - &want)) <= 1e-12);
}

// ── perturbation optimality ──────────────────────────────────────────────

/// The singular value threshold output must beat a thousand random
/// perturbations on the objective `c‖X‖_* + ½‖X − V‖²_F`, with the nuclear
/// norm of every candidate coming from the independent eigensolver.
#[test]
fn nuclear_prox_beats_random_perturbations() {
    let mut rng = ChaCha12Rng::seed_from_u64(314);
    let v = randn((5, 5), &mut rng);
    let c = 1.3;
    let star = prox_nuclear(&v, c).unwrap();
    let objective = |x: &Mat| c * jacobi_nuclear_norm(x) + 0.5 * frobenius_norm(&(x - &v)).powi(2);
    let base = objective(&star);

    for trial in 0..1000 {
        let magnitude = 10f64.powf(-3.0 + 3.0 * (trial % 10) as f64 / 9.0); // 1e-3 ..= 1
        let direction = randn((5, 5), &mut rng);
        let step = &direction * (magnitude / frobenius_norm(&direction));
        let candidate = &star + &step;
        let val = objective(&candidate);
        assert!(
            base <= val + 1e-12,
            "trial {trial}: perturbation of size {magnitude:.1e} improved the objective \
             ({base} vs {val})"
        );
    }
}

// ── the conjugate-prox identity ──────────────────────────────────────────

/// `prox_{t f*}(v) + t · prox_{f/t}(v/t) = v` must hold to 1e-10 for every
/// kernel, at several step sizes, on random inputs.
#[test]
fn conjugate_prox_identity_holds_for_all_kernels() {
    let mut rng = ChaCha12Rng::seed_from_u64(2718);
    let blocks = [
        quadratic_objective(),
        l1_norm_objective(0.8).unwrap(),
        nuclear_norm_objective(1.7).unwrap(),
    ];
    for f in &blocks {
        for &t in &[0.3f64, 1.0, 2.7] {
            for _ in 0..5 {
                let v = randn((6, 4), &mut rng);
                let via_conjugate = prox_conjugate(f, &v, t).unwrap();
                let direct = f.prox(&(&v / t), 1.0 / t) * t;
                let total = &via_conjugate + &direct;
                assert!(
                    frobenius_norm(&(&total - &v)) <= 1e-10 * (1.0 + frobenius_norm(&v)),
                    "identity violated at t={t}"
                );
            }
        }
    }
}

/// The conjugate prox of the elementwise norm is the box projection — an
/// oracle computable with a bare clamp, independent of any prox code.
#[test]
fn conjugate_of_the_elementwise_norm_is_a_box_projection() {
    let beta = 0.6;
    let f = l1_norm_objective(beta).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    for &t in &[0.2f64, 1.0, 5.0] {
        let v = randn((7, 3), &mut rng) * 2.0;
        let got = prox_conjugate(&f, &v, t).unwrap();
        let want = v.mapv(|x| x.clamp(-beta, beta));
        assert!(
            frobenius_norm(&(&got - &want)) <= 1e-12,
            "projection must not depend on the step size"
        );
    }
}

/// The conjugate prox of the spectrum sum caps the spectrum: outputs live in
/// the spectral ball and small inputs pass through untouched.
#[test]
fn conjugate_of_the_spectrum_sum_caps_singular_values() {
    let beta = 0.9;
    let f = nuclear_norm_objective(beta).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(77);

    let big = randn((6, 6), &mut rng) * 3.0;
    let projected = prox_conjugate(&f, &big, 1.4).unwrap();
    let spectrum = splitkit::svd::singular_values(&projected).unwrap();
    assert!(spectrum[0] <= beta + 1e-9, "projection left the spectral ball");

    let small = randn((6, 6), &mut rng) * 1e-3; // spectral norm ≪ β
    let kept = prox_conjugate(&f, &small, 1.4).unwrap();
    assert!(frobenius_norm(&(&kept - &small)) <= 1e-10, "interior points must be fixed");
}

// ── nonexpansiveness ─────────────────────────────────────────────────────

/// Proximal maps are 1-Lipschitz: checked on seeded random pairs for both
/// thresholding kernels.
#[test]
fn thresholding_kernels_are_nonexpansive() {
    let mut rng = ChaCha12Rng::seed_from_u64(555);
    for _ in 0..25 {
        let a = randn((6, 6), &mut rng) * 2.0;
        let b = randn((6, 6), &mut rng) * 2.0;
        let gap = frobenius_norm(&(&a - &b));

        let la = prox_l1(&a, 0.7).unwrap();
        let lb = prox_l1(&b, 0.7).unwrap();
        assert!(frobenius_norm(&(&la - &lb)) <= gap + 1e-12);

        let na = prox_nuclear(&a, 0.7).unwrap();
        let nb = prox_nuclear(&b, 0.7).unwrap();
        assert!(frobenius_norm(&(&na - &nb)) <= gap + 1e-12);
    }
}
