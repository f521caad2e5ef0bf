//! Cross-checks of the singular value decomposition against an independent
//! oracle: a cyclic Jacobi eigensolver applied to the Gram matrix, which
//! shares no code with the library's bidiagonalization route.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use splitkit::model::{frobenius_norm, Mat};
use splitkit::svd::{shrink_singular_values, singular_values, spectral_norm, svd};

fn randn(shape: (usize, usize), rng: &mut ChaCha12Rng) -> Mat {
    Array2::from_shape_fn(shape, |_| StandardNormal.sample(rng))
}

/// Singular values by diagonalizing the (smaller) Gram matrix with cyclic
/// two-sided Jacobi rotations, sorted nonincreasing. Quadratic convergence
/// drives the off-diagonal mass far below the comparison tolerances here.
fn jacobi_singular_values(a: &Mat) -> Vec<f64> {
    let (rows, cols) = a.dim();
    let n = rows.min(cols);
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
    let mut vals: Vec<f64> = (0..dim).map(|i| g[[i, i]].max(0.0).sqrt()).collect();
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    vals.truncate(n);
    vals
}

/// A mixed bag of shapes and spectra: generic square, tall, wide, low rank,
/// and clustered singular values.
fn test_matrices() -> Vec<Mat> {
    let mut rng = ChaCha12Rng::seed_from_u64(4021);
    let mut cases = vec![
        randn((7, 7), &mut rng),
        randn((12, 5), &mut rng),
        randn((5, 12), &mut rng),
        randn((20, 20), &mut rng),
    ];
    // Rank 3 out of 10.
    let f1 = randn((10, 3), &mut rng);
    let f2 = randn((10, 3), &mut rng);
    cases.push(f1.dot(&f2.t()));
    // Nearly repeated spectrum: I + tiny noise.
    let eye = Array2::from_shape_fn((8, 8), |(i, j)| if i == j { 1.0 } else { 0.0 });
    cases.push(&eye + &(randn((8, 8), &mut rng) * 1e-10));
    cases
}

#[test]
fn spectra_match_the_gram_eigensolver() {
    for (case, a) in test_matrices().iter().enumerate() {
        let got = singular_values(a).unwrap();
        let want = jacobi_singular_values(a);
        assert_eq!(got.len(), want.len(), "case {case}: spectrum length");
        let top = want.first().copied().unwrap_or(0.0);
        for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
            assert!(
                (g - w).abs() <= 1e-8 * (1.0 + top),
                "case {case}, σ_{i}: {g} vs oracle {w}"
            );
        }
        let norm = spectral_norm(a).unwrap();
        assert!((norm - top).abs() <= 1e-8 * (1.0 + top), "case {case}: spectral norm");
    }
}

#[test]
fn a_two_by_two_with_integer_gram_eigenvalues_is_exact() {
    // [[3, 0], [4, 5]] has Gram eigenvalues 45 and 5: σ = (3√5, √5).
    let a = ndarray::array![[3.0, 0.0], [4.0, 5.0]];
    let got = singular_values(&a).unwrap();
    assert!((got[0] - 45f64.sqrt()).abs() <= 1e-12);
    assert!((got[1] - 5f64.sqrt()).abs() <= 1e-12);
}

#[test]
fn factors_reconstruct_and_stay_orthonormal() {
    for (case, a) in test_matrices().iter().enumerate() {
        let f = svd(a).unwrap();
        let scale = 1.0 + frobenius_norm(a);
        let recon_err = frobenius_norm(&(&f.reconstruct() - a));
        assert!(recon_err <= 1e-8 * scale, "case {case}: reconstruction error {recon_err:.3e}");

        let r = f.singular_values.len();
        let gram_u = f.u.t().dot(&f.u);
        let gram_v = f.v.t().dot(&f.v);
        let eye = Array2::from_shape_fn((r, r), |(i, j)| if i == j { 1.0 } else { 0.0 });
        assert!(frobenius_norm(&(&gram_u - &eye)) <= 1e-8, "case {case}: left factor");
        assert!(frobenius_norm(&(&gram_v - &eye)) <= 1e-8, "case {case}: right factor");

        for pair in f.singular_values.windows(2) {
            assert!(pair[0] >= pair[1], "case {case}: spectrum must be nonincreasing");
        }
    }
}

#[test]
fn shrinkage_agrees_with_shrinking_the_oracle_spectrum() {
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let a = randn((9, 6), &mut rng);
    let oracle = jacobi_singular_values(&a);
    let tau = oracle[2]; // kill all but the top two (plus any ties)
    let out = shrink_singular_values(&a, tau).unwrap();

    let expected_rank = oracle.iter().filter(|s| **s > tau).count();
    assert_eq!(out.rank, expected_rank);

    // The shrunk matrix's spectrum is max(σ − τ, 0) of the oracle spectrum.
    let shrunk_spectrum = jacobi_singular_values(&out.shrunk);
    for (got, want) in shrunk_spectrum.iter().zip(oracle.iter().map(|s| (s - tau).max(0.0))) {
        assert!((got - want).abs() <= 1e-8 * (1.0 + oracle[0]));
    }
}
