//! Stable principal component pursuit: synthetic instances, assembly into
//! the three-block template, and recovery metrics.
//!
//! The decomposition model is `b = L + S + Z` with `L` low rank, `S` sparse,
//! and `Z` small dense noise, solved as
//!
//! ```text
//!     minimize  ½‖Z‖²_F + β1‖L‖_* + β2‖S‖₁
//!     subject to Z + L + S = b ,
//! ```
//!
//! i.e. block 1 = `Z` (strongly convex), block 2 = `L`, block 3 = `S`, all
//! three block maps identities.

use crate::model::{frobenius_norm, rel_step, Mat};
use crate::prox::{l1_norm_objective, nuclear_norm_objective, quadratic_objective};
use crate::model::{LinearBlockMap, SeparableProblem};
use crate::svd::singular_values;
use crate::{Result, SplitError};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{Read, Write};
use std::path::Path;

/// A synthetic decomposition instance with its ground truth.
#[derive(Clone, Debug)]
pub struct SpcpInstance {
    pub m: usize,
    /// True rank of `l_true`.
    pub r: usize,
    pub l_true: Mat,
    pub s_true: Mat,
    pub z_true: Mat,
    /// `l_true + s_true + z_true`, exactly.
    pub b: Mat,
    pub beta1: f64,
    /// `beta1 / √m`.
    pub beta2: f64,
    pub seed: u64,
}

/// Recovery quality of one iterate pair against an instance's ground truth.
#[derive(Clone, Copy, Debug)]
pub struct RecoveryMetrics {
    /// `‖L_k − L*‖_F / ‖L*‖_F` (absolute when `L* = 0`).
    pub rel_l_star: f64,
    /// `‖S_k − S*‖_F / ‖S*‖_F` (absolute when `S* = 0`).
    pub rel_s_star: f64,
    /// Count of singular values of `L_k` above `1e-6·σ_max`.
    pub rank_l_k: usize,
    /// Relative successive-iterate steps (the stopping quantities).
    pub rel_l_step: f64,
    pub rel_s_step: f64,
}

// ── generation ───────────────────────────────────────────────────────────

/// Draws a seeded instance: `L* = L₁L₂ᵀ` with iid standard normal `m×r`
/// factors (`r = round(rank_frac·m)`), `S*` with exactly
/// `round(sparsity_frac·m²)` nonzeros at distinct uniform positions and
/// values uniform on `[−500, 500]`, `Z*` iid normal with the given standard
/// deviation, and `b = L* + S* + Z*`.
///
/// Each matrix draws from its own RNG stream of one seeded generator, so
/// changing one fraction never perturbs the other matrices.
pub fn gen_spcp_instance(
    m: usize,
    rank_frac: f64,
    sparsity_frac: f64,
    noise_std: f64,
    beta1: f64,
    seed: u64,
) -> Result<SpcpInstance> {
    if m == 0 {
        return Err(SplitError::Parameter("instance size m must be positive".into()));
    }
    let rank_mass = rank_frac * m as f64;
    if !(rank_mass > 0.0 && rank_mass < m as f64) {
        return Err(SplitError::Parameter(format!(
            "rank_frac·m = {rank_mass} must lie strictly between 0 and m"
        )));
    }
    if !(0.0..=1.0).contains(&sparsity_frac) {
        return Err(SplitError::Parameter("sparsity_frac must lie in [0,1]".into()));
    }
    if noise_std < 0.0 || !noise_std.is_finite() {
        return Err(SplitError::Parameter("noise_std must be nonnegative".into()));
    }
    if beta1 <= 0.0 || !beta1.is_finite() {
        return Err(SplitError::Parameter("beta1 must be positive".into()));
    }

    let r = rank_mass.round() as usize;
    let nnz = (sparsity_frac * (m * m) as f64).round() as usize;

    let stream = |n: u64| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(n);
        rng
    };

    let mut rng_a = stream(0);
    let factor_a = Array2::from_shape_fn((m, r), |_| StandardNormal.sample(&mut rng_a));
    let mut rng_b = stream(1);
    let factor_b = Array2::from_shape_fn((m, r), |_| StandardNormal.sample(&mut rng_b));
    let l_true: Mat = factor_a.dot(&factor_b.t());

    // Exact support size via partial Fisher–Yates over linear indices.
    let mut rng_support = stream(2);
    let mut positions: Vec<u32> = (0..(m * m) as u32).collect();
    for i in 0..nnz {
        let j = rng_support.random_range(i..m * m);
        positions.swap(i, j);
    }
    let mut rng_values = stream(3);
    let mut s_true = Mat::zeros((m, m));
    for &pos in &positions[..nnz] {
        let (i, j) = ((pos as usize) / m, (pos as usize) % m);
        s_true[[i, j]] = rng_values.random::<f64>() * 1000.0 - 500.0;
    }

    let mut rng_noise = stream(4);
    let z_true: Mat =
        Array2::from_shape_fn((m, m), |_| {
            let g: f64 = StandardNormal.sample(&mut rng_noise);
            g * noise_std
        });

    let b = &(&l_true + &s_true) + &z_true;
    let beta2 = beta1 / (m as f64).sqrt();
    Ok(SpcpInstance { m, r, l_true, s_true, z_true, b, beta1, beta2, seed })
}

/// Assembles the instance into the three-block template: quadratic noise
/// block, nuclear-norm low-rank block, ℓ1 sparse block, identity maps,
/// right-hand side `b`. The first block has modulus 1 and unit map norm, so
/// the cocoercivity constant for solver parameters is `β = 1`.
pub fn assemble_spcp_problem(inst: &SpcpInstance) -> SeparableProblem {
    let shape = (inst.m, inst.m);
    SeparableProblem::new(
        [
            (quadratic_objective(), LinearBlockMap::identity(shape)),
            (
                nuclear_norm_objective(inst.beta1).expect("beta1 validated at generation"),
                LinearBlockMap::identity(shape),
            ),
            (
                l1_norm_objective(inst.beta2).expect("beta2 positive by construction"),
                LinearBlockMap::identity(shape),
            ),
        ],
        inst.b.clone(),
    )
}

/// Computes recovery ratios for the current iterates and the rank of `L_k`
/// (singular values above `1e-6·σ_max` — one order below the signal floor
/// for the reference noise level).
pub fn recovery_metrics(
    inst: &SpcpInstance,
    l_k: &Mat,
    s_k: &Mat,
    l_prev: &Mat,
    s_prev: &Mat,
) -> Result<RecoveryMetrics> {
    let rel_against = |x: &Mat, truth: &Mat| {
        let denom = frobenius_norm(truth);
        let err = frobenius_norm(&(x - truth));
        if denom == 0.0 {
            err
        } else {
            err / denom
        }
    };
    let sv = singular_values(l_k)?;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let rank_l_k = if sigma_max == 0.0 {
        0
    } else {
        sv.iter().filter(|s| **s > 1e-6 * sigma_max).count()
    };
    Ok(RecoveryMetrics {
        rel_l_star: rel_against(l_k, &inst.l_true),
        rel_s_star: rel_against(s_k, &inst.s_true),
        rank_l_k,
        rel_l_step: rel_step(l_k, l_prev),
        rel_s_step: rel_step(s_k, s_prev),
    })
}

// ── instance files ───────────────────────────────────────────────────────

const MAGIC: &[u8; 4] = b"SPCP";
const VERSION: u32 = 1;

fn write_matrix(out: &mut impl Write, mat: &Mat) -> std::io::Result<()> {
    for value in mat.iter() {
        out.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

fn read_matrix(input: &mut impl Read, m: usize) -> Result<Mat> {
    let mut buf = vec![0u8; m * m * 8];
    input.read_exact(&mut buf)?;
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Array2::from_shape_vec((m, m), values)
        .map_err(|e| SplitError::Shape(format!("instance payload malformed: {e}")))
}

/// Writes the instance as a flat little-endian binary container:
/// `magic "SPCP"`, version, `m`, `r`, `seed`, `beta1`, then the row-major
/// float payloads of `L*`, `S*`, `Z*` (`b` is reconstructed on load).
pub fn save_instance(inst: &SpcpInstance, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(inst.m as u64).to_le_bytes())?;
    out.write_all(&(inst.r as u64).to_le_bytes())?;
    out.write_all(&inst.seed.to_le_bytes())?;
    out.write_all(&inst.beta1.to_le_bytes())?;
    write_matrix(&mut out, &inst.l_true)?;
    write_matrix(&mut out, &inst.s_true)?;
    write_matrix(&mut out, &inst.z_true)?;
    out.flush()?;
    Ok(())
}

/// Reads a container written by [`save_instance`].
pub fn load_instance(path: impl AsRef<Path>) -> Result<SpcpInstance> {
    let file = std::fs::File::open(path)?;
    let mut input = std::io::BufReader::new(file);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SplitError::Parameter("not an instance file (bad magic)".into()));
    }
    let mut word4 = [0u8; 4];
    input.read_exact(&mut word4)?;
    let version = u32::from_le_bytes(word4);
    if version != VERSION {
        return Err(SplitError::Parameter(format!(
            "unsupported instance file version {version}"
        )));
    }
    let mut word8 = [0u8; 8];
    input.read_exact(&mut word8)?;
    let m = u64::from_le_bytes(word8) as usize;
    input.read_exact(&mut word8)?;
    let r = u64::from_le_bytes(word8) as usize;
    input.read_exact(&mut word8)?;
    let seed = u64::from_le_bytes(word8);
    input.read_exact(&mut word8)?;
    let beta1 = f64::from_le_bytes(word8);
    if m == 0 || beta1 <= 0.0 || !beta1.is_finite() {
        return Err(SplitError::Parameter("instance header is inconsistent".into()));
    }
    let l_true = read_matrix(&mut input, m)?;
    let s_true = read_matrix(&mut input, m)?;
    let z_true = read_matrix(&mut input, m)?;
    let b = &(&l_true + &s_true) + &z_true;
    let beta2 = beta1 / (m as f64).sqrt();
    Ok(SpcpInstance { m, r, l_true, s_true, z_true, b, beta1, beta2, seed })
}

// ──────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kkt_residual;

    #[test]
    fn counts_match_the_requested_fractions() {
        let inst = gen_spcp_instance(200, 0.05, 0.05, 1e-5, 0.05, 7).unwrap();
        assert_eq!(inst.r, 10);
        let nnz = inst.s_true.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, 2000, "support size must be exact");
        assert!((inst.beta2 - 0.05 / 200f64.sqrt()).abs() < 1e-18);
    }

    #[test]
    fn b_is_the_exact_sum() {
        let inst = gen_spcp_instance(30, 0.1, 0.05, 1e-5, 0.05, 3).unwrap();
        let sum = &(&inst.l_true + &inst.s_true) + &inst.z_true;
        assert_eq!(inst.b, sum);
    }

    #[test]
    fn empty_support_gives_a_zero_sparse_part() {
        let inst = gen_spcp_instance(20, 0.05, 0.0, 1e-5, 0.05, 11).unwrap();
        assert_eq!(frobenius_norm(&inst.s_true), 0.0);
        assert_eq!(inst.b, &inst.l_true + &inst.z_true);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = gen_spcp_instance(25, 0.2, 0.1, 1e-5, 0.05, 42).unwrap();
        let b = gen_spcp_instance(25, 0.2, 0.1, 1e-5, 0.05, 42).unwrap();
        assert_eq!(a.b, b.b);
        assert_eq!(a.s_true, b.s_true);
        let c = gen_spcp_instance(25, 0.2, 0.1, 1e-5, 0.05, 43).unwrap();
        assert!(frobenius_norm(&(&a.b - &c.b)) > 0.0, "different seeds, different data");
    }

    #[test]
    fn ground_truth_rank_is_exact() {
        for (m, frac) in [(20usize, 0.05f64), (40, 0.1), (25, 0.2)] {
            let inst = gen_spcp_instance(m, frac, 0.05, 1e-5, 0.05, 5).unwrap();
            let sv = singular_values(&inst.l_true).unwrap();
            let top = sv[0];
            assert!(sv[inst.r - 1] > 1e-6 * top, "σ_r must be signal-sized");
            if inst.r < m {
                assert!(sv[inst.r] < 1e-8 * top, "σ_(r+1) must be numerically zero");
            }
        }
    }

    #[test]
    fn fraction_gates_reject_bad_input() {
        assert!(gen_spcp_instance(20, 0.0, 0.05, 1e-5, 0.05, 1).is_err());
        assert!(gen_spcp_instance(20, 1.0, 0.05, 1e-5, 0.05, 1).is_err());
        assert!(gen_spcp_instance(20, 0.05, 1.5, 1e-5, 0.05, 1).is_err());
        assert!(gen_spcp_instance(20, 0.05, 0.05, -1.0, 0.05, 1).is_err());
        assert!(gen_spcp_instance(0, 0.05, 0.05, 1e-5, 0.05, 1).is_err());
    }

    #[test]
    fn assembled_blocks_delegate_to_the_kernels() {
        let inst = gen_spcp_instance(6, 0.2, 0.1, 1e-5, 0.05, 9).unwrap();
        let problem = assemble_spcp_problem(&inst);
        let v = Mat::from_shape_fn((6, 6), |(i, j)| (i as f64) - (j as f64) * 0.5);
        // Quadratic block: prox(v, t) = v/(1+t).
        let got = problem.objective(0).prox(&v, 0.7);
        assert!(frobenius_norm(&(&got - &(&v / 1.7))) < 1e-15);
        // Sparse block: soft threshold at t·β2.
        let got = problem.objective(2).prox(&v, 2.0);
        let want = v.mapv(|x| x.signum() * (x.abs() - 2.0 * inst.beta2).max(0.0));
        assert_eq!(got, want);
    }

    #[test]
    fn kkt_vanishes_at_the_origin_of_an_empty_instance() {
        // b = 0 instance: all-zero blocks and multiplier solve the problem.
        let mut inst = gen_spcp_instance(5, 0.2, 0.2, 1e-5, 0.05, 2).unwrap();
        inst.l_true = Mat::zeros((5, 5));
        inst.s_true = Mat::zeros((5, 5));
        inst.z_true = Mat::zeros((5, 5));
        inst.b = Mat::zeros((5, 5));
        let problem = assemble_spcp_problem(&inst);
        let zero = Mat::zeros((5, 5));
        let res = kkt_residual(&problem, &zero, &zero, &zero, &zero).unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn metrics_report_scaling_exactly() {
        let inst = gen_spcp_instance(12, 0.25, 0.1, 1e-5, 0.05, 17).unwrap();
        let same = recovery_metrics(&inst, &inst.l_true, &inst.s_true, &inst.l_true, &inst.s_true)
            .unwrap();
        assert_eq!(same.rel_l_star, 0.0);
        assert_eq!(same.rel_s_star, 0.0);
        assert_eq!(same.rank_l_k, inst.r);
        let doubled = &inst.l_true * 2.0;
        let scaled =
            recovery_metrics(&inst, &doubled, &inst.s_true, &inst.l_true, &inst.s_true).unwrap();
        assert!((scaled.rel_l_star - 1.0).abs() < 1e-12);
    }

    #[test]
    fn instance_files_roundtrip_bit_for_bit() {
        let inst = gen_spcp_instance(15, 0.2, 0.1, 1e-5, 0.05, 23).unwrap();
        let dir = std::env::temp_dir().join("splitkit-instance-roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.spcp");
        save_instance(&inst, &path).unwrap();
        let back = load_instance(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back.m, inst.m);
        assert_eq!(back.r, inst.r);
        assert_eq!(back.seed, inst.seed);
        assert_eq!(back.beta1, inst.beta1);
        assert_eq!(back.l_true, inst.l_true);
        assert_eq!(back.s_true, inst.s_true);
        assert_eq!(back.z_true, inst.z_true);
        assert_eq!(back.b, inst.b);
    }

    #[test]
    fn loader_rejects_foreign_files() {
        let dir = std::env::temp_dir().join("splitkit-instance-reject");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("not-an-instance.bin");
        std::fs::write(&path, b"PCSPxxxxxxxxxxxxxxxx").unwrap();
        let err = load_instance(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(err.to_string().contains("magic"));
    }
}
