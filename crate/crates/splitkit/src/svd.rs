//! Dense singular value decomposition.
//!
//! Golub–Kahan bidiagonalization followed by implicit-shift QR on the
//! bidiagonal, with a deterministic sweep order and a 1e-12 deflation
//! tolerance on the off-diagonal mass. Right-hand rotations are accumulated
//! into `V`; the left factor is recovered afterwards as `U = M·V·Σ⁻¹`
//! (exact up to roundoff since `V` is orthogonal), with small singular
//! directions re-orthonormalized and null directions completed from
//! deterministic basis vectors. No external linear-algebra backend.
//!
//! Besides the full factorization ([`svd`]) there are two leaner entry
//! points the solvers lean on heavily: [`singular_values`] (no factors at
//! all) and [`shrink_singular_values`] (soft-thresholds the spectrum without
//! ever forming `U`, the kernel behind the nuclear-norm proximal map).

use crate::{Result, SplitError};
use ndarray::Array2;

/// Thin SVD `M = U · diag(σ) · Vᵀ` with `r = min(m, n)` factors.
///
/// `u` is `m×r`, `v` is `n×r`, `singular_values` is nonincreasing and
/// nonnegative. Columns of `u` and `v` are orthonormal; the sign ambiguity is
/// resolved by making the largest-magnitude entry of each `u` column
/// nonnegative.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Array2<f64>,
    pub singular_values: Vec<f64>,
    pub v: Array2<f64>,
}

impl SvdFactors {
    /// Reconstructs `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let r = self.singular_values.len();
        let mut vs = self.v.clone();
        for (j, s) in self.singular_values.iter().enumerate().take(r) {
            vs.column_mut(j).mapv_inplace(|x| x * s);
        }
        self.u.dot(&vs.t())
    }
}

/// Soft-thresholded reconstruction produced by [`shrink_singular_values`].
#[derive(Debug, Clone)]
pub struct Shrinkage {
    /// `U · diag(max(σ − τ, 0)) · Vᵀ`.
    pub shrunk: Array2<f64>,
    /// The full spectrum of the input, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Number of singular values exceeding the threshold.
    pub rank: usize,
}

// ── column-major working storage ─────────────────────────────────────────

/// Column-major matrix buffer: entry (i, j) lives at `a[j * rows + i]`, so a
/// column is one contiguous slice — the layout every inner loop below needs.
struct ColMat {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
}

impl ColMat {
    fn zeros(rows: usize, cols: usize) -> Self {
        ColMat { rows, cols, a: vec![0.0; rows * cols] }
    }

    fn eye(n: usize) -> Self {
        let mut m = ColMat::zeros(n, n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    fn from_array(src: &Array2<f64>) -> Self {
        let (rows, cols) = src.dim();
        let mut m = ColMat::zeros(rows, cols);
        for ((i, j), &x) in src.indexed_iter() {
            m.a[j * rows + i] = x;
        }
        m
    }

    fn to_array(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for j in 0..self.cols {
            let col = self.col(j);
            for i in 0..self.rows {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.a[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.a[j * self.rows..(j + 1) * self.rows]
    }

    /// Two distinct columns as mutable slices (`i < j`).
    #[inline]
    fn col_pair_mut(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(i < j);
        let (lo, hi) = self.a.split_at_mut(j * self.rows);
        (
            &mut lo[i * self.rows..(i + 1) * self.rows],
            &mut hi[..self.rows],
        )
    }

    /// Column `j` mutably together with read access to all columns before it.
    #[inline]
    fn split_before(&mut self, j: usize) -> (&[f64], &mut [f64]) {
        let (lo, hi) = self.a.split_at_mut(j * self.rows);
        (lo, &mut hi[..self.rows])
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let (ca, cb) = self.col_pair_mut(a, b);
        ca.swap_with_slice(cb);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

// ── elementary transforms ────────────────────────────────────────────────

/// Householder vector for `x`: on return `x[1..]` holds the reflector tail
/// (leading entry 1 implicit) and the result is `(β, μ)` where `μ = ‖x‖` is
/// the value the reflection leaves in the leading position.
fn make_householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    if sigma == 0.0 {
        // Nothing below the pivot: H = I, but keep μ ≥ 0 by convention.
        if alpha >= 0.0 {
            return (0.0, alpha);
        }
        // A bare sign flip (β = 2 with an e1 reflector).
        return (2.0, -alpha);
    }
    let mu = (alpha * alpha + sigma).sqrt();
    let v0 = if alpha <= 0.0 { alpha - mu } else { -sigma / (alpha + mu) };
    let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
    let inv = 1.0 / v0;
    for xi in x[1..].iter_mut() {
        *xi *= inv;
    }
    (beta, mu)
}

/// Givens pair (c, s, r) with `c·a + s·b = r` and `-s·a + c·b = 0`.
#[inline]
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        (1.0, 0.0, a)
    } else if a == 0.0 {
        (0.0, 1.0, b)
    } else {
        let r = a.hypot(b);
        (a / r, b / r, r)
    }
}

/// Plane rotation of two equal-length column slices:
/// `x' = c·x + s·y`, `y' = -s·x + c·y`.
#[inline]
fn rotate_pair(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let t = c * *xi + s * *yi;
        *yi = -s * *xi + c * *yi;
        *xi = t;
    }
}

// ── bidiagonalization ────────────────────────────────────────────────────

struct Bidiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
    /// Right reflector tails, one per column index, flattened.
    right_tails: Vec<f64>,
    right_offsets: Vec<(usize, usize, f64)>, // (offset, len, beta) per k
}

/// Reduces `a` (rows ≥ cols) to upper bidiagonal form in place. Left
/// reflectors are discarded (the left factor is recovered from the input
/// later); right reflectors are returned for accumulating `V`.
fn bidiagonalize(a: &mut ColMat) -> Bidiagonal {
    let (m, n) = (a.rows, a.cols);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut right_tails = Vec::new();
    let mut right_offsets = Vec::with_capacity(n.saturating_sub(1));
    let mut row_buf = vec![0.0; n];
    let mut tmp = vec![0.0; m];

    for k in 0..n {
        // Left reflector on column k, rows k..m.
        let (beta_l, mu) = {
            let col = &mut a.col_mut(k)[k..m];
            make_householder(col)
        };
        d[k] = mu;
        if beta_l != 0.0 {
            // Apply H = I − β v vᵀ (v = [1, tail]) to columns k+1..n.
            // The tail lives in a[col k][k+1..m]; copy it out to appease the
            // borrow checker once per k (short-lived, length m−k−1).
            let tail: Vec<f64> = a.col(k)[k + 1..m].to_vec();
            for j in k + 1..n {
                let col = &mut a.col_mut(j)[k..m];
                let mut s = col[0];
                s += dot(&col[1..], &tail);
                s *= beta_l;
                col[0] -= s;
                axpy(&mut col[1..], -s, &tail);
            }
        }

        // Right reflector on row k, columns k+1..n.
        if k + 1 < n {
            let len = n - k - 1;
            for (t, j) in (k + 1..n).enumerate() {
                row_buf[t] = a.col(j)[k];
            }
            let (beta_r, mu_r) = make_householder(&mut row_buf[..len]);
            e[k] = mu_r;
            // Row k of columns k+2..n becomes zero by construction.
            a.col_mut(k + 1)[k] = mu_r;
            for j in k + 2..n {
                a.col_mut(j)[k] = 0.0;
            }
            let off = right_tails.len();
            right_tails.extend_from_slice(&row_buf[1..len]);
            right_offsets.push((off, len, beta_r));
            if beta_r != 0.0 && len > 1 {
                // Apply the reflector to rows k+1..m of columns k+1..n via a
                // two-pass column sweep with an m-length accumulator.
                let tail_start = off;
                for t in tmp[k + 1..m].iter_mut() {
                    *t = 0.0;
                }
                {
                    let base = a.col(k + 1);
                    for (t, &x) in tmp[k + 1..m].iter_mut().zip(&base[k + 1..m]) {
                        *t += x;
                    }
                }
                for (idx, j) in (k + 2..n).enumerate() {
                    let vj = right_tails[tail_start + idx];
                    let col = a.col(j);
                    axpy(&mut tmp[k + 1..m], vj, &col[k + 1..m]);
                }
                let beta = beta_r;
                {
                    let col = a.col_mut(k + 1);
                    axpy(&mut col[k + 1..m], -beta, &tmp[k + 1..m]);
                }
                for (idx, j) in (k + 2..n).enumerate() {
                    let vj = right_tails[tail_start + idx];
                    let col = a.col_mut(j);
                    axpy(&mut col[k + 1..m], -beta * vj, &tmp[k + 1..m]);
                }
            }
        }
    }

    Bidiagonal { d, e, right_tails, right_offsets }
}

/// Accumulates the product of the right reflectors into an n×n `V` by
/// backward application (each reflector touches rows k+1..n only).
fn accumulate_v(n: usize, bd: &Bidiagonal) -> ColMat {
    let mut v = ColMat::eye(n);
    for k in (0..bd.right_offsets.len()).rev() {
        let (off, len, beta) = bd.right_offsets[k];
        if beta == 0.0 {
            continue;
        }
        let tail = &bd.right_tails[off..off + len - 1];
        // Rows k+1..n of columns k+1..n (columns ≤ k are still unit vectors
        // untouched in those rows).
        for j in k + 1..n {
            let col = &mut v.col_mut(j)[k + 1..n];
            let mut s = col[0];
            s += dot(&col[1..], tail);
            s *= beta;
            col[0] -= s;
            axpy(&mut col[1..], -s, tail);
        }
    }
    v
}

// ── implicit-shift QR on the bidiagonal ──────────────────────────────────

const DEFLATE_TOL: f64 = 1e-12;

/// One implicit-shift QR sweep on the active block `lo..=hi`. Right-hand
/// rotations are applied to `v` when present; left-hand rotations only touch
/// (d, e).
fn qr_sweep(d: &mut [f64], e: &mut [f64], mut v: Option<&mut ColMat>, lo: usize, hi: usize) {
    // Wilkinson shift from the trailing 2×2 of BᵀB.
    let t11 = d[hi - 1] * d[hi - 1] + if hi - 1 > lo { e[hi - 2] * e[hi - 2] } else { 0.0 };
    let t22 = d[hi] * d[hi] + e[hi - 1] * e[hi - 1];
    let t12 = d[hi - 1] * e[hi - 1];
    let dlt = 0.5 * (t11 - t22);
    let denom = dlt + dlt.signum() * dlt.hypot(t12);
    let mu = if denom != 0.0 { t22 - t12 * t12 / denom } else { t22 };

    let mut y = d[lo] * d[lo] - mu;
    let mut z = d[lo] * e[lo];

    for k in lo..hi {
        // Right rotation on column pair (k, k+1): zeroes z against y.
        let (c, s, r) = givens(y, z);
        if k > lo {
            e[k - 1] = r;
        }
        let dk = d[k];
        let ek = e[k];
        let dk1 = d[k + 1];
        d[k] = c * dk + s * ek;
        e[k] = -s * dk + c * ek;
        let bulge = s * dk1;
        d[k + 1] = c * dk1;
        if let Some(v) = v.as_deref_mut() {
            let (x, yc) = v.col_pair_mut(k, k + 1);
            rotate_pair(x, yc, c, s);
        }

        // Left rotation on row pair (k, k+1): zeroes the subdiagonal bulge.
        let (c2, s2, r2) = givens(d[k], bulge);
        d[k] = r2;
        let ek = e[k];
        let dk1 = d[k + 1];
        e[k] = c2 * ek + s2 * dk1;
        d[k + 1] = -s2 * ek + c2 * dk1;
        if k + 1 < hi {
            let ek1 = e[k + 1];
            y = e[k];
            z = s2 * ek1;
            e[k + 1] = c2 * ek1;
        }
    }
}

/// `d[hi]` is (numerically) zero: annihilate `e[hi−1]` by rotating columns
/// (k, hi) from the right for k = hi−1 .. lo, accumulating into `v`.
fn clear_last_column(
    d: &mut [f64],
    e: &mut [f64],
    mut v: Option<&mut ColMat>,
    lo: usize,
    hi: usize,
) {
    let mut f = e[hi - 1];
    e[hi - 1] = 0.0;
    for k in (lo..hi).rev() {
        let (c, s, r) = givens(d[k], f);
        d[k] = r;
        if k > lo {
            f = -s * e[k - 1];
            e[k - 1] *= c;
        }
        // The same rotation mixes columns k and hi of V.
        if let Some(v) = v.as_deref_mut() {
            let (x, y) = v.col_pair_mut(k, hi);
            rotate_pair(x, y, c, s);
        }
    }
}

/// `d[i]` is (numerically) zero with i < hi: chase `e[i]` to the right with
/// left rotations (rows (i, k)); these do not touch `v`.
fn clear_row(d: &mut [f64], e: &mut [f64], i: usize, hi: usize) {
    let mut f = e[i];
    e[i] = 0.0;
    for k in i + 1..=hi {
        let (c, s, r) = givens(d[k], f);
        d[k] = r;
        if k < hi {
            f = -s * e[k];
            e[k] *= c;
        }
    }
}

fn diagonalize(d: &mut [f64], e: &mut [f64], mut v: Option<&mut ColMat>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let max_sweeps = 30 * n.max(1);
    let mut sweeps = 0usize;
    loop {
        for i in 0..n - 1 {
            if e[i].abs() <= DEFLATE_TOL * (d[i].abs() + d[i + 1].abs()) {
                e[i] = 0.0;
            }
        }
        let mut hi = n - 1;
        while hi > 0 && e[hi - 1] == 0.0 {
            hi -= 1;
        }
        if hi == 0 {
            return Ok(());
        }
        let mut lo = hi;
        while lo > 0 && e[lo - 1] != 0.0 {
            lo -= 1;
        }

        let tiny = 1e-306;
        if d[hi].abs() <= tiny {
            d[hi] = 0.0;
            clear_last_column(d, e, v.as_deref_mut(), lo, hi);
            continue;
        }
        if let Some(i) = (lo..hi).find(|&i| d[i].abs() <= tiny) {
            d[i] = 0.0;
            clear_row(d, e, i, hi);
            continue;
        }

        qr_sweep(d, e, v.as_deref_mut(), lo, hi);
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(SplitError::Numerical(format!(
                "bidiagonal QR did not converge within {max_sweeps} sweeps"
            )));
        }
    }
}

// ── shared core: spectrum + right factor for a rows ≥ cols input ─────────

fn check_input(input: &Array2<f64>) -> Result<()> {
    let (m, n) = input.dim();
    if m == 0 || n == 0 {
        return Err(SplitError::Shape("svd of an empty matrix".into()));
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(SplitError::Numerical("svd input has non-finite entries".into()));
    }
    Ok(())
}

/// Spectrum and orthogonal right factor of a tall (rows ≥ cols) input:
/// σ nonnegative, sorted nonincreasing, with V's columns permuted and
/// sign-fixed to match.
fn spectrum_and_v(input: &Array2<f64>) -> Result<(Vec<f64>, ColMat)> {
    let n = input.ncols();
    let mut a = ColMat::from_array(input);
    let bd = bidiagonalize(&mut a);
    let mut d = bd.d.clone();
    let mut e = bd.e.clone();
    let mut vc = accumulate_v(n, &bd);
    diagonalize(&mut d, &mut e, Some(&mut vc))?;

    // Nonnegative σ: fold signs into V.
    for i in 0..n {
        if d[i] < 0.0 {
            d[i] = -d[i];
            for x in vc.col_mut(i) {
                *x = -*x;
            }
        }
    }
    // Sort descending (selection sort; swaps are columnwise).
    for i in 0..n {
        let mut best = i;
        for j in i + 1..n {
            if d[j] > d[best] {
                best = j;
            }
        }
        if best != i {
            d.swap(i, best);
            vc.swap_cols(i, best);
        }
    }
    Ok((d, vc))
}

// ── U recovery ───────────────────────────────────────────────────────────

/// Builds `U = M·V·Σ⁻¹`, re-orthonormalizing the small-σ tail and completing
/// exactly-null directions with deterministic basis vectors. All column work
/// happens in contiguous column-major storage.
fn recover_u(input: &Array2<f64>, v: &Array2<f64>, sigma: &[f64]) -> Array2<f64> {
    let (m, _) = input.dim();
    let n = sigma.len();
    let mut u = ColMat::from_array(&input.dot(v)); // column i = M v_i (≈ σ_i u_i)
    let smax = sigma.first().copied().unwrap_or(0.0);
    let null_cut = smax * 1e-13;
    let reorth_cut = smax * 1e-6;

    let mut needs_completion = vec![false; n];
    for i in 0..n {
        if sigma[i] > null_cut && sigma[i] > 0.0 {
            let inv = 1.0 / sigma[i];
            for x in u.col_mut(i) {
                *x *= inv;
            }
        } else {
            needs_completion[i] = true;
        }
    }

    // σ is sorted nonincreasing, so the columns to fix form a suffix.
    let first_fix = (0..n)
        .find(|&i| needs_completion[i] || sigma[i] <= reorth_cut)
        .unwrap_or(n);

    let mut cand = vec![0.0; m];
    for i in first_fix..n {
        if !needs_completion[i] {
            // Modified Gram–Schmidt against all prior columns, then renormalize.
            let (prev, ci) = u.split_before(i);
            for j in 0..i {
                let pj = &prev[j * m..(j + 1) * m];
                let d = dot(pj, ci);
                axpy(ci, -d, pj);
            }
            let nrm = dot(ci, ci).sqrt();
            if nrm > 1e-8 {
                for x in ci.iter_mut() {
                    *x /= nrm;
                }
                continue;
            }
            needs_completion[i] = true;
        }
        // Deterministic completion: first standard basis vector that survives
        // projection onto the orthogonal complement of the previous columns.
        let mut done = false;
        for attempt in 0..m {
            let t = (i + attempt) % m;
            cand.fill(0.0);
            cand[t] = 1.0;
            let (prev, _) = u.split_before(i);
            for _pass in 0..2 {
                for j in 0..i {
                    let pj = &prev[j * m..(j + 1) * m];
                    let d = dot(pj, &cand);
                    axpy(&mut cand, -d, pj);
                }
            }
            let nrm = dot(&cand, &cand).sqrt();
            if nrm > 1e-3 {
                let ci = u.col_mut(i);
                for (x, c) in ci.iter_mut().zip(cand.iter()) {
                    *x = c / nrm;
                }
                done = true;
                break;
            }
        }
        if !done {
            // m columns cannot all project to zero; keep a zero column as a
            // last resort (unreachable in practice).
            u.col_mut(i).fill(0.0);
        }
    }
    u.to_array()
}

// ── public entry points ──────────────────────────────────────────────────

/// Thin singular value decomposition of a dense matrix.
///
/// Returns factors satisfying `‖UᵀU − I‖_F ≤ 1e-8`, `‖VᵀV − I‖_F ≤ 1e-8`,
/// and `‖U·diag(σ)·Vᵀ − M‖_F ≤ 1e-8·‖M‖_F`, with `σ` sorted nonincreasing.
/// Deterministic; fails on non-finite input.
pub fn svd(input: &Array2<f64>) -> Result<SvdFactors> {
    check_input(input)?;
    let (m, n) = input.dim();
    if m < n {
        let t = input.t().to_owned();
        let f = svd(&t)?;
        return Ok(SvdFactors { u: f.v, singular_values: f.singular_values, v: f.u });
    }

    let (d, vc) = spectrum_and_v(input)?;
    let v = vc.to_array();
    let mut u = recover_u(input, &v, &d);

    // Deterministic sign convention: largest-magnitude entry of each U column
    // is nonnegative.
    let mut v = v;
    for j in 0..n {
        let mut idx = 0;
        let mut mag = -1.0;
        for (i, x) in u.column(j).iter().enumerate() {
            if x.abs() > mag {
                mag = x.abs();
                idx = i;
            }
        }
        if u[(idx, j)] < 0.0 {
            u.column_mut(j).mapv_inplace(|x| -x);
            v.column_mut(j).mapv_inplace(|x| -x);
        }
    }

    Ok(SvdFactors { u, singular_values: d, v })
}

/// Singular values only (nonincreasing). Skips all factor bookkeeping, which
/// makes it several times cheaper than [`svd`].
pub fn singular_values(input: &Array2<f64>) -> Result<Vec<f64>> {
    check_input(input)?;
    let (m, n) = input.dim();
    if m < n {
        return singular_values(&input.t().to_owned());
    }
    let mut a = ColMat::from_array(input);
    let bd = bidiagonalize(&mut a);
    let mut d = bd.d;
    let mut e = bd.e;
    diagonalize(&mut d, &mut e, None)?;
    for x in d.iter_mut() {
        *x = x.abs();
    }
    d.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(d)
}

/// Largest singular value; deterministic. Used by the conjugate-indicator
/// evaluations on the dual side.
pub fn spectral_norm(input: &Array2<f64>) -> Result<f64> {
    Ok(singular_values(input)?.first().copied().unwrap_or(0.0))
}

/// Soft-thresholds the spectrum: returns `U·diag(max(σ−τ, 0))·Vᵀ` along with
/// the full spectrum and the surviving rank, without ever forming `U`.
///
/// The kept part is reconstructed as `M·V_r·diag((σ_i−τ)/σ_i)·V_rᵀ`, which
/// is algebraically identical and only involves the (orthonormal) right
/// factor, so discarded directions cost nothing.
pub fn shrink_singular_values(input: &Array2<f64>, tau: f64) -> Result<Shrinkage> {
    check_input(input)?;
    if !(tau >= 0.0) {
        return Err(SplitError::Parameter("shrinkage threshold must be ≥ 0".into()));
    }
    let (m, n) = input.dim();
    if m < n {
        let t = input.t().to_owned();
        let s = shrink_singular_values(&t, tau)?;
        return Ok(Shrinkage {
            shrunk: s.shrunk.t().to_owned(),
            singular_values: s.singular_values,
            rank: s.rank,
        });
    }

    let (d, vc) = spectrum_and_v(input)?;
    let rank = d.iter().take_while(|&&s| s > tau).count();
    if rank == 0 {
        return Ok(Shrinkage { shrunk: Array2::zeros((m, n)), singular_values: d, rank: 0 });
    }
    // V_r with columns scaled by (σ_i − τ)/σ_i, then M·(V_r scaled)·V_rᵀ.
    let mut vr = Array2::zeros((n, rank));
    let mut vr_scaled = Array2::zeros((n, rank));
    for j in 0..rank {
        let g = (d[j] - tau) / d[j];
        let col = vc.col(j);
        for i in 0..n {
            vr[(i, j)] = col[i];
            vr_scaled[(i, j)] = col[i] * g;
        }
    }
    let shrunk = input.dot(&vr_scaled).dot(&vr.t());
    Ok(Shrinkage { shrunk, singular_values: d, rank })
}

// ──────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn fro(a: &Array2<f64>) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_contract(m: &Array2<f64>) {
        let f = svd(m).unwrap();
        let r = f.singular_values.len();
        assert_eq!(r, m.nrows().min(m.ncols()));
        // Orthonormal columns.
        let utu = f.u.t().dot(&f.u);
        let vtv = f.v.t().dot(&f.v);
        let eye = Array2::<f64>::eye(r);
        assert!(fro(&(&utu - &eye)) <= 1e-8, "UᵀU off by {}", fro(&(&utu - &eye)));
        assert!(fro(&(&vtv - &eye)) <= 1e-8, "VᵀV off by {}", fro(&(&vtv - &eye)));
        // Reconstruction, relative to the input scale.
        let rec = f.reconstruct();
        let scale = fro(m);
        if scale == 0.0 {
            assert!(fro(&rec) == 0.0);
        } else {
            assert!(fro(&(&rec - m)) <= 1e-8 * scale, "reconstruction off");
        }
        // Ordering and sign.
        for w in f.singular_values.windows(2) {
            assert!(w[0] >= w[1] - 1e-15);
        }
        for s in &f.singular_values {
            assert!(*s >= 0.0);
        }
    }

    #[test]
    fn diagonal_two_by_two() {
        let m = array![[3.0, 0.0], [0.0, 1.0]];
        let f = svd(&m).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let m = Array2::<f64>::zeros((4, 3));
        let f = svd(&m).unwrap();
        assert!(f.singular_values.iter().all(|s| *s == 0.0));
        check_contract(&m);
    }

    #[test]
    fn random_shapes_contract() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for &(m, n) in &[(6usize, 4usize), (4, 6), (9, 9), (1, 5), (7, 1), (12, 3)] {
            for _ in 0..8 {
                let a = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0);
                check_contract(&a);
            }
        }
    }

    #[test]
    fn low_rank_and_scaled_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = Array2::from_shape_fn((10, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let b = Array2::from_shape_fn((8, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let low = a.dot(&b.t()); // rank ≤ 3 inside a 10×8 matrix
        check_contract(&low);
        check_contract(&(&low * 1e6));
        check_contract(&(&low * 1e-6));
        let f = svd(&low).unwrap();
        assert!(f.singular_values[3] < 1e-10 * f.singular_values[0].max(1.0));
    }

    #[test]
    fn repeated_singular_values() {
        // Orthogonal matrix: all σ equal 1 — the clustered extreme.
        let m = array![
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
        ];
        check_contract(&m);
        let f = svd(&m).unwrap();
        for s in &f.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn values_only_path_agrees_with_factored_path() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for &(m, n) in &[(8usize, 8usize), (10, 4), (4, 10)] {
            let a = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0);
            let full = svd(&a).unwrap().singular_values;
            let lean = singular_values(&a).unwrap();
            for (x, y) in full.iter().zip(lean.iter()) {
                assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
            }
            assert!((spectral_norm(&a).unwrap() - full[0]).abs() <= 1e-10 * (1.0 + full[0]));
        }
    }

    #[test]
    fn shrinkage_matches_explicit_reconstruction() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for &(m, n) in &[(9usize, 6usize), (6, 9), (7, 7)] {
            let a = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0);
            let f = svd(&a).unwrap();
            for &tau in &[0.0, 0.3, 1.0, 100.0] {
                let s = shrink_singular_values(&a, tau).unwrap();
                // Explicit route through the full factorization.
                let r = f.singular_values.len();
                let mut vs = f.v.clone();
                for j in 0..r {
                    let g = (f.singular_values[j] - tau).max(0.0);
                    vs.column_mut(j).mapv_inplace(|x| x * g);
                }
                let want = f.u.dot(&vs.t());
                assert!(
                    fro(&(&s.shrunk - &want)) <= 1e-9 * (1.0 + fro(&want)),
                    "shrinkage mismatch at tau={tau}"
                );
                let want_rank = f.singular_values.iter().filter(|&&x| x > tau).count();
                assert_eq!(s.rank, want_rank);
            }
        }
    }

    #[test]
    fn determinism() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let a = Array2::from_shape_fn((15, 15), |_| rng.random::<f64>() * 10.0 - 5.0);
        let f1 = svd(&a).unwrap();
        let f2 = svd(&a).unwrap();
        assert_eq!(f1.u, f2.u);
        assert_eq!(f1.v, f2.v);
        assert_eq!(f1.singular_values, f2.singular_values);
    }

    #[test]
    fn rejects_non_finite() {
        let m = array![[1.0, f64::NAN], [0.0, 1.0]];
        assert!(svd(&m).is_err());
        assert!(singular_values(&m).is_err());
    }
}
