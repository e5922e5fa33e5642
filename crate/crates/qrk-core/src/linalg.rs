//! Dense matrix/vector primitives, row sampling, and singular-value
//! estimation.
//!
//! Everything here targets the tall-and-skinny regime (m >> n, n up to a few
//! hundred): singular values are obtained from the n-by-n Gram matrix, with
//! power iteration for the largest and a cyclic Jacobi eigensolver for the
//! full spectrum of row-submatrices.

use crate::error::{Error, Result};
use crate::rng::SeedRng;

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidSpec("matrix dimensions must be >= 1".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSpec("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Gram matrix A^T A (cols-by-cols), accumulated row by row.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.cols;
        let mut g = vec![0.0; n * n];
        for i in 0..self.rows {
            accumulate_outer(&mut g, self.row(i), n);
        }
        g
    }
}

fn accumulate_outer(g: &mut [f64], row: &[f64], n: usize) {
    for p in 0..n {
        let rp = row[p];
        if rp == 0.0 {
            continue;
        }
        let dst = &mut g[p * n..(p + 1) * n];
        for (d, &rq) in dst.iter_mut().zip(row.iter()) {
            *d += rp * rq;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// A matrix whose rows all have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNormalizedMatrix {
    inner: DenseMatrix,
}

impl RowNormalizedMatrix {
    /// Wrap a matrix that is already row-normalized (each row norm within
    /// 1e-12 of 1).
    pub fn try_new(inner: DenseMatrix) -> Result<Self> {
        for i in 0..inner.rows() {
            if (norm(inner.row(i)) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSpec(format!("row {i} is not unit-norm")));
            }
        }
        Ok(Self { inner })
    }

    pub fn inner(&self) -> &DenseMatrix {
        &self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.rows()
    }

    pub fn cols(&self) -> usize {
        self.inner.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inner.row(i)
    }
}

/// Scale every row to unit norm, preserving directions.
pub fn row_normalize(m: &DenseMatrix) -> Result<RowNormalizedMatrix> {
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        let r = m.row(i);
        let nrm = norm(r);
        if nrm <= 1e-300 {
            return Err(Error::ZeroRow(i));
        }
        data.extend(r.iter().map(|v| v / nrm));
    }
    let inner = DenseMatrix::new(m.rows(), m.cols(), data)?;
    Ok(RowNormalizedMatrix { inner })
}

/// Sorted set of distinct row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    /// Build from arbitrary indices; sorts and rejects duplicates or
    /// out-of-range entries.
    pub fn new(mut indices: Vec<usize>, bound: usize) -> Result<Self> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidSpec(format!("duplicate index {}", w[0])));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(Error::IndexOutOfRange { index: last, len: bound });
            }
        }
        Ok(Self { indices })
    }

    pub fn full(m: usize) -> Self {
        Self { indices: (0..m).collect() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    /// Set difference self \ other.
    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet {
            indices: self.indices.iter().copied().filter(|&i| !other.contains(i)).collect(),
        }
    }
}

/// Signed residual <a_i, x> - b_hat_i of row `i` at iterate `x`.
pub fn residual(a: &RowNormalizedMatrix, x: &[f64], b_hat: &[f64], i: usize) -> Result<f64> {
    if i >= a.rows() {
        return Err(Error::IndexOutOfRange { index: i, len: a.rows() });
    }
    if x.len() != a.cols() || b_hat.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "x: {} (want {}), b_hat: {} (want {})",
            x.len(),
            a.cols(),
            b_hat.len(),
            a.rows()
        )));
    }
    Ok(dot(a.row(i), x) - b_hat[i])
}

pub const SIGMA_MAX_DEFAULT_TOL: f64 = 1e-8;
pub const SIGMA_MAX_DEFAULT_ITERS: usize = 10_000;

/// Largest singular value of `a`, via power iteration on the Gram matrix
/// A^T A with a deterministic start vector.
pub fn sigma_max(a: &DenseMatrix, rel_tol: f64) -> Result<f64> {
    sigma_max_capped(a, rel_tol, SIGMA_MAX_DEFAULT_ITERS)
}

pub fn sigma_max_capped(a: &DenseMatrix, rel_tol: f64, max_iters: usize) -> Result<f64> {
    let n = a.cols();
    let g = a.gram();
    // Fixed-seed random start avoids an unlucky orthogonal initial vector.
    let mut rng = SeedRng::new(0x51_63_4d_41_58);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_gaussian()).collect();
    let nv = norm(&v).max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda_prev = f64::INFINITY;
    let mut gv = vec![0.0; n];
    for _ in 0..max_iters {
        mat_vec_sym(&g, &v, &mut gv);
        let lambda = dot(&v, &gv);
        let nrm = norm(&gv);
        if nrm == 0.0 {
            return Ok(0.0); // zero matrix
        }
        for (vi, gvi) in v.iter_mut().zip(&gv) {
            *vi = gvi / nrm;
        }
        if (lambda - lambda_prev).abs() <= rel_tol * lambda.abs().max(f64::MIN_POSITIVE) {
            return Ok(lambda.max(0.0).sqrt());
        }
        lambda_prev = lambda;
    }
    Err(Error::NonConvergence(max_iters))
}

fn mat_vec_sym(g: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        out[i] = dot(&g[i * n..(i + 1) * n], v);
    }
}

/// Smallest singular value of the row-submatrix A_S: the square root of the
/// smallest eigenvalue of A_S^T A_S. Tiny negative eigenvalues from
/// floating-point Gram accumulation are clamped to zero.
pub fn sigma_min_rows(a: &RowNormalizedMatrix, s: &IndexSet) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(&last) = s.as_slice().last() {
        if last >= a.rows() {
            return Err(Error::IndexOutOfRange { index: last, len: a.rows() });
        }
    }
    let n = a.cols();
    // Fewer rows than columns: trivially rank-deficient.
    if s.len() < n {
        return Ok(0.0);
    }
    let mut g = vec![0.0; n * n];
    for i in s.iter() {
        accumulate_outer(&mut g, a.row(i), n);
    }
    let eigs = symmetric_eigenvalues(&mut g, n);
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(clamp_eig(min).sqrt())
}

fn clamp_eig(lambda: f64) -> f64 {
    if lambda < 0.0 {
        // Negative beyond roundoff would indicate a bug upstream.
        debug_assert!(lambda >= -1e-6, "eigenvalue {lambda} too negative");
        0.0
    } else {
        lambda
    }
}

/// Eigenvalues of a symmetric n-by-n matrix (row-major, destroyed in place)
/// via cyclic Jacobi rotations. Sweeps continue until the off-diagonal
/// Frobenius norm drops below 1e-12 relative to the matrix norm.
pub fn symmetric_eigenvalues(g: &mut [f64], n: usize) -> Vec<f64> {
    assert_eq!(g.len(), n * n);
    if n == 1 {
        return vec![g[0]];
    }
    let fro = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * fro;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += g[p * n + q] * g[p * n + q];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = g[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = g[p * n + p];
                let aqq = g[q * n + q];
                // Classical Jacobi rotation angle.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let gkp = g[k * n + p];
                    let gkq = g[k * n + q];
                    g[k * n + p] = c * gkp - s * gkq;
                    g[k * n + q] = s * gkp + c * gkq;
                }
                for k in 0..n {
                    let gpk = g[p * n + k];
                    let gqk = g[q * n + k];
                    g[p * n + k] = c * gpk - s * gqk;
                    g[q * n + k] = s * gpk + c * gqk;
                }
            }
        }
    }
    (0..n).map(|i| g[i * n + i]).collect()
}

/// Uniform random k-subset of {0, ..., m-1}, deterministic given the rng
/// state. Uses Floyd's algorithm when k <= m/8 and partial Fisher-Yates
/// otherwise; the cutover is fixed so runs are reproducible.
pub fn sample_without_replacement(m: usize, k: usize, rng: &mut SeedRng) -> Result<IndexSet> {
    if k == 0 || k > m {
        return Err(Error::SampleTooLarge { k, m });
    }
    let indices = if k <= m / 8 {
        floyd_sample(m, k, rng)
    } else {
        partial_fisher_yates(m, k, rng)
    };
    IndexSet::new(indices, m)
}

fn floyd_sample(m: usize, k: usize, rng: &mut SeedRng) -> Vec<usize> {
    let mut chosen = std::collections::HashSet::with_capacity(k * 2);
    let mut out = Vec::with_capacity(k);
    for j in (m - k)..m {
        let t = rng.gen_index(j + 1);
        let pick = if chosen.insert(t) { t } else { chosen.insert(j); j };
        out.push(pick);
    }
    out
}

fn partial_fisher_yates(m: usize, k: usize, rng: &mut SeedRng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let j = i + rng.gen_index(m - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
