//! Dense matrix kernel: column-major storage, vec/Kronecker algebra, norms,
//! LU solves and the componentwise division with the zero convention used by
//! every condition-number formula.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dense matrix (in entries) that Kronecker helpers will materialize.
pub const DEFAULT_SIZE_CAP: usize = 50_000_000;

/// Relative pivot threshold below which a matrix is declared singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Relative tolerance on the extrapolated Rayleigh-quotient error of the
/// spectral norm iteration.
pub const SPECTRAL_TOL: f64 = 1e-12;

/// Dense real matrix stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from column-major data, rejecting NaN and infinities.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "matrix data",
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "matrix data",
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        let mut col_major = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                col_major[j * rows + i] = data[i * cols + j];
            }
        }
        Self::from_col_major(rows, cols, col_major)
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::dims(
                "matrix rows",
                format!("{ncols} columns"),
                format!("{} columns", bad.len()),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(nrows, ncols, &flat)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Row-major copy, the layout used by manifests.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn abs(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add: shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub: shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let s = other.get(k, j);
                if s == 0.0 {
                    continue;
                }
                for (d, a) in dst.iter_mut().zip(self.column(k)) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec: dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for (k, &s) in x.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (d, a) in y.iter_mut().zip(self.column(k)) {
                *d += a * s;
            }
        }
        y
    }

    /// `selfᵀ · x` without forming the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "matvec_t: dimension mismatch");
        (0..self.cols).map(|j| dot(self.column(j), x)).collect()
    }

    /// `self · selfᵀ`.
    pub fn gram_rows(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.rows, self.rows);
        for k in 0..self.cols {
            g.add_outer(self.column(k), self.column(k), 1.0);
        }
        g
    }

    /// Accumulates `s · u vᵀ` into `self`.
    pub(crate) fn add_outer(&mut self, u: &[f64], v: &[f64], s: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (j, &vj) in v.iter().enumerate() {
            let c = s * vj;
            if c == 0.0 {
                continue;
            }
            let dst = &mut self.data[j * self.rows..(j + 1) * self.rows];
            for (d, &ui) in dst.iter_mut().zip(u) {
                *d += ui * c;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        norm2(&self.data)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.rows];
        for j in 0..self.cols {
            for (s, v) in sums.iter_mut().zip(self.column(j)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// True when `|a_ij - a_ji| <= rel_tol · max|a|` for all entries.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Rows `r0..r1`, columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r1 - r0, c1 - c0, |i, j| self.get(r0 + i, c0 + j))
    }

    /// `[tl tr; bl br]`.
    pub fn from_blocks(tl: &DenseMatrix, tr: &DenseMatrix, bl: &DenseMatrix, br: &DenseMatrix) -> DenseMatrix {
        assert_eq!(tl.rows, tr.rows);
        assert_eq!(bl.rows, br.rows);
        assert_eq!(tl.cols, bl.cols);
        assert_eq!(tr.cols, br.cols);
        let (m, n) = (tl.rows, bl.rows);
        let (p, q) = (tl.cols, tr.cols);
        DenseMatrix::from_fn(m + n, p + q, |i, j| match (i < m, j < p) {
            (true, true) => tl.get(i, j),
            (true, false) => tr.get(i, j - p),
            (false, true) => bl.get(i - m, j),
            (false, false) => br.get(i - m, j - p),
        })
    }
}

/// Column-stacking of a matrix.
pub fn vec(m: &DenseMatrix) -> Vec<f64> {
    m.data.clone()
}

/// Kronecker product `X ⊗ Y`, refusing results above [`DEFAULT_SIZE_CAP`].
pub fn kron(x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    kron_with_cap(x, y, DEFAULT_SIZE_CAP)
}

pub fn kron_with_cap(x: &DenseMatrix, y: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    let rows = x.rows.checked_mul(y.rows);
    let cols = x.cols.checked_mul(y.cols);
    let entries = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    match entries {
        Some(e) if e <= cap => {}
        _ => {
            return Err(Error::SizeCap {
                entries: entries.unwrap_or(usize::MAX),
                cap,
            })
        }
    }
    let (p, q) = (y.rows, y.cols);
    Ok(DenseMatrix::from_fn(x.rows * p, x.cols * q, |i, j| {
        x.get(i / p, j / q) * y.get(i % p, j % q)
    }))
}

/// `(frobenius, inf_norm)`.
pub fn norms(m: &DenseMatrix) -> (f64, f64) {
    (m.frobenius(), m.inf_norm())
}

/// Largest singular value, via power iteration on the smaller Gram matrix.
pub fn spectral_norm(g: &DenseMatrix) -> Result<f64> {
    if g.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let gram = if g.rows <= g.cols {
        g.gram_rows()
    } else {
        g.transpose().gram_rows()
    };
    let cap = 50 * g.rows.max(g.cols);
    Ok(largest_eigenvalue_psd(&gram, cap)?.max(0.0).sqrt())
}

/// Dimension up to which the iteration runs on a repeated square of the
/// Gram matrix.
const SQUARING_MAX_DIM: usize = 512;

/// Number of squarings, each doubling the exponent of the eigenvalue ratio
/// per iteration.
const SQUARINGS: usize = 4;

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Power iteration from a fixed, non-symmetric start vector. For small
/// matrices the iteration vector is propagated by `G^(2^k)` so that close
/// leading eigenvalues still separate within the iteration cap; the estimate
/// is always the Rayleigh quotient of `G` itself. The iteration stops once
/// the extrapolated remaining change of that quotient (from the observed
/// geometric rate) falls below [`SPECTRAL_TOL`] relative.
pub fn largest_eigenvalue_psd(gram: &DenseMatrix, max_iter: usize) -> Result<f64> {
    assert!(gram.is_square(), "largest_eigenvalue_psd: matrix must be square");
    let n = gram.rows;
    if n == 0 || gram.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(gram.get(0, 0));
    }
    let step = if n <= SQUARING_MAX_DIM {
        let mut p = gram.scale(1.0 / gram.max_abs());
        for _ in 0..SQUARINGS {
            let sq = p.matmul(&p);
            // symmetrize to keep rounding from drifting the iterate
            let sym = sq.add(&sq.transpose()).scale(0.5);
            p = sym.scale(1.0 / sym.max_abs());
        }
        p
    } else {
        gram.clone()
    };
    // all-ones is an eigenvector of many symmetric test matrices and can be
    // orthogonal to the dominant one, so the start is perturbed deterministically
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + (i as f64 * 0.754_877_666_246_692_7).fract())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0_f64;
    let mut prev_delta = f64::INFINITY;
    let max_iter = max_iter.max(100);
    for it in 0..max_iter {
        let w = step.matvec(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let rq = dot(&v, &gram.matvec(&v));
        let delta = (rq - lambda).abs();
        lambda = rq;

        if it >= 1 && delta <= 1e-14 * lambda.abs() {
            return Ok(lambda);
        }
        let rate = delta / prev_delta;
        if it >= 2 && rate < 1.0 {
            let remaining = delta * rate / (1.0 - rate);
            if remaining <= SPECTRAL_TOL * lambda.abs() {
                return Ok(lambda);
            }
        }
        prev_delta = delta;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: lambda,
    })
}

/// LU factorization with partial pivoting, `P·M = L·U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(
                "LU factorization",
                "square matrix",
                format!("{}x{}", m.rows, m.cols),
            ));
        }
        let n = m.rows;
        let tol = SINGULAR_PIVOT_TOL * m.inf_norm();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n).map(|i| (i, lu.get(i, k))).fold((k, 0.0_f64), |best, (i, v)| {
                if v.abs() > best.1.abs() {
                    (i, v)
                } else {
                    best
                }
            });
            if pivot.abs() <= tol {
                return Err(Error::Singular { step: k, pivot });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let a = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, a);
                }
            }
            for i in k + 1..n {
                let l = lu.get(i, k) / pivot;
                lu.set(i, k, l);
            }
            for j in k + 1..n {
                let ukj = lu.get(k, j);
                if ukj == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    let v = lu.get(i, j) - lu.get(i, k) * ukj;
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "Lu::solve: dimension mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.lu.get(i, j) * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu.get(j, j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..j {
                    x[i] -= self.lu.get(i, j) * xj;
                }
            }
        }
        x
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows, self.dim(), "Lu::solve_matrix: dimension mismatch");
        let mut data = Vec::with_capacity(b.data.len());
        for j in 0..b.cols {
            data.extend(self.solve(b.column(j)));
        }
        DenseMatrix {
            rows: b.rows,
            cols: b.cols,
            data,
        }
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
    }
}

pub fn solve_linear(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.rows {
        return Err(Error::dims("right-hand side", m.rows, b.len()));
    }
    Ok(Lu::new(m)?.solve(b))
}

pub fn inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(Lu::new(m)?.inverse())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite("matrix is not square".into()));
    }
    let n = m.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "non-positive pivot {d:e} at column {j}"
            )));
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Entrywise `b_i‡ · a_i` with `h‡ = 1/h` for `h ≠ 0` and `1` for `h = 0`.
///
/// The second component lists indices where `b_i = 0` but `a_i ≠ 0`.
pub fn comp_divide(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    assert_eq!(a.len(), b.len(), "comp_divide: length mismatch");
    let mut flags = Vec::new();
    let ratio = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (&ai, &bi))| {
            if bi == 0.0 {
                if ai != 0.0 {
                    flags.push(i);
                }
                ai
            } else {
                ai / bi
            }
        })
        .collect();
    (ratio, flags)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    let scale = norm_inf(a);
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn abs_vec(a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| v.abs()).collect()
}
