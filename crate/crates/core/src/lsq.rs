//! Weighted and standard least squares `min_y ‖f − Bᵀy‖_W` through the
//! augmented saddle point system `[W⁻¹ Bᵀ; B 0][r; y] = [f; 0]`.

use crate::condnum::mixed_componentwise;
use crate::error::{Error, Result};
use crate::gsp::GspSystem;
use crate::matkit::{self, cholesky, inverse, kron, DenseMatrix, Lu};
use crate::structure::{symmetric_structure, zero_structure};

/// Relative symmetry tolerance for the weight matrix.
pub const WEIGHT_SYMMETRY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsProblem {
    b: DenseMatrix,
    w: DenseMatrix,
    f: Vec<f64>,
}

impl WlsProblem {
    /// `b` is `n × m`, `w` is `m × m` symmetric positive definite, `f` has length `m`.
    pub fn new(b: DenseMatrix, w: DenseMatrix, f: Vec<f64>) -> Result<Self> {
        let m = b.cols();
        if b.rows() == 0 || m == 0 {
            return Err(Error::InvalidArgument("B must have at least one row and column".into()));
        }
        if w.rows() != m || w.cols() != m {
            return Err(Error::dims(
                "weight W",
                format!("{m}x{m}"),
                format!("{}x{}", w.rows(), w.cols()),
            ));
        }
        if f.len() != m {
            return Err(Error::dims("right-hand side f", m, f.len()));
        }
        if let Some(index) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !w.is_symmetric(WEIGHT_SYMMETRY_TOL) {
            return Err(Error::NotPositiveDefinite("W is not symmetric".into()));
        }
        cholesky(&w)?;
        Ok(WlsProblem { b, w, f })
    }

    /// Unit weights.
    pub fn standard(b: DenseMatrix, f: Vec<f64>) -> Result<Self> {
        let m = b.cols();
        Self::new(b, DenseMatrix::identity(m), f)
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// Number of unknowns `n`.
    pub fn n(&self) -> usize {
        self.b.rows()
    }

    /// Number of observations `m`.
    pub fn m(&self) -> usize {
        self.b.cols()
    }

    /// `(y, r)` with `y` the minimizer and `r = W(f − Bᵀy)`, from the
    /// weighted normal equations `BWBᵀ y = BWf`.
    pub fn solve(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let terms = self.normal_terms()?;
        Ok((terms.y, terms.r))
    }

    fn normal_terms(&self) -> Result<NormalTerms> {
        let bw = self.b.matmul(&self.w);
        let bwbt = bw.matmul(&self.b.transpose());
        let lu = Lu::new(&bwbt).map_err(|e| Error::SingularSchur(Box::new(e)))?;
        let q = lu.inverse();
        // K = (BWBᵀ)⁻¹BW
        let k = lu.solve_matrix(&bw);
        let y = k.matvec(&self.f);
        let bty = self.b.transpose().matvec(&y);
        let resid: Vec<f64> = self.f.iter().zip(&bty).map(|(f, b)| f - b).collect();
        let r = self.w.matvec(&resid);
        Ok(NormalTerms { k, q, y, r })
    }
}

struct NormalTerms {
    k: DenseMatrix,
    /// `(BWBᵀ)⁻¹ = −S⁻¹`
    q: DenseMatrix,
    y: Vec<f64>,
    r: Vec<f64>,
}

/// `A = W⁻¹` (symmetric), `B = C = B`, `D = 0` (zero structure), `g = 0`.
pub fn build_wls_augmented(p: &WlsProblem) -> Result<GspSystem> {
    let (m, n) = (p.m(), p.n());
    let w_inv = inverse(&p.w)?;
    let a = w_inv.add(&w_inv.transpose()).scale(0.5);
    GspSystem::new(
        a,
        p.b.clone(),
        p.b.clone(),
        DenseMatrix::zeros(n, n),
        p.f.clone(),
        vec![0.0; n],
    )?
    .with_structures(symmetric_structure(m), zero_structure(n))
}

/// Mixed and componentwise CNs of `y` under perturbations of `B` and `f`,
/// numerator `|x2ᵀ⊗K + S⁻¹⊗x1ᵀ|·vec|Bᵀ| + |K||f|`.
pub fn wls_cn_x2(p: &WlsProblem) -> Result<(f64, f64, Vec<usize>)> {
    let t = p.normal_terms()?;
    // S⁻¹ = −(BWBᵀ)⁻¹, x1 = r, x2 = y
    let num = numerator(p, &t.k, &t.q, &t.y, &t.r);
    mixed_componentwise(&num, &t.y, "y")
}

/// Standard least squares: numerator
/// `|yᵀ⊗(Bᵀ)† − (BBᵀ)⁻¹⊗rᵀ|·vec|Bᵀ| + |(Bᵀ)†||f|` with `r = f − Bᵀy`.
pub fn sls_cn(b: &DenseMatrix, f: &[f64]) -> Result<(f64, f64, Vec<usize>)> {
    let m = b.cols();
    if f.len() != m {
        return Err(Error::dims("right-hand side f", m, f.len()));
    }
    let bbt = b.matmul(&b.transpose());
    let lu = Lu::new(&bbt)?;
    let q = lu.inverse();
    let pinv_t = lu.solve_matrix(b);
    let y = pinv_t.matvec(f);
    let bty = b.transpose().matvec(&y);
    let r: Vec<f64> = f.iter().zip(&bty).map(|(f, v)| f - v).collect();
    // yᵀ⊗(Bᵀ)† − (BBᵀ)⁻¹⊗rᵀ, formed explicitly
    let n = b.rows();
    let yt = DenseMatrix::from_col_major(1, n, y.clone())?;
    let rt = DenseMatrix::from_col_major(1, m, r)?;
    let jac = kron(&yt, &pinv_t)?.sub(&kron(&q, &rt)?);
    let vbt = matkit::vec(&b.transpose().abs());
    let num: Vec<f64> = jac
        .abs()
        .matvec(&vbt)
        .iter()
        .zip(pinv_t.abs().matvec(&matkit::abs_vec(f)))
        .map(|(a, c)| a + c)
        .collect();
    mixed_componentwise(&num, &y, "y")
}

/// Column `(i, j)` of the `Bᵀ` part is `y_j K(:,i) + r_i S⁻¹(:,j)` with `S⁻¹ = −Q`.
fn numerator(p: &WlsProblem, k: &DenseMatrix, q: &DenseMatrix, y: &[f64], r: &[f64]) -> Vec<f64> {
    let (m, n) = (p.m(), p.n());
    let mut num = k.abs().matvec(&p.f.iter().map(|v| v.abs()).collect::<Vec<_>>());
    for j in 0..n {
        for i in 0..m {
            let w = p.b.get(j, i).abs();
            if w == 0.0 {
                continue;
            }
            let (kc, qc) = (k.column(i), q.column(j));
            for (t, out) in num.iter_mut().enumerate() {
                *out += (y[j] * kc[t] - r[i] * qc[t]).abs() * w;
            }
        }
    }
    num
}
