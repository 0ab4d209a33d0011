//! Linear matrix subspaces described by a basis `Φ` whose columns are the
//! vec'd basis matrices, and the diagonal scaling `𝔇(i,i) = ‖Φ(:,i)‖₂`.
//!
//! `Φ` has at most one nonzero per row for every supported structure, so it
//! is stored column by column as sparse `(vec index, value)` lists.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::DenseMatrix;

/// Relative residual allowed when checking membership of a matrix.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    General,
    Symmetric,
    Toeplitz,
    SymmetricToeplitz,
    /// Block fixed at zero and excluded from perturbation.
    Zero,
    /// User-supplied basis.
    Custom,
}

impl StructureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::General => "general",
            StructureKind::Symmetric => "symmetric",
            StructureKind::Toeplitz => "toeplitz",
            StructureKind::SymmetricToeplitz => "symmetric-toeplitz",
            StructureKind::Zero => "zero",
            StructureKind::Custom => "custom",
        }
    }

    /// Canonical structure of this kind for `n × n` matrices.
    pub fn build(self, n: usize) -> Result<LinearStructure> {
        match self {
            StructureKind::General => Ok(general_structure(n)),
            StructureKind::Symmetric => Ok(symmetric_structure(n)),
            StructureKind::Toeplitz => Ok(toeplitz_structure(n, false)),
            StructureKind::SymmetricToeplitz => Ok(toeplitz_structure(n, true)),
            StructureKind::Zero => Ok(zero_structure(n)),
            StructureKind::Custom => Err(Error::InvalidArgument(
                "custom structures need an explicit basis".into(),
            )),
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "general" => Ok(StructureKind::General),
            "symmetric" => Ok(StructureKind::Symmetric),
            "toeplitz" => Ok(StructureKind::Toeplitz),
            "symmetric-toeplitz" => Ok(StructureKind::SymmetricToeplitz),
            "zero" => Ok(StructureKind::Zero),
            other => Err(Error::InvalidArgument(format!(
                "unknown structure tag '{other}' (expected general, symmetric, toeplitz, symmetric-toeplitz or zero)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearStructure {
    order: usize,
    kind: StructureKind,
    columns: Vec<Vec<(usize, f64)>>,
    scaling: Vec<f64>,
}

impl LinearStructure {
    fn from_columns(order: usize, kind: StructureKind, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let scaling = columns
            .iter()
            .map(|c| c.iter().map(|(_, v)| v * v).sum::<f64>().sqrt())
            .collect();
        LinearStructure {
            order,
            kind,
            columns,
            scaling,
        }
    }

    /// Structure spanned by the columns of a user-supplied `N² × p` basis.
    pub fn from_basis(order: usize, phi: &DenseMatrix) -> Result<Self> {
        let nn = order * order;
        if phi.rows() != nn {
            return Err(Error::dims("structure basis", format!("{nn} rows"), phi.rows()));
        }
        let mut owner = vec![None; nn];
        let mut columns = Vec::with_capacity(phi.cols());
        for k in 0..phi.cols() {
            let mut col = Vec::new();
            for (r, &v) in phi.column(k).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                if let Some(prev) = owner[r] {
                    return Err(Error::InvalidBasis(format!(
                        "row {r} has nonzeros in columns {prev} and {k}"
                    )));
                }
                owner[r] = Some(k);
                col.push((r, v));
            }
            if col.is_empty() {
                return Err(Error::InvalidBasis(format!("column {k} is zero")));
            }
            columns.push(col);
        }
        Ok(Self::from_columns(order, StructureKind::Custom, columns))
    }

    /// Matrices are `order × order`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of generators `p`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    /// Diagonal of `𝔇`.
    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    /// Nonzeros of `Φ(:,k)` as `(vec index, value)`; vec index `i + j·N`.
    pub fn column(&self, k: usize) -> &[(usize, f64)] {
        &self.columns[k]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[(usize, f64)]> {
        self.columns.iter().map(Vec::as_slice)
    }

    pub fn phi_dense(&self) -> DenseMatrix {
        let nn = self.order * self.order;
        let cols = &self.columns;
        let mut data = vec![0.0; nn * cols.len()];
        for (k, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                data[k * nn + r] = v;
            }
        }
        DenseMatrix::from_col_major(nn, cols.len(), data).expect("basis entries are finite")
    }

    /// The unique `a` with `Φ·a = vec(A)`.
    pub fn generator(&self, a: &DenseMatrix) -> Result<Vec<f64>> {
        let n = self.order;
        if a.rows() != n || a.cols() != n {
            return Err(Error::dims(
                "structure generator",
                format!("{n}x{n}"),
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        let va = a.as_slice();
        let gen: Vec<f64> = match self.kind {
            StructureKind::Custom => self
                .columns
                .iter()
                .map(|col| {
                    let num: f64 = col.iter().map(|&(r, v)| v * va[r]).sum();
                    let den: f64 = col.iter().map(|&(_, v)| v * v).sum();
                    num / den
                })
                .collect(),
            _ => self
                .columns
                .iter()
                .map(|col| {
                    let (r, v) = col[0];
                    va[r] / v
                })
                .collect(),
        };
        self.check_membership(a, &gen)?;
        Ok(gen)
    }

    fn check_membership(&self, a: &DenseMatrix, gen: &[f64]) -> Result<()> {
        let rebuilt = self.reconstruct_unchecked(gen);
        let tol = MEMBERSHIP_TOL * a.max_abs();
        let n = self.order;
        let (worst, residual) = a
            .as_slice()
            .iter()
            .zip(rebuilt.as_slice())
            .map(|(x, y)| (x - y).abs())
            .enumerate()
            .fold((0, 0.0_f64), |best, (r, d)| if d > best.1 { (r, d) } else { best });
        if residual > tol {
            return Err(Error::NotInSubspace {
                kind: self.kind.to_string(),
                row: worst % n.max(1),
                col: worst / n.max(1),
                residual,
            });
        }
        Ok(())
    }

    /// `A` with `vec(A) = Φ·a`.
    pub fn reconstruct(&self, gen: &[f64]) -> Result<DenseMatrix> {
        if gen.len() != self.dim() {
            return Err(Error::dims("structure generator", self.dim(), gen.len()));
        }
        Ok(self.reconstruct_unchecked(gen))
    }

    fn reconstruct_unchecked(&self, gen: &[f64]) -> DenseMatrix {
        let n = self.order;
        let mut data = vec![0.0; n * n];
        for (col, &g) in self.columns.iter().zip(gen) {
            for &(r, v) in col {
                data[r] += v * g;
            }
        }
        DenseMatrix::from_col_major(n, n, data).expect("finite generator")
    }
}

/// `Φ = I_{N²}`, `𝔇 = I`.
pub fn general_structure(n: usize) -> LinearStructure {
    let columns = (0..n * n).map(|r| vec![(r, 1.0)]).collect();
    LinearStructure::from_columns(n, StructureKind::General, columns)
}

/// Symmetric matrices, generators ordered row by row over the upper triangle.
pub fn symmetric_structure(n: usize) -> LinearStructure {
    let mut columns = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            if i == j {
                columns.push(vec![(i + j * n, 1.0)]);
            } else {
                columns.push(vec![(j + i * n, 1.0), (i + j * n, 1.0)]);
            }
        }
    }
    LinearStructure::from_columns(n, StructureKind::Symmetric, columns)
}

/// One generator per diagonal, ordered from the bottom-left corner
/// (offset `j - i = 1 - N`) to the top-right (offset `N - 1`). The symmetric
/// variant merges offsets `±k` into generator `k`.
pub fn toeplitz_structure(n: usize, symmetric: bool) -> LinearStructure {
    let collect_diag = |offset: isize| -> Vec<(usize, f64)> {
        let mut col: Vec<(usize, f64)> = (0..n)
            .filter_map(|i| {
                let j = i as isize + offset;
                (0..n as isize).contains(&j).then(|| (i + j as usize * n, 1.0))
            })
            .collect();
        col.sort_by_key(|&(r, _)| r);
        col
    };
    let columns = if symmetric {
        (0..n as isize)
            .map(|k| {
                let mut col = collect_diag(k);
                if k > 0 {
                    col.extend(collect_diag(-k));
                    col.sort_by_key(|&(r, _)| r);
                }
                col
            })
            .collect()
    } else {
        (1 - n as isize..n as isize).map(collect_diag).collect()
    };
    let kind = if symmetric {
        StructureKind::SymmetricToeplitz
    } else {
        StructureKind::Toeplitz
    };
    LinearStructure::from_columns(n, kind, columns)
}

/// The trivial subspace `{0}`: no generators, block is never perturbed.
pub fn zero_structure(n: usize) -> LinearStructure {
    LinearStructure::from_columns(n, StructureKind::Zero, Vec::new())
}
