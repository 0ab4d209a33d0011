//! Built-in example systems.

use std::fmt;
use std::str::FromStr;

use gspcond::matkit::{kron, DenseMatrix};
use gspcond::random::{random_system, Rng};
use gspcond::{GspSystem, StructureKind};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleName {
    /// Badly scaled 3 + 2 system with a tunable `A[0,0] = 10^l`.
    Ex1,
    /// Random normal data, `m = l²`, `n = l`, symmetric `A` and `D`.
    Ex2,
    /// Discretized convection-diffusion type system with `B = C`.
    Ex3,
}

impl ExampleName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExampleName::Ex1 => "ex1",
            ExampleName::Ex2 => "ex2",
            ExampleName::Ex3 => "ex3",
        }
    }

    /// Accepted values of `l`.
    pub fn l_range(self) -> (u32, u32) {
        match self {
            ExampleName::Ex1 => (1, 6),
            ExampleName::Ex2 => (2, 8),
            ExampleName::Ex3 => (2, 7),
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ex1" => Ok(ExampleName::Ex1),
            "ex2" => Ok(ExampleName::Ex2),
            "ex3" => Ok(ExampleName::Ex3),
            other => Err(CliError::Argument(format!(
                "unknown example '{other}' (expected ex1, ex2 or ex3)"
            ))),
        }
    }
}

/// Builds the example for `l`; `seed` only affects `ex2`.
pub fn generate_example(name: ExampleName, l: u32, seed: u64) -> CliResult<GspSystem> {
    let (lo, hi) = name.l_range();
    if !(lo..=hi).contains(&l) {
        return Err(CliError::Argument(format!("{name} needs l in {lo}..={hi}, got {l}")));
    }
    let sys = match name {
        ExampleName::Ex1 => ex1(l)?,
        ExampleName::Ex2 => {
            let l = l as usize;
            random_system(&mut Rng::new(seed), l * l, l, true, true)
        }
        ExampleName::Ex3 => ex3(l as usize)?,
    };
    Ok(sys)
}

fn ex1(l: u32) -> CliResult<GspSystem> {
    let a = DenseMatrix::from_rows(&[
        vec![10f64.powi(l as i32), 31.0, 5.0],
        vec![31.0, 61.0, 2e3],
        vec![5.0, 2e3, 5.0],
    ])?;
    let b = DenseMatrix::from_rows(&[vec![10.0, 31.0, 21.0], vec![6.0, -7.0, 1e5]])?;
    let c = DenseMatrix::from_rows(&[vec![1e-2, 5.0, 0.0], vec![0.0, 0.0, 40.0]])?;
    let d = DenseMatrix::from_rows(&[vec![-200.0, 100.0], vec![100.0, 10.0]])?;
    let sys = GspSystem::new(a, b, c, d, vec![10.0, 1.0, 150.0], vec![1.0, 10.0])?
        .with_structure_kinds(StructureKind::Symmetric, StructureKind::Symmetric)?;
    Ok(sys)
}

/// `tridiag(sub, diag, sup)` of order `l`.
pub fn tridiag(l: usize, sub: f64, diag: f64, sup: f64) -> DenseMatrix {
    DenseMatrix::from_fn(l, l, |i, j| {
        if i == j {
            diag
        } else if i == j + 1 {
            sub
        } else if j == i + 1 {
            sup
        } else {
            0.0
        }
    })
}

const EX3_MU: f64 = 0.01;

fn ex3(l: usize) -> CliResult<GspSystem> {
    let h = 1.0 / (l as f64 + 1.0);
    let t = tridiag(l, -1.0, 2.0 * EX3_MU / h, -1.0);
    let g = tridiag(l, -1.0, 1.0 / h, 0.0);
    let i = DenseMatrix::identity(l);
    let it = kron(&i, &t)?;
    let lap = it.add(&kron(&t, &i)?);
    let z = DenseMatrix::zeros(l * l, l * l);
    let a = DenseMatrix::from_blocks(&it, &z, &z, &lap).scale(10.0);
    let ig = kron(&i, &g)?;
    let gi = kron(&g, &i)?;
    // Bᵀ = [I⊗G; G⊗I], so B = [(I⊗G)ᵀ (G⊗I)ᵀ].
    let bt = DenseMatrix::from_fn(2 * l * l, l * l, |r, c| {
        if r < l * l {
            ig.get(r, c)
        } else {
            gi.get(r - l * l, c)
        }
    });
    let b = bt.transpose();
    let d = DenseMatrix::identity(l * l);
    let (m, n) = (2 * l * l, l * l);
    let probe = GspSystem::new(a.clone(), b.clone(), b.clone(), d.clone(), vec![0.0; m], vec![0.0; n])?;
    let rhs = probe.assemble().matvec(&vec![2.0; m + n]);
    let sys = GspSystem::new(a, b.clone(), b, d, rhs[..m].to_vec(), rhs[m..].to_vec())?
        .with_structure_kinds(StructureKind::Symmetric, StructureKind::General)?;
    Ok(sys)
}
