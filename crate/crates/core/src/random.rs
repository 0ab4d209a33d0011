//! Seeded random problem generators and the counter-keyed normal stream used
//! by the perturbation sampler.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gsp::GspSystem;
use crate::matkit::DenseMatrix;
use crate::structure::StructureKind;

/// Sequential seeded generator.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Standard normal value determined only by `(seed, block, index)`.
pub fn keyed_normal(seed: u64, block: u64, index: u64) -> f64 {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ block) ^ index);
    ChaCha8Rng::seed_from_u64(key).sample(StandardNormal)
}

/// Seed of the `index`-th independent stream derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5EED)))
}

pub fn random_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.normal()).collect()
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = random_vec(rng, rows * cols);
    DenseMatrix::from_col_major(rows, cols, data).expect("normal samples are finite")
}

/// Normal upper triangle mirrored to the lower one.
pub fn random_symmetric(rng: &mut Rng, n: usize) -> DenseMatrix {
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            upper[i * n + j] = rng.normal();
        }
    }
    DenseMatrix::from_fn(n, n, |i, j| if i <= j { upper[i * n + j] } else { upper[j * n + i] })
}

/// Random system with independent normal `B`, `C`; symmetric flags also
/// attach the symmetric structure to the block.
pub fn random_system(rng: &mut Rng, m: usize, n: usize, sym_a: bool, sym_d: bool) -> GspSystem {
    let a = if sym_a {
        random_symmetric(rng, m)
    } else {
        random_matrix(rng, m, m)
    };
    let b = random_matrix(rng, n, m);
    let c = random_matrix(rng, n, m);
    let d = if sym_d {
        random_symmetric(rng, n)
    } else {
        random_matrix(rng, n, n)
    };
    let f = random_vec(rng, m);
    let g = random_vec(rng, n);
    let kind = |s| {
        if s {
            StructureKind::Symmetric
        } else {
            StructureKind::General
        }
    };
    GspSystem::new(a, b, c, d, f, g)
        .and_then(|s| s.with_structure_kinds(kind(sym_a), kind(sym_d)))
        .expect("generated system is valid")
}

/// Random system with `C = B` and general `D`.
pub fn random_system_bc(rng: &mut Rng, m: usize, n: usize, sym_a: bool) -> GspSystem {
    let a = if sym_a {
        random_symmetric(rng, m)
    } else {
        random_matrix(rng, m, m)
    };
    let b = random_matrix(rng, n, m);
    let d = random_matrix(rng, n, n);
    let f = random_vec(rng, m);
    let g = random_vec(rng, n);
    let kind = if sym_a {
        StructureKind::Symmetric
    } else {
        StructureKind::General
    };
    GspSystem::new(a, b.clone(), b, d, f, g)
        .and_then(|s| s.with_structure_kinds(kind, StructureKind::General))
        .expect("generated system is valid")
}
