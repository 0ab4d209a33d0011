//! Case `B = C` condition numbers against a dense evaluation through the
//! sensitivity matrix `R`.

#![allow(clippy::needless_range_loop)]

use gspcond::condnum::cn_joint_bc;
use gspcond::gsp::sensitivity_r;
use gspcond::matkit::{abs_vec, norm2, norm_inf, vec, DenseMatrix};
use gspcond::random::{random_system_bc, Rng};
use gspcond::structure::{general_structure, symmetric_structure};
use gspcond::LinearStructure;

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_max(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut m = a.to_rows();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let (c, s) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Dense `(normwise, mixed, componentwise)` for `[x1; x2]`.
fn dense_bc(sys: &gspcond::GspSystem, sa: &LinearStructure) -> (f64, f64, f64) {
    let (m, n) = (sys.m(), sys.n());
    let z = sys.solve().unwrap();
    let minv = gspcond::matkit::inverse(&sys.assemble()).unwrap();
    let r = sensitivity_r(&z[..m], &z[m..]).unwrap();
    let k = sa.dim();
    let (mid, nd) = (m * n, n * n);
    let pa = sa.phi_dense();
    // Φ = blockdiag(Φ_A, I_mn, I_n²); scaled version divides by 𝔇.
    let phi = |scaled: bool| {
        DenseMatrix::from_fn(r.cols(), k + mid + nd, |row, col| {
            if col < k {
                if row < m * m {
                    pa.get(row, col) / if scaled { sa.scaling()[col] } else { 1.0 }
                } else {
                    0.0
                }
            } else if row == m * m + (col - k) {
                1.0
            } else {
                0.0
            }
        })
    };
    let mr = minv.matmul(&r);
    let u_scaled = mr.matmul(&phi(true));
    let gram = u_scaled.gram_rows().add(&minv.gram_rows());
    let data = (sys.a().frobenius().powi(2)
        + sys.b().frobenius().powi(2)
        + sys.d().frobenius().powi(2)
        + norm2(sys.f()).powi(2)
        + norm2(sys.g()).powi(2))
    .sqrt();
    let normwise = jacobi_max(&gram).sqrt() * data / norm2(&z);

    let gen = sa.generator(sys.a()).unwrap();
    let w: Vec<f64> = gen.iter().copied().chain(vec(sys.b())).chain(vec(sys.d())).collect();
    let u = mr.matmul(&phi(false));
    let mut num = u.abs().matvec(&abs_vec(&w));
    let rhs = minv.abs().matvec(&abs_vec(&sys.rhs()));
    for (a, b) in num.iter_mut().zip(&rhs) {
        *a += b;
    }
    let mixed = norm_inf(&num) / norm_inf(&z);
    let comp = num.iter().zip(&z).map(|(a, x)| a / x.abs()).fold(0.0, f64::max);
    (normwise, mixed, comp)
}

#[test]
fn bc_case_matches_dense_r() {
    let mut rng = Rng::new(505);
    for i in 0..25 {
        let (m, n) = (1 + rng.below(5), 1 + rng.below(4));
        let sys = random_system_bc(&mut rng, m, n, true);
        for sa in [symmetric_structure(m), general_structure(m)] {
            let (st, _) = cn_joint_bc(&sys, &sa).unwrap();
            let (nw, mx, cw) = dense_bc(&sys, &sa);
            let rel = |a: f64, b: f64| (a - b).abs() / b;
            assert!(rel(st.normwise, nw) < 1e-9, "system {i}: {} vs {nw}", st.normwise);
            assert!(rel(st.mixed, mx) < 1e-12, "system {i}: {} vs {mx}", st.mixed);
            assert!(
                rel(st.componentwise, cw) < 1e-12,
                "system {i}: {} vs {cw}",
                st.componentwise
            );
        }
    }
}
