//! Generalized saddle point systems `[A Bᵀ; C D][x1; x2] = [f; g]`, their
//! block inverse through the Schur complement and the sensitivity matrices
//! `H` (independent `B`, `C`) and `R` (`B = C`).

use crate::error::{Error, Result};
use crate::matkit::{self, DenseMatrix, Lu};
use crate::structure::{general_structure, LinearStructure, StructureKind};

/// Cap on the number of entries of a dense `H` or `R`.
pub const SENSITIVITY_CAP: usize = 50_000_000;

/// Relative tolerance for the symmetry check of symmetric-tagged blocks.
pub const SYMMETRY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct GspSystem {
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    d: DenseMatrix,
    f: Vec<f64>,
    g: Vec<f64>,
    struct_a: LinearStructure,
    struct_d: LinearStructure,
    bc_equal: bool,
}

/// Blocks of `𝓜⁻¹ = [M N; K S⁻¹]` and the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseBlocks {
    pub m_blk: DenseMatrix,
    pub n_blk: DenseMatrix,
    pub k_blk: DenseMatrix,
    pub s_inv: DenseMatrix,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl InverseBlocks {
    pub fn m(&self) -> usize {
        self.m_blk.rows()
    }

    pub fn n(&self) -> usize {
        self.s_inv.rows()
    }

    /// `𝓜⁻¹` as one dense matrix.
    pub fn full(&self) -> DenseMatrix {
        DenseMatrix::from_blocks(&self.m_blk, &self.n_blk, &self.k_blk, &self.s_inv)
    }

    /// `[x1; x2]`.
    pub fn z(&self) -> Vec<f64> {
        self.x1.iter().chain(&self.x2).copied().collect()
    }
}

fn check_vec(context: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::dims(context, len, v.len()));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

fn shape(m: &DenseMatrix) -> String {
    format!("{}x{}", m.rows(), m.cols())
}

impl GspSystem {
    /// Validates dimensions; both diagonal blocks start with general structure.
    pub fn new(
        a: DenseMatrix,
        b: DenseMatrix,
        c: DenseMatrix,
        d: DenseMatrix,
        f: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        let m = a.rows();
        let n = d.rows();
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("block sizes m and n must be at least 1".into()));
        }
        if !a.is_square() {
            return Err(Error::dims("block A", format!("{m}x{m}"), shape(&a)));
        }
        if !d.is_square() {
            return Err(Error::dims("block D", format!("{n}x{n}"), shape(&d)));
        }
        if b.rows() != n || b.cols() != m {
            return Err(Error::dims("block B", format!("{n}x{m}"), shape(&b)));
        }
        if c.rows() != n || c.cols() != m {
            return Err(Error::dims("block C", format!("{n}x{m}"), shape(&c)));
        }
        check_vec("right-hand side f", &f, m)?;
        check_vec("right-hand side g", &g, n)?;
        let bc_equal = b == c;
        Ok(GspSystem {
            a,
            b,
            c,
            d,
            f,
            g,
            struct_a: general_structure(m),
            struct_d: general_structure(n),
            bc_equal,
        })
    }

    /// Attaches structures to `A` and `D`, checking membership.
    pub fn with_structures(mut self, struct_a: LinearStructure, struct_d: LinearStructure) -> Result<Self> {
        check_membership("A", &self.a, &struct_a)?;
        check_membership("D", &self.d, &struct_d)?;
        self.struct_a = struct_a;
        self.struct_d = struct_d;
        Ok(self)
    }

    pub fn with_structure_kinds(self, a: StructureKind, d: StructureKind) -> Result<Self> {
        let (m, n) = (self.m(), self.n());
        self.with_structures(a.build(m)?, d.build(n)?)
    }

    /// Forces the `B = C` flag; enabling requires exact equality.
    pub fn set_bc_equal(&mut self, on: bool) -> Result<()> {
        if on && self.b != self.c {
            return Err(Error::WrongCase(
                "B and C differ, cannot treat the system as B = C".into(),
            ));
        }
        self.bc_equal = on;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.d.rows()
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn d(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn struct_a(&self) -> &LinearStructure {
        &self.struct_a
    }

    pub fn struct_d(&self) -> &LinearStructure {
        &self.struct_d
    }

    pub fn bc_equal(&self) -> bool {
        self.bc_equal
    }

    /// `[f; g]`.
    pub fn rhs(&self) -> Vec<f64> {
        self.f.iter().chain(&self.g).copied().collect()
    }

    /// `𝓜 = [A Bᵀ; C D]`.
    pub fn assemble(&self) -> DenseMatrix {
        DenseMatrix::from_blocks(&self.a, &self.b.transpose(), &self.c, &self.d)
    }

    /// `‖[A Bᵀ f; C D g]‖_F`.
    pub fn data_norm(&self) -> f64 {
        hypot_all(&[
            self.a.frobenius(),
            self.b.frobenius(),
            self.c.frobenius(),
            self.d.frobenius(),
            matkit::norm2(&self.f),
            matkit::norm2(&self.g),
        ])
    }

    /// `‖[A 0 f; B D g]‖_F`, the data norm when `B = C` is one block.
    pub fn data_norm_bc(&self) -> f64 {
        hypot_all(&[
            self.a.frobenius(),
            self.b.frobenius(),
            self.d.frobenius(),
            matkit::norm2(&self.f),
            matkit::norm2(&self.g),
        ])
    }

    fn factor(&self) -> Result<Factored> {
        let lu_a = Lu::new(&self.a).map_err(|e| Error::SingularA(Box::new(e)))?;
        let bt = self.b.transpose();
        let x = lu_a.solve_matrix(&bt);
        let s = self.d.sub(&self.c.matmul(&x));
        let lu_s = Lu::new(&s).map_err(|e| Error::SingularSchur(Box::new(e)))?;
        Ok(Factored { lu_a, lu_s, bt, x })
    }

    fn solve_factored(&self, fac: &Factored) -> (Vec<f64>, Vec<f64>) {
        let af = fac.lu_a.solve(&self.f);
        let caf = self.c.matvec(&af);
        let rhs2: Vec<f64> = self.g.iter().zip(&caf).map(|(g, c)| g - c).collect();
        let x2 = fac.lu_s.solve(&rhs2);
        let btx2 = fac.bt.matvec(&x2);
        let rhs1: Vec<f64> = self.f.iter().zip(&btx2).map(|(f, b)| f - b).collect();
        (fac.lu_a.solve(&rhs1), x2)
    }

    pub fn inverse_blocks(&self) -> Result<InverseBlocks> {
        let fac = self.factor()?;
        let a_inv = fac.lu_a.inverse();
        let y = self.c.matmul(&a_inv);
        let s_inv = fac.lu_s.inverse();

        let n_blk = fac.x.matmul(&s_inv).scale(-1.0);
        let k_blk = s_inv.matmul(&y).scale(-1.0);
        let m_blk = a_inv.sub(&n_blk.matmul(&y));
        let (x1, x2) = self.solve_factored(&fac);

        Ok(InverseBlocks {
            m_blk,
            n_blk,
            k_blk,
            s_inv,
            x1,
            x2,
        })
    }

    /// `[x1; x2]` by block elimination.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let fac = self.factor()?;
        let (mut z, x2) = self.solve_factored(&fac);
        z.extend(x2);
        Ok(z)
    }
}

struct Factored {
    lu_a: Lu,
    lu_s: Lu,
    bt: DenseMatrix,
    /// `A⁻¹Bᵀ`
    x: DenseMatrix,
}

fn check_membership(name: &str, block: &DenseMatrix, s: &LinearStructure) -> Result<()> {
    if s.order() != block.rows() {
        return Err(Error::dims(
            &format!("structure of block {name}"),
            format!("order {}", block.rows()),
            format!("order {}", s.order()),
        ));
    }
    if matches!(s.kind(), StructureKind::Symmetric | StructureKind::SymmetricToeplitz)
        && !block.is_symmetric(SYMMETRY_TOL)
    {
        // report the worst entry through the generator check when it is the culprit
        s.generator(block)?;
        let n = block.rows();
        let (row, col, residual) = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, (block.get(i, j) - block.get(j, i)).abs()))
            .fold((0, 0, 0.0), |b, t| if t.2 > b.2 { t } else { b });
        return Err(Error::NotInSubspace {
            kind: s.kind().to_string(),
            row,
            col,
            residual,
        });
    }
    s.generator(block).map(|_| ())
}

fn hypot_all(parts: &[f64]) -> f64 {
    matkit::norm2(parts)
}

/// `H = [x1ᵀ⊗I_m  I_m⊗x2ᵀ  0  0; 0  0  x1ᵀ⊗I_n  x2ᵀ⊗I_n]`, columns ordered
/// `vec ΔA, vec ΔB, vec ΔC, vec ΔD`.
pub fn sensitivity_h(x1: &[f64], x2: &[f64]) -> Result<DenseMatrix> {
    let (m, n) = (x1.len(), x2.len());
    let cols = m * m + 2 * m * n + n * n;
    cap_check((m + n).saturating_mul(cols))?;
    let mut h = DenseMatrix::zeros(m + n, cols);
    let mut col = 0;
    for j in 0..m {
        for i in 0..m {
            h.set(i, col, x1[j]);
            col += 1;
        }
    }
    for q in 0..m {
        for p in 0..n {
            h.set(q, col, x2[p]);
            col += 1;
        }
    }
    for q in 0..m {
        for p in 0..n {
            h.set(m + p, col, x1[q]);
            col += 1;
        }
    }
    for q in 0..n {
        for p in 0..n {
            h.set(m + p, col, x2[q]);
            col += 1;
        }
    }
    Ok(h)
}

/// `R = [x1ᵀ⊗I_m  I_m⊗x2ᵀ  0; 0  x1ᵀ⊗I_n  x2ᵀ⊗I_n]`, columns ordered
/// `vec ΔA, vec ΔB, vec ΔD`.
pub fn sensitivity_r(x1: &[f64], x2: &[f64]) -> Result<DenseMatrix> {
    let (m, n) = (x1.len(), x2.len());
    let cols = m * m + m * n + n * n;
    cap_check((m + n).saturating_mul(cols))?;
    let mut r = DenseMatrix::zeros(m + n, cols);
    let mut col = 0;
    for j in 0..m {
        for i in 0..m {
            r.set(i, col, x1[j]);
            col += 1;
        }
    }
    for q in 0..m {
        for p in 0..n {
            r.set(q, col, x2[p]);
            r.set(m + p, col, x1[q]);
            col += 1;
        }
    }
    for q in 0..n {
        for p in 0..n {
            r.set(m + p, col, x2[q]);
            col += 1;
        }
    }
    Ok(r)
}

fn cap_check(entries: usize) -> Result<()> {
    if entries > SENSITIVITY_CAP {
        return Err(Error::SizeCap {
            entries,
            cap: SENSITIVITY_CAP,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_system, random_vec, Rng};
    use crate::structure::symmetric_structure;

    fn scalar(a: f64, b: f64, c: f64, d: f64, f: f64, g: f64) -> GspSystem {
        let s = |v| DenseMatrix::from_row_major(1, 1, &[v]).unwrap();
        GspSystem::new(s(a), s(b), s(c), s(d), vec![f], vec![g]).unwrap()
    }

    fn identity_system(m: usize, n: usize) -> GspSystem {
        GspSystem::new(
            DenseMatrix::identity(m),
            DenseMatrix::zeros(n, m),
            DenseMatrix::zeros(n, m),
            DenseMatrix::identity(n),
            (1..=m).map(|i| i as f64).collect(),
            (1..=n).map(|i| -(i as f64)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn assemble_scalar_and_identity() {
        let sys = scalar(2.0, 1.0, 1.0, 3.0, 3.0, 4.0);
        let expected = DenseMatrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(sys.assemble(), expected);
        assert_eq!(identity_system(3, 2).assemble(), DenseMatrix::identity(5));
    }

    #[test]
    fn inverse_blocks_scalar() {
        // S = 3 - 1/2 = 2.5, adjugate of [[2,1],[1,3]] over det 5
        let ib = scalar(2.0, 1.0, 1.0, 3.0, 3.0, 4.0).inverse_blocks().unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-15;
        assert!(close(ib.m_blk.get(0, 0), 0.6));
        assert!(close(ib.n_blk.get(0, 0), -0.2));
        assert!(close(ib.k_blk.get(0, 0), -0.2));
        assert!(close(ib.s_inv.get(0, 0), 0.4));
        assert!(close(ib.x1[0], 1.0) && close(ib.x2[0], 1.0));
    }

    #[test]
    fn inverse_blocks_identity() {
        let sys = identity_system(3, 2);
        let ib = sys.inverse_blocks().unwrap();
        assert_eq!(ib.m_blk, DenseMatrix::identity(3));
        assert_eq!(ib.n_blk, DenseMatrix::zeros(3, 2));
        assert_eq!(ib.k_blk, DenseMatrix::zeros(2, 3));
        assert_eq!(ib.s_inv, DenseMatrix::identity(2));
        assert_eq!(ib.z(), sys.rhs());
    }

    #[test]
    fn singular_blocks_are_typed() {
        let sing_a = scalar(0.0, 1.0, 1.0, 3.0, 1.0, 1.0);
        assert_eq!(sing_a.inverse_blocks().unwrap_err().code(), "singular-a");
        // S = 0.5 - 1*1/2 = 0
        let sing_s = scalar(2.0, 1.0, 1.0, 0.5, 1.0, 1.0);
        assert_eq!(sing_s.inverse_blocks().unwrap_err().code(), "singular-schur");
    }

    #[test]
    fn dimension_validation() {
        let err = GspSystem::new(
            DenseMatrix::identity(2),
            DenseMatrix::zeros(1, 3),
            DenseMatrix::zeros(1, 2),
            DenseMatrix::identity(1),
            vec![0.0; 2],
            vec![0.0],
        )
        .unwrap_err();
        assert_eq!(err.code(), "dimension-mismatch");
    }

    #[test]
    fn bc_flag_detection() {
        let mut sys = scalar(2.0, 1.0, 1.0, 3.0, 3.0, 4.0);
        assert!(sys.bc_equal());
        sys.set_bc_equal(false).unwrap();
        assert!(!sys.bc_equal());
        let mut other = scalar(2.0, 1.0, 2.0, 3.0, 3.0, 4.0);
        assert!(!other.bc_equal());
        assert_eq!(other.set_bc_equal(true).unwrap_err().code(), "wrong-case");
    }

    #[test]
    fn symmetric_membership_is_checked() {
        let a = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 2.5, 1.0]).unwrap();
        let sys = GspSystem::new(
            a,
            DenseMatrix::zeros(1, 2),
            DenseMatrix::zeros(1, 2),
            DenseMatrix::identity(1),
            vec![1.0, 1.0],
            vec![1.0],
        )
        .unwrap();
        let err = sys
            .with_structures(symmetric_structure(2), symmetric_structure(1))
            .unwrap_err();
        match err {
            Error::NotInSubspace { row, col, .. } => assert_eq!((row.min(col), row.max(col)), (0, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sensitivity_scalar_and_zero() {
        let h = sensitivity_h(&[1.0], &[1.0]).unwrap();
        assert_eq!(
            h,
            DenseMatrix::from_row_major(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap()
        );
        let r = sensitivity_r(&[1.0], &[1.0]).unwrap();
        assert_eq!(
            r,
            DenseMatrix::from_row_major(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]).unwrap()
        );
        assert_eq!(sensitivity_h(&[0.0; 2], &[0.0]).unwrap().max_abs(), 0.0);
        assert_eq!(sensitivity_r(&[0.0; 2], &[0.0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sensitivity_cap() {
        let big = vec![1.0; 700];
        assert_eq!(sensitivity_h(&big, &big).unwrap_err().code(), "size-cap");
    }

    #[test]
    fn h_applies_block_products() {
        let mut rng = Rng::new(11);
        let (m, n) = (2, 1);
        let x1 = random_vec(&mut rng, m);
        let x2 = random_vec(&mut rng, n);
        let da = random_matrix(&mut rng, m, m);
        let db = random_matrix(&mut rng, n, m);
        let dc = random_matrix(&mut rng, n, m);
        let dd = random_matrix(&mut rng, n, n);
        let stack: Vec<f64> = [&da, &db, &dc, &dd].iter().flat_map(|x| matkit::vec(x)).collect();
        let got = sensitivity_h(&x1, &x2).unwrap().matvec(&stack);
        let top: Vec<f64> = da
            .matvec(&x1)
            .iter()
            .zip(db.transpose().matvec(&x2))
            .map(|(a, b)| a + b)
            .collect();
        let bot: Vec<f64> = dc.matvec(&x1).iter().zip(dd.matvec(&x2)).map(|(a, b)| a + b).collect();
        let want: Vec<f64> = top.into_iter().chain(bot).collect();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-13);
        }
        // every column of H holds exactly one nonzero for generic x
        let h = sensitivity_h(&x1, &x2).unwrap();
        for j in 0..h.cols() {
            assert_eq!(h.column(j).iter().filter(|v| **v != 0.0).count(), 1);
        }
    }

    #[test]
    fn r_applies_block_products() {
        let mut rng = Rng::new(12);
        let (m, n) = (2, 1);
        let x1 = random_vec(&mut rng, m);
        let x2 = random_vec(&mut rng, n);
        let da = random_matrix(&mut rng, m, m);
        let db = random_matrix(&mut rng, n, m);
        let dd = random_matrix(&mut rng, n, n);
        let stack: Vec<f64> = [&da, &db, &dd].iter().flat_map(|x| matkit::vec(x)).collect();
        let got = sensitivity_r(&x1, &x2).unwrap().matvec(&stack);
        let top: Vec<f64> = da
            .matvec(&x1)
            .iter()
            .zip(db.transpose().matvec(&x2))
            .map(|(a, b)| a + b)
            .collect();
        let bot: Vec<f64> = db.matvec(&x1).iter().zip(dd.matvec(&x2)).map(|(a, b)| a + b).collect();
        for (g, w) in got.iter().zip(top.iter().chain(&bot)) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn blocks_invert_assembled_matrix() {
        let mut rng = Rng::new(5);
        for _ in 0..30 {
            let m = rng.below(10) + 1;
            let n = rng.below(10) + 1;
            let sys = random_system(&mut rng, m, n, false, false);
            let ib = sys.inverse_blocks().unwrap();
            let prod = ib.full().matmul(&sys.assemble());
            assert!(prod.sub(&DenseMatrix::identity(m + n)).inf_norm() < 1e-8);
            let resid: Vec<f64> = sys
                .assemble()
                .matvec(&ib.z())
                .iter()
                .zip(sys.rhs())
                .map(|(a, b)| a - b)
                .collect();
            assert!(matkit::norm_inf(&resid) < 1e-10 * (1.0 + matkit::norm_inf(&sys.rhs())));
            let z = sys.solve().unwrap();
            assert_eq!(z, ib.z());
        }
    }

    #[test]
    fn first_order_expansion_decays_quadratically() {
        let mut rng = Rng::new(8);
        let sys = random_system(&mut rng, 3, 2, false, false);
        let ib = sys.inverse_blocks().unwrap();
        let minv = ib.full();
        let (m, n) = (3, 2);
        let dirs = [
            random_matrix(&mut rng, m, m),
            random_matrix(&mut rng, n, m),
            random_matrix(&mut rng, n, m),
            random_matrix(&mut rng, n, n),
        ];
        let df = random_vec(&mut rng, m);
        let dg = random_vec(&mut rng, n);
        let h = sensitivity_h(&ib.x1, &ib.x2).unwrap();
        let stack: Vec<f64> = dirs.iter().flat_map(matkit::vec).collect();
        let hv = h.matvec(&stack);
        let rhs_d: Vec<f64> = df.iter().chain(&dg).copied().collect();
        let pred_unit: Vec<f64> = minv
            .matvec(&rhs_d)
            .iter()
            .zip(minv.matvec(&hv))
            .map(|(a, b)| a - b)
            .collect();
        let mut errs = Vec::new();
        for eps in [1e-5, 1e-6, 1e-7] {
            let pa = sys.a().add(&dirs[0].scale(eps));
            let pb = sys.b().add(&dirs[1].scale(eps));
            let pc = sys.c().add(&dirs[2].scale(eps));
            let pd = sys.d().add(&dirs[3].scale(eps));
            // solve for the change directly: (𝓜 + Δ𝓜)Δz = Δb − Δ𝓜 z
            let dm_z: Vec<f64> = hv.iter().map(|v| eps * v).collect();
            let df_eff: Vec<f64> = (0..m).map(|i| eps * df[i] - dm_z[i]).collect();
            let dg_eff: Vec<f64> = (0..n).map(|i| eps * dg[i] - dm_z[m + i]).collect();
            let dz = GspSystem::new(pa, pb, pc, pd, df_eff, dg_eff).unwrap().solve().unwrap();
            let e: Vec<f64> = dz.iter().zip(&pred_unit).map(|(d, p)| d - eps * p).collect();
            errs.push(matkit::norm2(&e));
        }
        let slope = (errs[0].ln() - errs[2].ln()) / (1e-5f64.ln() - 1e-7f64.ln());
        assert!((1.7..=2.3).contains(&slope), "slope {slope}");
    }
}
