//! Normwise, mixed and componentwise condition numbers of GSP systems.
//!
//! Every perturbation coordinate (a structure generator, or a single entry
//! of an unstructured block) maps to one column `u` of `𝓜⁻¹HΦ` (joint) or of
//! the corresponding block row (individual solutions). Columns are streamed
//! into an accumulator holding the mixed numerator `Σ |u|·|w|` and the Gram
//! matrix `Σ u uᵀ / 𝔇²` whose largest eigenvalue gives the normwise CN.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsp::{GspSystem, InverseBlocks};
use crate::matkit::{self, comp_divide, largest_eigenvalue_psd, norm2, norm_inf, DenseMatrix};
use crate::structure::{general_structure, LinearStructure, StructureKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnTriple {
    pub normwise: f64,
    pub mixed: f64,
    pub componentwise: f64,
    /// Solution components equal to zero where the `‡` convention was used.
    pub zero_flags: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// General linear structures on `A` and `D`.
    A,
    /// Symmetric `A` and `D`.
    B,
    /// `B = C`.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Structured,
    Unstructured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Joint,
    X1,
    X2,
}

macro_rules! tag_strings {
    ($ty:ident { $($variant:ident => $s:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $s),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s => Ok($ty::$variant),)*
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

tag_strings!(Case { A => "a", B => "b", C => "c" });
tag_strings!(Variant { Structured => "structured", Unstructured => "unstructured" });
tag_strings!(Target { Joint => "joint", X1 => "x1", X2 => "x2" });

/// Condition numbers of one variant for the requested targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnReport {
    pub case: Case,
    pub variant: Variant,
    pub joint: Option<CnTriple>,
    pub x1: Option<CnTriple>,
    pub x2: Option<CnTriple>,
}

impl CnReport {
    pub fn get(&self, target: Target) -> Option<&CnTriple> {
        match target {
            Target::Joint => self.joint.as_ref(),
            Target::X1 => self.x1.as_ref(),
            Target::X2 => self.x2.as_ref(),
        }
    }
}

/// Which data blocks are perturbed. `b` covers `C` as well when `B = C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataMask {
    pub a: bool,
    pub b: bool,
    pub d: bool,
    pub f: bool,
    pub g: bool,
}

impl Default for DataMask {
    fn default() -> Self {
        DataMask {
            a: true,
            b: true,
            d: true,
            f: true,
            g: true,
        }
    }
}

struct Acc {
    num: Vec<f64>,
    gram: DenseMatrix,
    cols: usize,
}

impl Acc {
    fn new(rows: usize) -> Self {
        Acc {
            num: vec![0.0; rows],
            gram: DenseMatrix::zeros(rows, rows),
            cols: 0,
        }
    }

    /// One perturbation coordinate with image `u`, data value `w` and scaling `s`.
    fn column(&mut self, u: &[f64], w: f64, s: f64) {
        let aw = w.abs();
        if aw != 0.0 {
            for (n, x) in self.num.iter_mut().zip(u) {
                *n += x.abs() * aw;
            }
        }
        self.gram.add_outer(u, u, 1.0 / (s * s));
        self.cols += 1;
    }

    fn add_num(&mut self, v: &[f64]) {
        for (n, x) in self.num.iter_mut().zip(v) {
            *n += x;
        }
    }

    fn add_gram(&mut self, g: &DenseMatrix, cols: usize) {
        self.gram = self.gram.add(g);
        self.cols += cols;
    }

    fn finish(self, target: &[f64], name: &str, data_norm: f64) -> Result<CnTriple> {
        let (mixed, componentwise, zero_flags) = mixed_componentwise(&self.num, target, name)?;
        let lambda = largest_eigenvalue_psd(&self.gram, 50 * self.cols.max(self.num.len()))?;
        let normwise = lambda.max(0.0).sqrt() * data_norm / norm2(target);
        Ok(CnTriple {
            normwise,
            mixed,
            componentwise,
            zero_flags,
        })
    }
}

/// `‖num‖_∞/‖x‖_∞` and `‖num ⊘‡ |x|‖_∞` with zero flags.
pub(crate) fn mixed_componentwise(num: &[f64], x: &[f64], name: &str) -> Result<(f64, f64, Vec<usize>)> {
    let xi = norm_inf(x);
    if xi == 0.0 {
        return Err(Error::DegenerateSolution(name.to_string()));
    }
    let (ratio, _) = comp_divide(num, &matkit::abs_vec(x));
    let flags = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok((norm_inf(num) / xi, norm_inf(&ratio), flags))
}

/// `out += coef · P(:, j)`.
#[inline]
fn axpy_col(out: &mut [f64], p: &DenseMatrix, j: usize, coef: f64) {
    if coef == 0.0 {
        return;
    }
    for (o, v) in out.iter_mut().zip(p.column(j)) {
        *o += coef * v;
    }
}

/// `|P|·v`.
fn abs_matvec(p: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    p.abs().matvec(&matkit::abs_vec(v))
}

fn check_structure(name: &str, block: &DenseMatrix, s: &LinearStructure) -> Result<Vec<f64>> {
    if s.order() != block.rows() {
        return Err(Error::dims(
            &format!("structure of block {name}"),
            format!("order {}", block.rows()),
            format!("order {}", s.order()),
        ));
    }
    s.generator(block)
}

/// Perturbation model shared by the joint and individual routes.
struct Plan<'a> {
    a: Option<(&'a LinearStructure, Vec<f64>)>,
    d: Option<(&'a LinearStructure, Vec<f64>)>,
    /// `B` and `C` perturbed as one block.
    bc: bool,
    b: bool,
    f: bool,
    g: bool,
}

impl<'a> Plan<'a> {
    fn abd(sys: &GspSystem, sa: &'a LinearStructure, sd: &'a LinearStructure) -> Result<Self> {
        Ok(Plan {
            a: Some((sa, check_structure("A", sys.a(), sa)?)),
            d: Some((sd, check_structure("D", sys.d(), sd)?)),
            bc: false,
            b: true,
            f: true,
            g: true,
        })
    }

    fn bc(sys: &GspSystem, sa: &'a LinearStructure, sd: &'a LinearStructure, mask: DataMask) -> Result<Self> {
        if !sys.bc_equal() {
            return Err(Error::WrongCase(
                "B = C formulas need a system flagged with B = C".into(),
            ));
        }
        let a = if mask.a {
            Some((sa, check_structure("A", sys.a(), sa)?))
        } else {
            None
        };
        let d = if mask.d {
            Some((sd, check_structure("D", sys.d(), sd)?))
        } else {
            None
        };
        Ok(Plan {
            a,
            d,
            bc: true,
            b: mask.b,
            f: mask.f,
            g: mask.g,
        })
    }
}

/// Streams every column of `𝓜⁻¹[HΦ, I]` (or `𝓜⁻¹[RΦ, I]`).
fn joint_acc(sys: &GspSystem, ib: &InverseBlocks, plan: &Plan) -> Acc {
    let (m, n) = (sys.m(), sys.n());
    let minv = ib.full();
    let (x1, x2) = (&ib.x1, &ib.x2);
    let mut acc = Acc::new(m + n);
    let mut u = vec![0.0; m + n];

    if let Some((sa, gen)) = &plan.a {
        for (k, col) in sa.columns().enumerate() {
            u.fill(0.0);
            for &(r, v) in col {
                axpy_col(&mut u, &minv, r % m, v * x1[r / m]);
            }
            acc.column(&u, gen[k], sa.scaling()[k]);
        }
    }
    if plan.b {
        for q in 0..m {
            for p in 0..n {
                u.fill(0.0);
                axpy_col(&mut u, &minv, q, x2[p]);
                if plan.bc {
                    axpy_col(&mut u, &minv, m + p, x1[q]);
                }
                acc.column(&u, sys.b().get(p, q), 1.0);
            }
        }
        if !plan.bc {
            for q in 0..m {
                for p in 0..n {
                    u.fill(0.0);
                    axpy_col(&mut u, &minv, m + p, x1[q]);
                    acc.column(&u, sys.c().get(p, q), 1.0);
                }
            }
        }
    }
    if let Some((sd, gen)) = &plan.d {
        for (k, col) in sd.columns().enumerate() {
            u.fill(0.0);
            for &(r, v) in col {
                axpy_col(&mut u, &minv, m + r % n, v * x2[r / n]);
            }
            acc.column(&u, gen[k], sd.scaling()[k]);
        }
    }
    let rhs = sys.rhs();
    for i in 0..m + n {
        if (i < m && plan.f) || (i >= m && plan.g) {
            acc.column(minv.column(i), rhs[i], 1.0);
        }
    }
    acc
}

/// Accumulates the block row `[P Q]` of `𝓜⁻¹` that maps to one solution block.
fn individual_acc(sys: &GspSystem, ib: &InverseBlocks, plan: &Plan, target: Target) -> Acc {
    let (m, n) = (sys.m(), sys.n());
    let (p_blk, q_blk) = match target {
        Target::X1 => (&ib.m_blk, &ib.n_blk),
        _ => (&ib.k_blk, &ib.s_inv),
    };
    let rows = p_blk.rows();
    let (x1, x2) = (&ib.x1, &ib.x2);
    let mut acc = Acc::new(rows);
    let mut u = vec![0.0; rows];

    if let Some((sa, gen)) = &plan.a {
        for (k, col) in sa.columns().enumerate() {
            u.fill(0.0);
            for &(r, v) in col {
                axpy_col(&mut u, p_blk, r % m, v * x1[r / m]);
            }
            acc.column(&u, gen[k], sa.scaling()[k]);
        }
    }
    if plan.b {
        let ppt = p_blk.gram_rows();
        let qqt = q_blk.gram_rows();
        let (n1, n2) = (norm2(x1), norm2(x2));
        let mut g = ppt.scale(n2 * n2).add(&qqt.scale(n1 * n1));
        if plan.bc {
            // |M⊗x2ᵀ + x1ᵀ⊗N|·vec|B| has no factored form
            for q in 0..m {
                for p in 0..n {
                    let w = sys.b().get(p, q).abs();
                    if w == 0.0 {
                        continue;
                    }
                    let (pc, qc) = (p_blk.column(q), q_blk.column(p));
                    for (i, num) in acc.num.iter_mut().enumerate() {
                        *num += (x2[p] * pc[i] + x1[q] * qc[i]).abs() * w;
                    }
                }
            }
            let px1 = p_blk.matvec(x1);
            let qx2 = q_blk.matvec(x2);
            g.add_outer(&px1, &qx2, 1.0);
            g.add_outer(&qx2, &px1, 1.0);
            acc.add_gram(&g, m * n);
        } else {
            acc.add_num(&abs_matvec(
                p_blk,
                &sys.b().transpose().abs().matvec(&matkit::abs_vec(x2)),
            ));
            acc.add_num(&abs_matvec(q_blk, &sys.c().abs().matvec(&matkit::abs_vec(x1))));
            acc.add_gram(&g, 2 * m * n);
        }
    }
    if let Some((sd, gen)) = &plan.d {
        for (k, col) in sd.columns().enumerate() {
            u.fill(0.0);
            for &(r, v) in col {
                axpy_col(&mut u, q_blk, r % n, v * x2[r / n]);
            }
            acc.column(&u, gen[k], sd.scaling()[k]);
        }
    }
    if plan.f {
        acc.add_num(&abs_matvec(p_blk, sys.f()));
        acc.add_gram(&p_blk.gram_rows(), m);
    }
    if plan.g {
        acc.add_num(&abs_matvec(q_blk, sys.g()));
        acc.add_gram(&q_blk.gram_rows(), n);
    }
    acc
}

fn target_vec(ib: &InverseBlocks, target: Target) -> Vec<f64> {
    match target {
        Target::Joint => ib.z(),
        Target::X1 => ib.x1.clone(),
        Target::X2 => ib.x2.clone(),
    }
}

/// Skeel–Rohn mixed and componentwise CNs of the whole solution, with
/// numerator `|𝓜⁻¹||𝓜||z| + |𝓜⁻¹||b|`.
pub fn unstructured_mixed_componentwise_joint(sys: &GspSystem) -> Result<(f64, f64, Vec<usize>)> {
    let ib = sys.inverse_blocks()?;
    let z = ib.z();
    let inner: Vec<f64> = sys
        .assemble()
        .abs()
        .matvec(&matkit::abs_vec(&z))
        .iter()
        .zip(sys.rhs())
        .map(|(a, b)| a + b.abs())
        .collect();
    let num = ib.full().abs().matvec(&inner);
    mixed_componentwise(&num, &z, "[x1; x2]")
}

/// Structured CNs of `[x1; x2]` with `A ∈ S_A`, `D ∈ S_D` and `B`, `C` free.
pub fn structured_cn_joint(sys: &GspSystem, sa: &LinearStructure, sd: &LinearStructure) -> Result<CnTriple> {
    let plan = Plan::abd(sys, sa, sd)?;
    let ib = sys.inverse_blocks()?;
    joint_acc(sys, &ib, &plan).finish(&ib.z(), "[x1; x2]", sys.data_norm())
}

pub fn structured_cn_x1(sys: &GspSystem, sa: &LinearStructure, sd: &LinearStructure) -> Result<CnTriple> {
    let plan = Plan::abd(sys, sa, sd)?;
    let ib = sys.inverse_blocks()?;
    individual_acc(sys, &ib, &plan, Target::X1).finish(&ib.x1, "x1", sys.data_norm())
}

pub fn structured_cn_x2(sys: &GspSystem, sa: &LinearStructure, sd: &LinearStructure) -> Result<CnTriple> {
    let plan = Plan::abd(sys, sa, sd)?;
    let ib = sys.inverse_blocks()?;
    individual_acc(sys, &ib, &plan, Target::X2).finish(&ib.x2, "x2", sys.data_norm())
}

/// Mixed numerator vector of the requested target (cases a and b): the
/// joint one comes from `𝓜⁻¹`, the individual ones from the blocks `M, N, K, S⁻¹`.
pub fn mixed_numerator(
    sys: &GspSystem,
    sa: &LinearStructure,
    sd: &LinearStructure,
    target: Target,
) -> Result<Vec<f64>> {
    let plan = Plan::abd(sys, sa, sd)?;
    let ib = sys.inverse_blocks()?;
    Ok(match target {
        Target::Joint => joint_acc(sys, &ib, &plan).num,
        t => individual_acc(sys, &ib, &plan, t).num,
    })
}

fn bc_triple(
    sys: &GspSystem,
    ib: &InverseBlocks,
    sa: &LinearStructure,
    mask: DataMask,
    target: Target,
) -> Result<CnTriple> {
    let sd = general_structure(sys.n());
    let plan = Plan::bc(sys, sa, &sd, mask)?;
    let acc = match target {
        Target::Joint => joint_acc(sys, ib, &plan),
        t => individual_acc(sys, ib, &plan, t),
    };
    let name = match target {
        Target::Joint => "[x1; x2]",
        Target::X1 => "x1",
        Target::X2 => "x2",
    };
    acc.finish(&target_vec(ib, target), name, sys.data_norm_bc())
}

/// `B = C` case, whole solution: `(structured with A ∈ S_A, unstructured)`.
/// `D` is always unstructured here.
pub fn cn_joint_bc(sys: &GspSystem, sa: &LinearStructure) -> Result<(CnTriple, CnTriple)> {
    let ib = sys.inverse_blocks()?;
    let mask = DataMask::default();
    let structured = bc_triple(sys, &ib, sa, mask, Target::Joint)?;
    let unstructured = bc_triple(sys, &ib, &general_structure(sys.m()), mask, Target::Joint)?;
    Ok((structured, unstructured))
}

/// `B = C` case, one solution block: `(structured, unstructured)`.
pub fn cn_individual_bc(sys: &GspSystem, sa: &LinearStructure, target: Target) -> Result<(CnTriple, CnTriple)> {
    if target == Target::Joint {
        return cn_joint_bc(sys, sa);
    }
    let ib = sys.inverse_blocks()?;
    let mask = DataMask::default();
    let structured = bc_triple(sys, &ib, sa, mask, target)?;
    let unstructured = bc_triple(sys, &ib, &general_structure(sys.m()), mask, target)?;
    Ok((structured, unstructured))
}

/// Structured `B = C` CNs restricted to the blocks enabled in `mask`.
pub fn cn_bc_masked(sys: &GspSystem, sa: &LinearStructure, target: Target, mask: DataMask) -> Result<CnTriple> {
    let ib = sys.inverse_blocks()?;
    bc_triple(sys, &ib, sa, mask, target)
}

/// Case implied by the system: `c` when `B = C`, `b` when a diagonal block is
/// tagged symmetric, `a` otherwise.
pub fn detect_case(sys: &GspSystem) -> Case {
    let sym = |k: StructureKind| matches!(k, StructureKind::Symmetric | StructureKind::SymmetricToeplitz);
    if sys.bc_equal() {
        Case::C
    } else if sym(sys.struct_a().kind()) || sym(sys.struct_d().kind()) {
        Case::B
    } else {
        Case::A
    }
}

/// Structured and unstructured reports for the requested targets, using the
/// structures attached to `sys`.
pub fn compute_reports(sys: &GspSystem, case: Option<Case>, targets: &[Target]) -> Result<(CnReport, CnReport)> {
    let case = case.unwrap_or_else(|| detect_case(sys));
    let want = |t| targets.contains(&t);
    let mut s = CnReport {
        case,
        variant: Variant::Structured,
        joint: None,
        x1: None,
        x2: None,
    };
    let mut u = CnReport {
        variant: Variant::Unstructured,
        ..s.clone()
    };
    let ib = sys.inverse_blocks()?;
    let (ga, gd) = (general_structure(sys.m()), general_structure(sys.n()));
    match case {
        Case::C => {
            let mask = DataMask {
                d: sys.struct_d().kind() != StructureKind::Zero,
                ..DataMask::default()
            };
            for t in [Target::Joint, Target::X1, Target::X2] {
                if want(t) {
                    let st = bc_triple(sys, &ib, sys.struct_a(), mask, t)?;
                    let un = bc_triple(sys, &ib, &ga, mask, t)?;
                    set(&mut s, t, st);
                    set(&mut u, t, un);
                }
            }
        }
        Case::A | Case::B => {
            let plan = Plan::abd(sys, sys.struct_a(), sys.struct_d())?;
            let general = Plan::abd(sys, &ga, &gd)?;
            let dn = sys.data_norm();
            if want(Target::Joint) {
                let z = ib.z();
                set(
                    &mut s,
                    Target::Joint,
                    joint_acc(sys, &ib, &plan).finish(&z, "[x1; x2]", dn)?,
                );
                let mut un = joint_acc(sys, &ib, &general).finish(&z, "[x1; x2]", dn)?;
                let (mixed, componentwise, flags) = unstructured_mixed_componentwise_joint(sys)?;
                un.mixed = mixed;
                un.componentwise = componentwise;
                un.zero_flags = flags;
                set(&mut u, Target::Joint, un);
            }
            for (t, name) in [(Target::X1, "x1"), (Target::X2, "x2")] {
                if want(t) {
                    let x = target_vec(&ib, t);
                    set(&mut s, t, individual_acc(sys, &ib, &plan, t).finish(&x, name, dn)?);
                    set(&mut u, t, individual_acc(sys, &ib, &general, t).finish(&x, name, dn)?);
                }
            }
        }
    }
    Ok((s, u))
}

fn set(r: &mut CnReport, t: Target, v: CnTriple) {
    match t {
        Target::Joint => r.joint = Some(v),
        Target::X1 => r.x1 = Some(v),
        Target::X2 => r.x2 = Some(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::tests::jacobi_max_eig;
    use crate::random::{random_system, random_system_bc, Rng};
    use crate::structure::symmetric_structure;

    fn scalar() -> GspSystem {
        let s = |v| DenseMatrix::from_row_major(1, 1, &[v]).unwrap();
        GspSystem::new(s(2.0), s(1.0), s(1.0), s(3.0), vec![3.0], vec![4.0]).unwrap()
    }

    fn identity(m: usize, n: usize) -> GspSystem {
        GspSystem::new(
            DenseMatrix::identity(m),
            DenseMatrix::zeros(n, m),
            DenseMatrix::zeros(n, m),
            DenseMatrix::identity(n),
            (0..m).map(|i| 1.0 + i as f64).collect(),
            (0..n).map(|i| -2.0 - i as f64).collect(),
        )
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn skeel_rohn_identity_and_scalar() {
        let (mx, cw, flags) = unstructured_mixed_componentwise_joint(&identity(3, 2)).unwrap();
        assert_eq!((mx, cw), (2.0, 2.0));
        assert!(flags.is_empty());
        // |𝓜⁻¹|(|𝓜||z| + |b|) = (1/5)[[3,1],[1,2]]·([3,4] + [3,4]) = [5.2, 4.4]
        let (mx, cw, _) = unstructured_mixed_componentwise_joint(&scalar()).unwrap();
        assert!(rel(mx, 5.2) < 1e-14 && rel(cw, 5.2) < 1e-14);
    }

    #[test]
    fn structured_identity_is_two() {
        let sys = identity(3, 2);
        let (sa, sd) = (symmetric_structure(3), symmetric_structure(2));
        let j = structured_cn_joint(&sys, &sa, &sd).unwrap();
        assert_eq!((j.mixed, j.componentwise), (2.0, 2.0));
        let x1 = structured_cn_x1(&sys, &sa, &sd).unwrap();
        let x2 = structured_cn_x2(&sys, &sa, &sd).unwrap();
        assert_eq!((x1.mixed, x2.mixed), (2.0, 2.0));
    }

    #[test]
    fn scalar_individual_general() {
        // x1 numerator: |M||A||x1| + |M||B||x2| + |N||C||x1| + |N||D||x2| + |M||f| + |N||g|
        // = 0.6·2 + 0.6 + 0.2 + 0.2·3 + 0.6·3 + 0.2·4 = 5.2
        let sys = scalar();
        let (g1, g2) = (general_structure(1), general_structure(1));
        let x1 = structured_cn_x1(&sys, &g1, &g2).unwrap();
        assert!(rel(x1.mixed, 5.2) < 1e-14);
    }

    #[test]
    fn normwise_scalar_by_hand() {
        // 𝓜⁻¹[H, -I] with H = [[1,1,0,0],[0,0,1,1]] for x = (1,1)
        let sys = scalar();
        let (ga, gd) = (general_structure(1), general_structure(1));
        let j = structured_cn_joint(&sys, &ga, &gd).unwrap();
        let minv = sys.inverse_blocks().unwrap().full();
        let h = crate::gsp::sensitivity_h(&[1.0], &[1.0]).unwrap();
        let big = DenseMatrix::from_fn(2, 6, |i, k| {
            if k < 4 {
                h.get(i, k)
            } else if k - 4 == i {
                -1.0
            } else {
                0.0
            }
        });
        let gm = minv.matmul(&big);
        let oracle = jacobi_max_eig(&gm.gram_rows()).sqrt() * sys.data_norm() / 2f64.sqrt();
        assert!(rel(j.normwise, oracle) < 1e-10);
    }

    #[test]
    fn normwise_matches_dense_oracle() {
        let mut rng = Rng::new(21);
        for _ in 0..10 {
            let sys = random_system(&mut rng, 3, 2, true, true);
            let (sa, sd) = (symmetric_structure(3), symmetric_structure(2));
            let j = structured_cn_joint(&sys, &sa, &sd).unwrap();
            let ib = sys.inverse_blocks().unwrap();
            let minv = ib.full();
            let h = crate::gsp::sensitivity_h(&ib.x1, &ib.x2).unwrap();
            let m_dim = 3;
            let n_dim = 2;
            // blockdiag(Φ_A𝔇⁻¹, I_2mn, Φ_D𝔇⁻¹), then append -I
            let pa = sa.phi_dense();
            let pd = sd.phi_dense();
            let (ka, kd) = (sa.dim(), sd.dim());
            let mid = 2 * m_dim * n_dim;
            let cols = ka + mid + kd;
            let phi = DenseMatrix::from_fn(h.cols(), cols, |r, c| {
                let (ra, rb) = (m_dim * m_dim, m_dim * m_dim + mid);
                if c < ka {
                    if r < ra {
                        pa.get(r, c) / sa.scaling()[c]
                    } else {
                        0.0
                    }
                } else if c < ka + mid {
                    if r == ra + (c - ka) {
                        1.0
                    } else {
                        0.0
                    }
                } else if r >= rb {
                    pd.get(r - rb, c - ka - mid) / sd.scaling()[c - ka - mid]
                } else {
                    0.0
                }
            });
            let hp = minv.matmul(&h.matmul(&phi));
            let total = hp.gram_rows().add(&minv.gram_rows());
            let oracle = jacobi_max_eig(&total).sqrt() * sys.data_norm() / norm2(&ib.z());
            assert!(rel(j.normwise, oracle) < 1e-9, "{} vs {}", j.normwise, oracle);
        }
    }

    #[test]
    fn general_structure_collapses_to_skeel_rohn() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let m = rng.below(6) + 1;
            let n = rng.below(6) + 1;
            let sys = random_system(&mut rng, m, n, false, false);
            let j = structured_cn_joint(&sys, &general_structure(m), &general_structure(n)).unwrap();
            let (mx, cw, _) = unstructured_mixed_componentwise_joint(&sys).unwrap();
            assert!(rel(j.mixed, mx) < 1e-12);
            assert!(rel(j.componentwise, cw) < 1e-12);
        }
    }

    #[test]
    fn joint_rows_match_individual_numerators() {
        let mut rng = Rng::new(4);
        for _ in 0..20 {
            let m = rng.below(6) + 1;
            let n = rng.below(6) + 1;
            let sys = random_system(&mut rng, m, n, true, true);
            let (sa, sd) = (symmetric_structure(m), symmetric_structure(n));
            let j = mixed_numerator(&sys, &sa, &sd, Target::Joint).unwrap();
            let x1 = mixed_numerator(&sys, &sa, &sd, Target::X1).unwrap();
            let x2 = mixed_numerator(&sys, &sa, &sd, Target::X2).unwrap();
            for (a, b) in j.iter().zip(x1.iter().chain(&x2)) {
                assert!(rel(*a, *b) < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn bc_joint_rows_match_individual() {
        let mut rng = Rng::new(9);
        for _ in 0..20 {
            let m = rng.below(5) + 1;
            let n = rng.below(5) + 1;
            let sys = random_system_bc(&mut rng, m, n, true);
            let sa = symmetric_structure(m);
            let (js, ju) = cn_joint_bc(&sys, &sa).unwrap();
            let ib = sys.inverse_blocks().unwrap();
            let d = DataMask::default();
            let sd = general_structure(n);
            let plan = Plan::bc(&sys, &sa, &sd, d).unwrap();
            let jn = joint_acc(&sys, &ib, &plan).num;
            let n1 = individual_acc(&sys, &ib, &plan, Target::X1).num;
            let n2 = individual_acc(&sys, &ib, &plan, Target::X2).num;
            for (a, b) in jn.iter().zip(n1.iter().chain(&n2)) {
                assert!(rel(*a, *b) < 1e-12);
            }
            assert!(js.normwise <= ju.normwise * (1.0 + 1e-12));
        }
    }

    #[test]
    fn individual_gram_matches_joint_block() {
        // the x1 Gram is the leading block of the joint Gram
        let mut rng = Rng::new(10);
        let sys = random_system_bc(&mut rng, 3, 2, true);
        let sa = symmetric_structure(3);
        let sd = general_structure(2);
        let ib = sys.inverse_blocks().unwrap();
        let plan = Plan::bc(&sys, &sa, &sd, DataMask::default()).unwrap();
        let gj = joint_acc(&sys, &ib, &plan).gram;
        let g1 = individual_acc(&sys, &ib, &plan, Target::X1).gram;
        let g2 = individual_acc(&sys, &ib, &plan, Target::X2).gram;
        assert!(gj.block(0, 3, 0, 3).sub(&g1).max_abs() <= 1e-12 * gj.max_abs());
        assert!(gj.block(3, 5, 3, 5).sub(&g2).max_abs() <= 1e-12 * gj.max_abs());
    }

    #[test]
    fn sign_flip_is_bit_identical() {
        let mut rng = Rng::new(13);
        let sys = random_system(&mut rng, 3, 2, true, true);
        let ib = sys.inverse_blocks().unwrap();
        let minv = ib.full();
        let mut pos = Acc::new(5);
        let mut neg = Acc::new(5);
        for j in 0..5 {
            let u = minv.column(j);
            let nu: Vec<f64> = u.iter().map(|v| -v).collect();
            pos.column(u, sys.rhs()[j], 1.0);
            neg.column(&nu, sys.rhs()[j], 1.0);
        }
        assert_eq!(pos.num, neg.num);
        assert_eq!(pos.gram, neg.gram);
    }

    #[test]
    fn wrong_case_is_rejected() {
        let mut rng = Rng::new(2);
        let sys = random_system(&mut rng, 2, 2, false, false);
        assert_eq!(
            cn_joint_bc(&sys, &general_structure(2)).unwrap_err().code(),
            "wrong-case"
        );
    }

    #[test]
    fn bc_identity_is_two() {
        let sys = identity(3, 2);
        assert!(sys.bc_equal());
        let (s, u) = cn_joint_bc(&sys, &symmetric_structure(3)).unwrap();
        assert_eq!((s.mixed, u.mixed), (2.0, 2.0));
        let (s, _) = cn_individual_bc(&sys, &symmetric_structure(3), Target::X1).unwrap();
        assert_eq!(s.mixed, 2.0);
    }

    #[test]
    fn zero_solution_components_are_flagged() {
        let mut sys = identity(2, 1);
        sys = GspSystem::new(
            sys.a().clone(),
            sys.b().clone(),
            sys.c().clone(),
            sys.d().clone(),
            vec![1.0, 0.0],
            vec![3.0],
        )
        .unwrap();
        let (_, cw, flags) = unstructured_mixed_componentwise_joint(&sys).unwrap();
        assert_eq!(flags, vec![1]);
        assert!(cw.is_finite());
        let zero = GspSystem::new(
            DenseMatrix::identity(1),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::identity(1),
            vec![0.0],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(
            unstructured_mixed_componentwise_joint(&zero).unwrap_err().code(),
            "degenerate-solution"
        );
    }

    #[test]
    fn mixed_is_scale_invariant() {
        let mut rng = Rng::new(17);
        let sys = random_system(&mut rng, 4, 3, true, true);
        let scaled = GspSystem::new(
            sys.a().clone(),
            sys.b().clone(),
            sys.c().clone(),
            sys.d().clone(),
            sys.f().iter().map(|v| v * 8.0).collect(),
            sys.g().iter().map(|v| v * 8.0).collect(),
        )
        .unwrap();
        let (sa, sd) = (symmetric_structure(4), symmetric_structure(3));
        let a = structured_cn_joint(&sys, &sa, &sd).unwrap();
        let b = structured_cn_joint(&scaled, &sa, &sd).unwrap();
        assert!(rel(a.mixed, b.mixed) < 1e-12);
        assert!(rel(a.componentwise, b.componentwise) < 1e-12);
    }

    #[test]
    fn report_cases() {
        let mut rng = Rng::new(31);
        let sys = random_system(&mut rng, 3, 2, true, true);
        assert_eq!(detect_case(&sys), Case::B);
        let (s, u) = compute_reports(&sys, None, &[Target::Joint, Target::X2]).unwrap();
        assert!(s.joint.is_some() && s.x1.is_none() && u.x2.is_some());
        assert!(s.joint.as_ref().unwrap().mixed <= u.joint.as_ref().unwrap().mixed * (1.0 + 1e-12));
        let bc = random_system_bc(&mut rng, 3, 2, true);
        assert_eq!(detect_case(&bc), Case::C);
        let (s, _) = compute_reports(&bc, None, &[Target::X1]).unwrap();
        assert_eq!(s.case, Case::C);
    }
}
