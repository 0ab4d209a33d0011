//! Structure-preserving Monte-Carlo perturbations, the audit of first-order
//! bounds `error ≤ ε_eff · CN`, and a finite-difference check of the
//! first-order expansion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condnum::{self, Case, CnTriple, Target};
use crate::error::{Error, Result};
use crate::gsp::{sensitivity_h, sensitivity_r, GspSystem};
use crate::matkit::{self, comp_divide, norm2, norm_inf, DenseMatrix};
use crate::random::{derive_seed, keyed_normal};
use crate::structure::{LinearStructure, StructureKind};

pub const AUDIT_SLACK: f64 = 1e-2;
pub const AUDIT_ATOL: f64 = 1e-12;
pub const FD_LADDER: [f64; 3] = [1e-5, 1e-6, 1e-7];
pub const FD_SLOPE_WINDOW: (f64, f64) = (1.7, 2.3);

const BLOCK_A: u64 = 0;
const BLOCK_B: u64 = 1;
const BLOCK_C: u64 = 2;
const BLOCK_D: u64 = 3;
const BLOCK_F: u64 = 4;
const BLOCK_G: u64 = 5;

/// Perturbations of every data block.
#[derive(Debug, Clone, PartialEq)]
pub struct Deltas {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub d: DenseMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl Deltas {
    pub fn zero(sys: &GspSystem) -> Self {
        let (m, n) = (sys.m(), sys.n());
        Deltas {
            a: DenseMatrix::zeros(m, m),
            b: DenseMatrix::zeros(n, m),
            c: DenseMatrix::zeros(n, m),
            d: DenseMatrix::zeros(n, n),
            f: vec![0.0; m],
            g: vec![0.0; n],
        }
    }

    fn matrix_part_is_zero(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d].iter().all(|x| x.max_abs() == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSample {
    pub epsilon: f64,
    pub seed: u64,
    /// `ε · max |factor|`, the componentwise level actually realized.
    pub eps_eff: f64,
    pub deltas: Deltas,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorTriple {
    pub relk: f64,
    pub relm: f64,
    pub relc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub joint: ErrorTriple,
    pub x1: ErrorTriple,
    pub x2: ErrorTriple,
}

impl RelativeErrors {
    pub fn get(&self, t: Target) -> ErrorTriple {
        match t {
            Target::Joint => self.joint,
            Target::X1 => self.x1,
            Target::X2 => self.x2,
        }
    }
}

/// Entrywise factors `ξ` applied to the generators of a structured block.
fn structured_delta(
    block: &DenseMatrix,
    s: &LinearStructure,
    eps: f64,
    seed: u64,
    id: u64,
    max_factor: &mut f64,
) -> Result<DenseMatrix> {
    if s.kind() == StructureKind::Zero {
        return Ok(DenseMatrix::zeros(block.rows(), block.cols()));
    }
    let gen = s.generator(block)?;
    let dgen: Vec<f64> = gen
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let xi = keyed_normal(seed, id, k as u64);
            *max_factor = max_factor.max(xi.abs());
            eps * xi * a
        })
        .collect();
    s.reconstruct(&dgen)
}

fn entry_delta(block: &DenseMatrix, eps: f64, seed: u64, id: u64, max_factor: &mut f64) -> DenseMatrix {
    let data: Vec<f64> = block
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let xi = keyed_normal(seed, id, k as u64);
            *max_factor = max_factor.max(xi.abs());
            eps * xi * v
        })
        .collect();
    DenseMatrix::from_col_major(block.rows(), block.cols(), data).expect("finite perturbation")
}

fn vec_delta(v: &[f64], eps: f64, seed: u64, id: u64, max_factor: &mut f64) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(k, &x)| {
            let xi = keyed_normal(seed, id, k as u64);
            *max_factor = max_factor.max(xi.abs());
            eps * xi * x
        })
        .collect()
}

/// `Δ = ε · ξ ⊙ entry` per perturbation coordinate, with `ξ` keyed by
/// `(seed, block, index)`. Structured blocks draw one factor per generator,
/// zero-structure blocks stay untouched and `ΔC = ΔB` when `B = C`.
pub fn sample_perturbation(sys: &GspSystem, eps: f64, seed: u64) -> Result<PerturbationSample> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be finite and non-negative, got {eps}"
        )));
    }
    let mut mf = 0.0_f64;
    let a = structured_delta(sys.a(), sys.struct_a(), eps, seed, BLOCK_A, &mut mf)?;
    let b = entry_delta(sys.b(), eps, seed, BLOCK_B, &mut mf);
    let c = if sys.bc_equal() {
        b.clone()
    } else {
        entry_delta(sys.c(), eps, seed, BLOCK_C, &mut mf)
    };
    let d = structured_delta(sys.d(), sys.struct_d(), eps, seed, BLOCK_D, &mut mf)?;
    let f = vec_delta(sys.f(), eps, seed, BLOCK_F, &mut mf);
    let g = vec_delta(sys.g(), eps, seed, BLOCK_G, &mut mf);
    let sample = PerturbationSample {
        epsilon: eps,
        seed,
        eps_eff: eps * mf,
        deltas: Deltas { a, b, c, d, f, g },
    };
    // singular perturbed systems are reported here rather than at use
    perturbed_system(sys, &sample.deltas)?
        .solve()
        .map_err(|_| Error::PerturbedSingular { seed })?;
    Ok(sample)
}

fn perturbed_system(sys: &GspSystem, d: &Deltas) -> Result<GspSystem> {
    GspSystem::new(
        sys.a().add(&d.a),
        sys.b().add(&d.b),
        sys.c().add(&d.c),
        sys.d().add(&d.d),
        sys.f().iter().zip(&d.f).map(|(x, y)| x + y).collect(),
        sys.g().iter().zip(&d.g).map(|(x, y)| x + y).collect(),
    )
}

/// `z̃ − z`, solved as `(𝓜 + Δ𝓜)(z̃ − z) = Δb − Δ𝓜 z` to avoid cancellation.
pub fn solution_change(sys: &GspSystem, z: &[f64], d: &Deltas) -> Result<Vec<f64>> {
    let (m, _) = (sys.m(), sys.n());
    let (x1, x2) = z.split_at(m);
    let top: Vec<f64> =
        d.a.matvec(x1)
            .iter()
            .zip(d.b.matvec_t(x2))
            .map(|(p, q)| p + q)
            .collect();
    let bot: Vec<f64> = d.c.matvec(x1).iter().zip(d.d.matvec(x2)).map(|(p, q)| p + q).collect();
    let rhs_f: Vec<f64> = d.f.iter().zip(&top).map(|(p, q)| p - q).collect();
    let rhs_g: Vec<f64> = d.g.iter().zip(&bot).map(|(p, q)| p - q).collect();
    let pert = perturbed_system(sys, d)?;
    GspSystem::new(
        pert.a().clone(),
        pert.b().clone(),
        pert.c().clone(),
        pert.d().clone(),
        rhs_f,
        rhs_g,
    )?
    .solve()
}

fn error_triple(dz: &[f64], z: &[f64]) -> ErrorTriple {
    let (ratio, _) = comp_divide(dz, z);
    let ratio_abs: Vec<f64> = ratio.iter().map(|v| v.abs()).collect();
    let safe = |num: f64, den: f64| {
        if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        }
    };
    ErrorTriple {
        relk: safe(norm2(dz), norm2(z)),
        relm: safe(norm_inf(dz), norm_inf(z)),
        relc: norm_inf(&ratio_abs),
    }
}

/// Normwise (`relk`), mixed (`relm`) and componentwise (`relc`) errors of the
/// perturbed solution for the joint solution and for each block.
pub fn relative_errors(sys: &GspSystem, sample: &PerturbationSample) -> Result<RelativeErrors> {
    let z = sys.solve()?;
    errors_from(sys, &z, &sample.deltas)
}

fn errors_from(sys: &GspSystem, z: &[f64], d: &Deltas) -> Result<RelativeErrors> {
    let dz = solution_change(sys, z, d)?;
    let m = sys.m();
    Ok(RelativeErrors {
        joint: error_triple(&dz, z),
        x1: error_triple(&dz[..m], &z[..m]),
        x2: error_triple(&dz[m..], &z[m..]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Normwise,
    Mixed,
    Componentwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: usize,
    pub seed: u64,
    pub target: Target,
    pub measure: Measure,
    pub error: f64,
    pub bound: f64,
}

/// Largest observed `error / (ε_eff · CN)` per measure.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatioTriple {
    pub normwise: f64,
    pub mixed: f64,
    pub componentwise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAudit {
    pub target: Target,
    pub structured: CnTriple,
    pub unstructured: CnTriple,
    pub max_ratio_structured: RatioTriple,
    pub max_ratio_unstructured: RatioTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub case: Case,
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub slack: f64,
    pub atol: f64,
    pub targets: Vec<TargetAudit>,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn target(&self, t: Target) -> Option<&TargetAudit> {
        self.targets.iter().find(|a| a.target == t)
    }
}

/// Draws `n_samples` perturbations and checks every first-order bound
/// against the structured CNs of the system's attached structures.
/// Targets whose solution block vanishes are skipped.
pub fn bound_audit(sys: &GspSystem, case: Option<Case>, eps: f64, n_samples: usize, seed: u64) -> Result<AuditReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let case = case.unwrap_or_else(|| condnum::detect_case(sys));
    let mut cns = Vec::new();
    for t in [Target::Joint, Target::X1, Target::X2] {
        match condnum::compute_reports(sys, Some(case), &[t]) {
            Ok((s, u)) => cns.push((t, s.get(t).cloned().unwrap(), u.get(t).cloned().unwrap())),
            Err(Error::DegenerateSolution(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let z = sys.solve()?;

    let results: Vec<Result<(u64, f64, RelativeErrors)>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let sample = sample_perturbation(sys, eps, s)?;
            let errs = errors_from(sys, &z, &sample.deltas)?;
            Ok((s, sample.eps_eff, errs))
        })
        .collect();

    let mut violations = Vec::new();
    let mut targets: Vec<TargetAudit> = cns
        .iter()
        .map(|(t, s, u)| TargetAudit {
            target: *t,
            structured: s.clone(),
            unstructured: u.clone(),
            max_ratio_structured: RatioTriple::default(),
            max_ratio_unstructured: RatioTriple::default(),
        })
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        let (s, eps_eff, errs) = r?;
        for ta in targets.iter_mut() {
            let e = errs.get(ta.target);
            let checks = [
                (
                    Measure::Normwise,
                    e.relk,
                    ta.structured.normwise,
                    ta.unstructured.normwise,
                ),
                (Measure::Mixed, e.relm, ta.structured.mixed, ta.unstructured.mixed),
                (
                    Measure::Componentwise,
                    e.relc,
                    ta.structured.componentwise,
                    ta.unstructured.componentwise,
                ),
            ];
            for (measure, err, cs, cu) in checks {
                let bound = eps_eff * cs * (1.0 + AUDIT_SLACK) + AUDIT_ATOL;
                if err > bound || !err.is_finite() {
                    violations.push(Violation {
                        sample: i,
                        seed: s,
                        target: ta.target,
                        measure,
                        error: err,
                        bound,
                    });
                }
                let ratio = |cn: f64| if eps_eff * cn > 0.0 { err / (eps_eff * cn) } else { 0.0 };
                let (rs, ru) = match measure {
                    Measure::Normwise => (
                        &mut ta.max_ratio_structured.normwise,
                        &mut ta.max_ratio_unstructured.normwise,
                    ),
                    Measure::Mixed => (&mut ta.max_ratio_structured.mixed, &mut ta.max_ratio_unstructured.mixed),
                    Measure::Componentwise => (
                        &mut ta.max_ratio_structured.componentwise,
                        &mut ta.max_ratio_unstructured.componentwise,
                    ),
                };
                *rs = rs.max(ratio(cs));
                *ru = ru.max(ratio(cu));
            }
        }
    }
    Ok(AuditReport {
        case,
        epsilon: eps,
        n_samples,
        seed,
        slack: AUDIT_SLACK,
        atol: AUDIT_ATOL,
        targets,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub epsilons: Vec<f64>,
    /// `‖Δz(ε) − ε·Δz'‖₂` per ladder point.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log ε`; absent when the
    /// direction leaves `𝓜` unchanged and the expansion is exact.
    pub slope: Option<f64>,
    pub exact_linear: bool,
}

/// Random unit-scale direction honouring the attached structures.
pub fn random_direction(sys: &GspSystem, seed: u64) -> Result<Deltas> {
    let n01 = |id: u64, k: usize| keyed_normal(seed, id, k as u64);
    let structured = |s: &LinearStructure, id: u64| -> Result<DenseMatrix> {
        let dg: Vec<f64> = (0..s.dim()).map(|k| n01(id, k)).collect();
        s.reconstruct(&dg)
    };
    let dense = |r: usize, c: usize, id: u64| DenseMatrix::from_fn(r, c, |i, j| n01(id, i + j * r));
    let (m, n) = (sys.m(), sys.n());
    let b = dense(n, m, BLOCK_B);
    let c = if sys.bc_equal() {
        b.clone()
    } else {
        dense(n, m, BLOCK_C)
    };
    Ok(Deltas {
        a: structured(sys.struct_a(), BLOCK_A)?,
        b,
        c,
        d: structured(sys.struct_d(), BLOCK_D)?,
        f: (0..m).map(|k| n01(BLOCK_F, k)).collect(),
        g: (0..n).map(|k| n01(BLOCK_G, k)).collect(),
    })
}

fn scaled(d: &Deltas, eps: f64) -> Deltas {
    Deltas {
        a: d.a.scale(eps),
        b: d.b.scale(eps),
        c: d.c.scale(eps),
        d: d.d.scale(eps),
        f: d.f.iter().map(|v| v * eps).collect(),
        g: d.g.iter().map(|v| v * eps).collect(),
    }
}

/// Compares the actual solution change along `dir` with the first-order
/// prediction `𝓜⁻¹(Δb − H·[vec ΔA; vec ΔB; vec ΔC; vec ΔD])` (or the `R`
/// form when `B = C`) over the ladder and checks quadratic decay.
pub fn fd_derivative_check(sys: &GspSystem, dir: &Deltas, ladder: &[f64]) -> Result<DecayReport> {
    let ib = sys.inverse_blocks()?;
    let z = ib.z();
    let stack: Vec<f64> = if sys.bc_equal() && dir.b == dir.c {
        [&dir.a, &dir.b, &dir.d].iter().flat_map(|x| matkit::vec(x)).collect()
    } else {
        [&dir.a, &dir.b, &dir.c, &dir.d]
            .iter()
            .flat_map(|x| matkit::vec(x))
            .collect()
    };
    let h = if sys.bc_equal() && dir.b == dir.c {
        sensitivity_r(&ib.x1, &ib.x2)?
    } else {
        sensitivity_h(&ib.x1, &ib.x2)?
    };
    let hv = h.matvec(&stack);
    let rhs: Vec<f64> = dir.f.iter().chain(&dir.g).zip(&hv).map(|(b, v)| b - v).collect();
    let pred = ib.full().matvec(&rhs);

    let mut errors = Vec::with_capacity(ladder.len());
    let mut pred_norms = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let dz = solution_change(sys, &z, &scaled(dir, eps))?;
        let diff: Vec<f64> = dz.iter().zip(&pred).map(|(a, p)| a - eps * p).collect();
        errors.push(norm2(&diff));
        pred_norms.push(eps * norm2(&pred));
    }
    let exact_linear = dir.matrix_part_is_zero();
    let at_rounding = errors
        .iter()
        .zip(&pred_norms)
        .all(|(e, p)| *e <= 1e-13 * p.max(f64::MIN_POSITIVE) || *e == 0.0);
    if exact_linear || at_rounding {
        return Ok(DecayReport {
            epsilons: ladder.to_vec(),
            errors,
            slope: None,
            exact_linear: true,
        });
    }
    let xs: Vec<f64> = ladder.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let (lo, hi) = FD_SLOPE_WINDOW;
    if !(lo..=hi).contains(&slope) {
        return Err(Error::DerivativeCheck { slope, lo, hi });
    }
    Ok(DecayReport {
        epsilons: ladder.to_vec(),
        errors,
        slope: Some(slope),
        exact_linear: false,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
