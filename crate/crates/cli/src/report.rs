//! Report assembly and its JSON / CSV renderings.

use std::io;

use gspcond::condnum::{compute_reports, detect_case};
use gspcond::lsq::{build_wls_augmented, wls_cn_x2};
use gspcond::verify::{
    bound_audit, fd_derivative_check, random_direction, AuditReport, DecayReport, FD_LADDER, FD_SLOPE_WINDOW,
};
use gspcond::{Case, CnTriple, GspSystem, StructureKind, Target, Variant};
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{CliError, CliResult};
use crate::manifest::{Problem, ProblemKind};

pub const CSV_HEADER: [&str; 7] = [
    "case",
    "target",
    "variant",
    "normwise",
    "mixed",
    "componentwise",
    "flags",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    pub samples: usize,
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub targets: Vec<Target>,
    /// Forces a case instead of detecting it from the system.
    pub case: Option<Case>,
    pub audit: Option<AuditOptions>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            targets: vec![Target::Joint, Target::X1, Target::X2],
            case: None,
            audit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub target: Target,
    pub variant: Variant,
    /// Absent for least-squares problems.
    pub normwise: Option<f64>,
    pub mixed: f64,
    pub componentwise: f64,
    pub zero_flags: Vec<usize>,
}

impl ResultRow {
    fn from_triple(target: Target, variant: Variant, t: &CnTriple) -> Self {
        ResultRow {
            target,
            variant,
            normwise: Some(t.normwise),
            mixed: t.mixed,
            componentwise: t.componentwise,
            zero_flags: t.zero_flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub source: String,
    pub problem: ProblemKind,
    /// `a`, `b`, `c`, or `wls`.
    pub case: String,
    pub m: usize,
    pub n: usize,
    pub notes: Vec<String>,
    pub results: Vec<ResultRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
}

impl Report {
    /// False only when an audit ran and found a violation.
    pub fn passed(&self) -> bool {
        self.audit.as_ref().is_none_or(AuditReport::passed)
    }

    pub fn row(&self, target: Target, variant: Variant) -> Option<&ResultRow> {
        self.results.iter().find(|r| r.target == target && r.variant == variant)
    }
}

pub fn run_report(problem: &Problem, source: &str, opts: &ReportOptions) -> CliResult<Report> {
    if opts.targets.is_empty() {
        return Err(CliError::Argument("no targets requested".into()));
    }
    match problem {
        Problem::Gsp(sys) => gsp_report(sys, source, opts),
        Problem::Wls(p) => {
            if opts.targets.iter().any(|t| *t != Target::X2) {
                return Err(CliError::Argument(
                    "least-squares problems only report target x2 (the solution y)".into(),
                ));
            }
            if opts.case.is_some_and(|c| c != Case::C) {
                return Err(CliError::Argument("least-squares problems are always case c".into()));
            }
            let (mixed, componentwise, zero_flags) = wls_cn_x2(p)?;
            let audit = match &opts.audit {
                Some(a) => Some(bound_audit(
                    &build_wls_augmented(p)?,
                    Some(Case::C),
                    a.eps,
                    a.samples,
                    a.seed,
                )?),
                None => None,
            };
            let mut notes = vec![
                "x2 is the least-squares solution y; perturbations act on B and f".to_string(),
                "mixed uses the infinity norm of y; componentwise divides by |y| with zero entries mapped to 1".into(),
            ];
            if !zero_flags.is_empty() {
                notes.push(format!("y has zero entries at {zero_flags:?}"));
            }
            Ok(Report {
                source: source.into(),
                problem: ProblemKind::Wls,
                case: "wls".into(),
                m: p.m(),
                n: p.n(),
                notes,
                results: vec![ResultRow {
                    target: Target::X2,
                    variant: Variant::Structured,
                    normwise: None,
                    mixed,
                    componentwise,
                    zero_flags,
                }],
                audit,
            })
        }
    }
}

fn gsp_report(sys: &GspSystem, source: &str, opts: &ReportOptions) -> CliResult<Report> {
    let case = opts.case.unwrap_or_else(|| detect_case(sys));
    let (s, u) = compute_reports(sys, Some(case), &opts.targets)?;
    let mut results = Vec::new();
    for &t in &opts.targets {
        for (variant, r) in [(Variant::Structured, &s), (Variant::Unstructured, &u)] {
            if let Some(triple) = r.get(t) {
                results.push(ResultRow::from_triple(t, variant, triple));
            }
        }
    }
    let mut notes = Vec::new();
    if case == Case::C {
        notes.push("normwise data norm is the Frobenius norm of [A, B, D, f, g]; C moves with B".to_string());
        if sys.struct_d().kind() == StructureKind::Zero {
            notes.push("D is fixed at zero and not perturbed".into());
        }
    } else {
        notes.push("normwise data norm is the Frobenius norm of [A, B, C, D, f, g]".to_string());
        if opts.targets.contains(&Target::Joint) {
            notes.push("unstructured joint mixed and componentwise use |M^-1|(|M||z| + |b|)".into());
        }
    }
    notes.push(format!(
        "structures: A {}, D {}",
        sys.struct_a().kind(),
        sys.struct_d().kind()
    ));
    notes.push(
        "normwise uses the 2-norm of the target, mixed its infinity norm; componentwise maps zero entries to 1".into(),
    );
    for row in results
        .iter()
        .filter(|r| !r.zero_flags.is_empty() && r.variant == Variant::Structured)
    {
        notes.push(format!("{} has zero entries at {:?}", row.target, row.zero_flags));
    }
    let audit = match &opts.audit {
        Some(a) => Some(bound_audit(sys, Some(case), a.eps, a.samples, a.seed)?),
        None => None,
    };
    Ok(Report {
        source: source.into(),
        problem: ProblemKind::Gsp,
        case: case.to_string(),
        m: sys.m(),
        n: sys.n(),
        notes,
        results,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub source: String,
    pub seed: u64,
    pub slope_window: (f64, f64),
    pub decay: DecayReport,
    pub passed: bool,
}

/// Finite-difference check of the first-order expansion along a seeded
/// random direction.
pub fn run_verify(problem: &Problem, source: &str, seed: u64) -> CliResult<VerifyReport> {
    let sys = match problem {
        Problem::Gsp(s) => s.clone(),
        Problem::Wls(p) => build_wls_augmented(p)?,
    };
    let dir = random_direction(&sys, seed)?;
    let decay = fd_derivative_check(&sys, &dir, &FD_LADDER)?;
    let (lo, hi) = FD_SLOPE_WINDOW;
    let passed = decay.exact_linear || decay.slope.is_some_and(|s| (lo..=hi).contains(&s));
    Ok(VerifyReport {
        source: source.into(),
        seed,
        slope_window: FD_SLOPE_WINDOW,
        decay,
        passed,
    })
}

/// Pretty JSON writer printing every float with 17 significant digits.
struct Sig17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Output(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::Output(e.to_string()))
}

/// Five significant digits in scientific notation with a signed two-digit
/// exponent, e.g. `1.8375e+05`.
pub fn sci5(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

pub fn to_csv(report: &Report) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let out = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(CSV_HEADER).map_err(out)?;
    for r in &report.results {
        let flags: Vec<String> = r.zero_flags.iter().map(usize::to_string).collect();
        w.write_record([
            report.case.clone(),
            r.target.to_string(),
            r.variant.to_string(),
            r.normwise.map(sci5).unwrap_or_default(),
            sci5(r.mixed),
            sci5(r.componentwise),
            flags.join(";"),
        ])
        .map_err(out)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}
