//! JSON problem manifests.
//!
//! ```json
//! {
//!   "kind": "gsp",
//!   "m": 2, "n": 1,
//!   "A": { "structure": "symmetric", "data": [[2, 1], [1, 3]] },
//!   "B": { "path": "b.mtx" },
//!   "D": { "structure": "zero" },
//!   "f": [1, 2], "g": [0],
//!   "bc_equal": true
//! }
//! ```
//!
//! Blocks are given either inline as row-major `data` or as a Matrix Market
//! `path` relative to the manifest. `C` may be omitted when `bc_equal` is
//! true. Structure tags on `A` and `D` are `general`, `symmetric`,
//! `toeplitz`, `symmetric-toeplitz` or `zero`; a `zero` block may omit its
//! data. Toeplitz generators run from the bottom-left diagonal to the
//! top-right one. `B` and `C` are always general.
//!
//! A `wls` manifest has `B` (`n × m`), `f` (length `m`) and an optional
//! weight `W`, either a block or the string `"identity"` (the default).

use std::fs;
use std::path::{Path, PathBuf};

use gspcond::structure::general_structure;
use gspcond::{DenseMatrix, GspSystem, StructureKind, WlsProblem};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::mtx::read_matrix_market;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Gsp,
    Wls,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Block(BlockSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<BlockSpec>,
    #[serde(rename = "B")]
    pub b: BlockSpec,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<BlockSpec>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<BlockSpec>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<WeightSpec>,
    pub f: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc_equal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Problem {
    Gsp(GspSystem),
    Wls(WlsProblem),
}

impl Problem {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Problem::Gsp(_) => ProblemKind::Gsp,
            Problem::Wls(_) => ProblemKind::Wls,
        }
    }
}

pub fn load_manifest(path: &Path) -> CliResult<Problem> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, path, base)
}

/// Parses and validates manifest `text`; block paths resolve against `base`.
pub fn parse_manifest(text: &str, origin: &Path, base: &Path) -> CliResult<Problem> {
    let manifest: Manifest = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build_problem(&manifest, base)
}

pub fn build_problem(mf: &Manifest, base: &Path) -> CliResult<Problem> {
    let (m, n) = (mf.m, mf.n);
    match mf.kind {
        ProblemKind::Gsp => {
            if mf.w.is_some() {
                return Err(CliError::Manifest("W only applies to wls manifests".into()));
            }
            let a_spec =
                mf.a.as_ref()
                    .ok_or_else(|| CliError::Manifest("block A is required".into()))?;
            let d_spec =
                mf.d.as_ref()
                    .ok_or_else(|| CliError::Manifest("block D is required".into()))?;
            let g =
                mf.g.clone()
                    .ok_or_else(|| CliError::Manifest("right-hand side g is required".into()))?;
            let (a, ka) = resolve("A", a_spec, m, m, base, true)?;
            let (b, _) = resolve("B", &mf.b, n, m, base, false)?;
            let c = match &mf.c {
                Some(spec) => resolve("C", spec, n, m, base, false)?.0,
                None if mf.bc_equal == Some(true) => b.clone(),
                None => return Err(CliError::Manifest("block C is required unless bc_equal is true".into())),
            };
            let (d, kd) = resolve("D", d_spec, n, n, base, true)?;
            check_len("f", &mf.f, m)?;
            check_len("g", &g, n)?;
            let mut sys = GspSystem::new(a, b, c, d, mf.f.clone(), g)?;
            let block = |name: &str| {
                let name = name.to_string();
                move |source| CliError::Block { block: name, source }
            };
            sys = sys
                .with_structures(ka.build(m)?, general_structure(n))
                .map_err(block("A"))?;
            sys = sys.with_structures(ka.build(m)?, kd.build(n)?).map_err(block("D"))?;
            if let Some(on) = mf.bc_equal {
                sys.set_bc_equal(on)?;
            }
            Ok(Problem::Gsp(sys))
        }
        ProblemKind::Wls => {
            if mf.a.is_some() || mf.c.is_some() || mf.d.is_some() || mf.g.is_some() || mf.bc_equal.is_some() {
                return Err(CliError::Manifest("wls manifests take only B, W and f".into()));
            }
            let (b, _) = resolve("B", &mf.b, n, m, base, false)?;
            let w = match &mf.w {
                None => DenseMatrix::identity(m),
                Some(WeightSpec::Named(s)) if s == "identity" => DenseMatrix::identity(m),
                Some(WeightSpec::Named(s)) => {
                    return Err(CliError::Manifest(format!(
                        "W must be a block or \"identity\", got \"{s}\""
                    )))
                }
                Some(WeightSpec::Block(spec)) => resolve("W", spec, m, m, base, false)?.0,
            };
            check_len("f", &mf.f, m)?;
            let p = WlsProblem::new(b, w, mf.f.clone()).map_err(|source| CliError::Block {
                block: "W".into(),
                source,
            })?;
            Ok(Problem::Wls(p))
        }
    }
}

fn check_len(name: &str, v: &[f64], len: usize) -> CliResult<()> {
    if v.len() != len {
        return Err(CliError::Dimension {
            block: name.into(),
            expected: format!("length {len}"),
            found: format!("length {}", v.len()),
        });
    }
    Ok(())
}

fn resolve(
    name: &str,
    spec: &BlockSpec,
    rows: usize,
    cols: usize,
    base: &Path,
    structured: bool,
) -> CliResult<(DenseMatrix, StructureKind)> {
    let kind = match spec.structure.as_deref() {
        None => StructureKind::General,
        Some(tag) => tag.parse::<StructureKind>().map_err(|_| CliError::UnknownStructure {
            block: name.into(),
            tag: tag.into(),
        })?,
    };
    if !structured && kind != StructureKind::General {
        return Err(CliError::Manifest(format!(
            "block {name} only accepts the general structure"
        )));
    }
    let dims = |r: usize, c: usize| CliError::Dimension {
        block: name.into(),
        expected: format!("{rows}x{cols}"),
        found: format!("{r}x{c}"),
    };
    let mat = match (&spec.data, &spec.path) {
        (Some(_), Some(_)) => return Err(CliError::Manifest(format!("block {name} has both data and path"))),
        (Some(data), None) => {
            if data.len() != rows {
                return Err(dims(data.len(), data.first().map_or(0, Vec::len)));
            }
            if let Some(bad) = data.iter().find(|r| r.len() != cols) {
                return Err(dims(rows, bad.len()));
            }
            DenseMatrix::from_rows(data).map_err(|source| CliError::Block {
                block: name.into(),
                source,
            })?
        }
        (None, Some(p)) => {
            let mat = read_matrix_market(&base.join(p))?;
            if (mat.rows(), mat.cols()) != (rows, cols) {
                return Err(dims(mat.rows(), mat.cols()));
            }
            mat
        }
        (None, None) if kind == StructureKind::Zero => DenseMatrix::zeros(rows, cols),
        (None, None) => return Err(CliError::Manifest(format!("block {name} needs data or path"))),
    };
    Ok((mat, kind))
}

fn inline(m: &DenseMatrix, kind: StructureKind) -> BlockSpec {
    let zero = kind == StructureKind::Zero;
    BlockSpec {
        structure: (kind != StructureKind::General).then(|| kind.to_string()),
        data: (!zero).then(|| m.to_rows()),
        path: None,
    }
}

/// Inline manifest describing `problem`.
pub fn to_manifest(problem: &Problem) -> Manifest {
    match problem {
        Problem::Gsp(s) => Manifest {
            kind: ProblemKind::Gsp,
            m: s.m(),
            n: s.n(),
            a: Some(inline(s.a(), s.struct_a().kind())),
            b: inline(s.b(), StructureKind::General),
            c: Some(inline(s.c(), StructureKind::General)),
            d: Some(inline(s.d(), s.struct_d().kind())),
            w: None,
            f: s.f().to_vec(),
            g: Some(s.g().to_vec()),
            bc_equal: Some(s.bc_equal()),
        },
        Problem::Wls(p) => {
            let w = if p.w() == &DenseMatrix::identity(p.m()) {
                WeightSpec::Named("identity".into())
            } else {
                WeightSpec::Block(inline(p.w(), StructureKind::General))
            };
            Manifest {
                kind: ProblemKind::Wls,
                m: p.m(),
                n: p.n(),
                a: None,
                b: inline(p.b(), StructureKind::General),
                c: None,
                d: None,
                w: Some(w),
                f: p.f().to_vec(),
                g: None,
                bc_equal: None,
            }
        }
    }
}

pub fn save_manifest(problem: &Problem) -> String {
    let mut s = serde_json::to_string_pretty(&to_manifest(problem)).expect("manifest serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<Problem> {
        parse_manifest(text, Path::new("test.json"), Path::new("."))
    }

    const SCALAR: &str = r#"{"kind":"gsp","m":1,"n":1,
        "A":{"data":[[2]]},"B":{"data":[[1]]},"C":{"data":[[1]]},"D":{"data":[[3]]},
        "f":[3],"g":[4]}"#;

    #[test]
    fn scalar_manifest() {
        let Problem::Gsp(s) = parse(SCALAR).unwrap() else {
            panic!()
        };
        assert_eq!((s.a().get(0, 0), s.d().get(0, 0)), (2.0, 3.0));
        assert!(s.bc_equal());
        assert_eq!(s.solve().unwrap().len(), 2);
    }

    #[test]
    fn omitted_c_copies_b() {
        let text = r#"{"kind":"gsp","m":2,"n":1,"A":{"data":[[2,0],[0,2]]},"B":{"data":[[1,5]]},
            "D":{"structure":"zero"},"f":[1,2],"g":[0],"bc_equal":true}"#;
        let Problem::Gsp(s) = parse(text).unwrap() else {
            panic!()
        };
        assert_eq!(s.c(), s.b());
        assert_eq!(s.struct_d().kind(), StructureKind::Zero);
        assert_eq!(s.d(), &DenseMatrix::zeros(1, 1));
    }

    #[test]
    fn missing_c_without_flag() {
        let text = r#"{"kind":"gsp","m":1,"n":1,"A":{"data":[[2]]},"B":{"data":[[1]]},
            "D":{"data":[[3]]},"f":[3],"g":[4]}"#;
        assert_eq!(parse(text).unwrap_err().code(), "invalid-manifest");
    }

    #[test]
    fn symmetric_violation_names_entry() {
        let text = r#"{"kind":"gsp","m":2,"n":1,"A":{"structure":"symmetric","data":[[2,1],[4,2]]},
            "B":{"data":[[1,0]]},"C":{"data":[[0,1]]},"D":{"data":[[3]]},"f":[1,1],"g":[1]}"#;
        let e = parse(text).unwrap_err();
        assert_eq!(e.code(), "structure-membership");
        let msg = e.to_string();
        assert!(
            msg.contains("block A") && (msg.contains("(0, 1)") || msg.contains("(1, 0)")),
            "{msg}"
        );
    }

    #[test]
    fn distinct_diagnostics() {
        let e = parse("{\"kind\": \"gsp\",\n \"m\": }").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 2, .. }), "{e}");
        let bad_dims = SCALAR.replace(r#""D":{"data":[[3]]}"#, r#""D":{"data":[[3,1]]}"#);
        assert_eq!(parse(&bad_dims).unwrap_err().code(), "dimension-mismatch");
        let bad_tag = SCALAR.replace(r#""A":{"data":[[2]]}"#, r#""A":{"structure":"hankel","data":[[2]]}"#);
        let e = parse(&bad_tag).unwrap_err();
        assert_eq!(e.code(), "unknown-structure");
        assert!(e.to_string().contains("hankel"));
        let bad_f = SCALAR.replace(r#""f":[3]"#, r#""f":[3,1]"#);
        assert_eq!(parse(&bad_f).unwrap_err().code(), "dimension-mismatch");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = DenseMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![1.0 / 3.0, 1e-300]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![std::f64::consts::PI, -0.0]]).unwrap();
        let sys = GspSystem::new(
            a,
            b.clone(),
            b.scale(0.7),
            DenseMatrix::zeros(1, 1),
            vec![1.1, 2.2],
            vec![-3.3],
        )
        .unwrap()
        .with_structure_kinds(StructureKind::Symmetric, StructureKind::Zero)
        .unwrap();
        let p = Problem::Gsp(sys);
        let back = parse(&save_manifest(&p)).unwrap();
        assert_eq!(back, p);

        let w = DenseMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let wls = Problem::Wls(WlsProblem::new(b, w, vec![0.3, 0.9]).unwrap());
        assert_eq!(parse(&save_manifest(&wls)).unwrap(), wls);
    }

    #[test]
    fn wls_identity_weight() {
        let text = r#"{"kind":"wls","m":2,"n":2,"B":{"data":[[1,0],[0,1]]},"W":"identity","f":[1,2]}"#;
        let Problem::Wls(p) = parse(text).unwrap() else {
            panic!()
        };
        assert_eq!(p.w(), &DenseMatrix::identity(2));
        let bad = text.replace("\"identity\"", "\"diag\"");
        assert_eq!(parse(&bad).unwrap_err().code(), "invalid-manifest");
    }

    #[test]
    fn matrix_market_block() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("a.mtx"),
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n2 1 1\n2 2 3\n",
        )
        .unwrap();
        let text = r#"{"kind":"gsp","m":2,"n":1,"A":{"structure":"symmetric","path":"a.mtx"},
            "B":{"data":[[1,2]]},"D":{"data":[[0.5]]},"f":[1,1],"g":[1],"bc_equal":true}"#;
        let mpath = dir.path().join("m.json");
        fs::write(&mpath, text).unwrap();
        let Problem::Gsp(s) = load_manifest(&mpath).unwrap() else {
            panic!()
        };
        assert_eq!(s.a().to_rows(), vec![vec![4.0, 1.0], vec![1.0, 3.0]]);
    }
}
