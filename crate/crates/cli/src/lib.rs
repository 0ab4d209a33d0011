//! Front end for the `gspcond` command: manifests, Matrix Market blocks,
//! built-in examples and report rendering.

pub mod error;
pub mod examples;
pub mod manifest;
pub mod mtx;
pub mod report;

use std::path::PathBuf;

use gspcond::{GspSystem, StructureKind};

pub use error::{CliError, CliResult};
pub use examples::{generate_example, ExampleName};
pub use manifest::{load_manifest, save_manifest, Manifest, Problem};
pub use report::{run_report, run_verify, AuditOptions, Report, ReportOptions};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GSPCOND_OUT_DIR";

/// Applies overrides such as `A=symmetric,D=zero` to the diagonal blocks.
pub fn override_structures(sys: GspSystem, spec: &str) -> CliResult<GspSystem> {
    let (mut ka, mut kd) = (sys.struct_a().kind(), sys.struct_d().kind());
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (block, tag) = item
            .split_once('=')
            .ok_or_else(|| CliError::Argument(format!("expected BLOCK=KIND, got '{item}'")))?;
        let kind: StructureKind = tag.parse().map_err(|_| CliError::UnknownStructure {
            block: block.trim().into(),
            tag: tag.trim().into(),
        })?;
        match block.trim() {
            "A" | "a" => ka = kind,
            "D" | "d" => kd = kind,
            other => return Err(CliError::Argument(format!("structures apply to A or D, not '{other}'"))),
        }
    }
    let (m, n) = (sys.m(), sys.n());
    Ok(sys.with_structures(ka.build(m)?, kd.build(n)?)?)
}

/// Output destination: an explicit path, else `$GSPCOND_OUT_DIR/<default_name>`,
/// else standard output (`None`).
pub fn output_path(explicit: Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    explicit.or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(default_name))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_overrides() {
        let sys = generate_example(ExampleName::Ex1, 2, 0).unwrap();
        let g = override_structures(sys.clone(), "A=general,D=general").unwrap();
        assert_eq!(g.struct_a().kind(), StructureKind::General);
        let e = override_structures(sys.clone(), "B=general").unwrap_err();
        assert_eq!(e.code(), "invalid-argument");
        let e = override_structures(sys.clone(), "A=banded").unwrap_err();
        assert_eq!(e.code(), "unknown-structure");
        let e = override_structures(sys, "D=zero").unwrap_err();
        assert_eq!(e.code(), "structure-membership");
    }
}
