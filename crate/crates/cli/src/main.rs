use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gspcond::{Case, Target};
use gspcond_cli::report::{to_csv, to_json};
use gspcond_cli::{
    generate_example, load_manifest, output_path, override_structures, run_report, run_verify, save_manifest,
    AuditOptions, CliError, CliResult, ExampleName, Problem, ReportOptions,
};

#[derive(Parser)]
#[command(
    name = "gspcond",
    version,
    about = "Condition numbers of generalized saddle point systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structured and unstructured condition numbers.
    Compute {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        out: Output,
        /// Comma-separated targets: joint, x1, x2.
        #[arg(long, default_value = "joint,x1,x2")]
        targets: String,
        /// Force case a, b or c instead of detecting it.
        #[arg(long)]
        case: Option<String>,
    },
    /// Write an example system as an inline manifest.
    Example {
        #[arg(long)]
        name: String,
        #[arg(long)]
        l: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the first-order expansion.
    Verify {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        out: Output,
    },
    /// Monte-Carlo audit of the first-order error bounds.
    Audit {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value = "joint,x1,x2")]
        targets: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
    },
}

#[derive(Args)]
struct Source {
    /// Problem manifest (JSON).
    #[arg(long, conflicts_with = "name")]
    manifest: Option<PathBuf>,
    /// Built-in example: ex1, ex2 or ex3.
    #[arg(long, requires = "l")]
    name: Option<String>,
    #[arg(long)]
    l: Option<u32>,
    /// Seed for ex2 data and for perturbation sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Structure overrides, e.g. A=symmetric,D=symmetric.
    #[arg(long)]
    structures: Option<String>,
}

#[derive(Args)]
struct Output {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl Source {
    fn load(&self) -> CliResult<(Problem, String)> {
        let (problem, label) = match (&self.manifest, &self.name) {
            (Some(path), _) => (load_manifest(path)?, path.display().to_string()),
            (None, Some(name)) => {
                let name: ExampleName = name.parse()?;
                let l = self
                    .l
                    .ok_or_else(|| CliError::Argument("--l is required with --name".into()))?;
                (
                    Problem::Gsp(generate_example(name, l, self.seed)?),
                    format!("{name}-l{l}"),
                )
            }
            (None, None) => return Err(CliError::Argument("either --manifest or --name is required".into())),
        };
        match (&self.structures, problem) {
            (Some(spec), Problem::Gsp(sys)) => Ok((Problem::Gsp(override_structures(sys, spec)?), label)),
            (Some(_), Problem::Wls(_)) => Err(CliError::Argument("--structures does not apply to wls problems".into())),
            (None, p) => Ok((p, label)),
        }
    }
}

fn parse_targets(s: &str) -> CliResult<Vec<Target>> {
    let targets = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.parse::<Target>())
        .collect::<gspcond::Result<Vec<_>>>()?;
    Ok(targets)
}

fn emit(text: &str, dest: Option<PathBuf>) -> CliResult<()> {
    match dest {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
            }
            fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn stem(label: &str) -> String {
    PathBuf::from(label)
        .file_stem()
        .map_or_else(|| label.to_string(), |s| s.to_string_lossy().into_owned())
}

/// Exit status: 0 on success, 1 when a check fails, 2 on errors.
fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Compute {
            src,
            out,
            targets,
            case,
        } => {
            let (problem, label) = src.load()?;
            let opts = ReportOptions {
                targets: parse_targets(&targets)?,
                case: case.map(|c| c.parse::<Case>()).transpose()?,
                audit: None,
            };
            let report = run_report(&problem, &label, &opts)?;
            let text = if out.format == Format::Csv {
                to_csv(&report)?
            } else {
                to_json(&report)?
            };
            emit(
                &text,
                output_path(out.out, &format!("{}.cn.{}", stem(&label), out.format.ext())),
            )?;
            Ok(report.passed())
        }
        Command::Example { name, l, seed, out } => {
            let name: ExampleName = name.parse()?;
            let problem = Problem::Gsp(generate_example(name, l, seed)?);
            emit(&save_manifest(&problem), output_path(out, &format!("{name}-l{l}.json")))?;
            Ok(true)
        }
        Command::Verify { src, out } => {
            let (problem, label) = src.load()?;
            let report = run_verify(&problem, &label, src.seed)?;
            if out.format == Format::Csv {
                return Err(CliError::Argument("verify only writes json".into()));
            }
            emit(
                &to_json(&report)?,
                output_path(out.out, &format!("{}.verify.json", stem(&label))),
            )?;
            if !report.passed {
                eprintln!("derivative check failed: slope {:?}", report.decay.slope);
            }
            Ok(report.passed)
        }
        Command::Audit {
            src,
            out,
            targets,
            samples,
            eps,
        } => {
            let (problem, label) = src.load()?;
            let opts = ReportOptions {
                targets: parse_targets(&targets)?,
                case: None,
                audit: Some(AuditOptions {
                    samples,
                    eps,
                    seed: src.seed,
                }),
            };
            let report = run_report(&problem, &label, &opts)?;
            let text = if out.format == Format::Csv {
                to_csv(&report)?
            } else {
                to_json(&report)?
            };
            emit(
                &text,
                output_path(out.out, &format!("{}.audit.{}", stem(&label), out.format.ext())),
            )?;
            if let Some(a) = report.audit.as_ref().filter(|a| !a.passed()) {
                eprintln!("audit found {} bound violations", a.violations.len());
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(2)
        }
    }
}
