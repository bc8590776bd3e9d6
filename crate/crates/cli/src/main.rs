use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use tpspace::error::{Result, TpsError};
use tpspace::io::{self, FlowDoc, KernelDoc, SpectralDoc, VerifyInput};
use tpspace::report::Report;
use tpspace_cli::{flow_report, reconstruct_report, spectral_report, verify_kernel, verify_space, Suite, DEFAULT_TOL};

/// Numerical verification of transition probability spaces.
#[derive(Parser, Debug)]
#[command(name = "tpspace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the axioms of a kernel, or run the verification suites on a space.
    Verify {
        #[command(flatten)]
        common: Common,
        /// `all` or a comma-separated list of suites.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Recover a minimal-rank Hilbert model from a kernel.
    Reconstruct {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate a Hamiltonian flow; the trajectory goes next to `--out` as CSV.
    Flow {
        #[command(flatten)]
        common: Common,
    },
    /// Spectral resolution of a function.
    Spectral {
        #[command(flatten)]
        common: Common,
    },
    /// Concatenate several reports into one.
    ReportMerge {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn single_input(&self) -> Result<&Path> {
        match self.input.as_slice() {
            [one] => Ok(one),
            many => Err(TpsError::Config(format!("expected one --input, got {}", many.len()))),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(TpsError::Config(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

enum Outcome {
    Pass,
    Fail,
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    let text = io::to_json(report);
    match out {
        Some(path) => io::write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(mut report: Report, started: Instant, out: Option<&Path>) -> Result<Outcome> {
    report.timing_ms = Some(started.elapsed().as_millis() as u64);
    emit(&report, out)?;
    for c in report.failures() {
        let note = c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
        eprintln!("FAIL {}: violation {:e} exceeds {:e}{note}", c.name, c.max_violation, c.tolerance);
    }
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: Cli) -> Result<Outcome> {
    let started = Instant::now();
    match cli.command {
        Command::Verify { common, suite } => {
            common.validate()?;
            let suites = Suite::parse_list(&suite)?;
            let report = match io::read_json::<VerifyInput>(common.single_input()?)? {
                VerifyInput::Kernel(doc) => verify_kernel(&doc.to_kernel()?, common.tol, common.seed),
                VerifyInput::Space(doc) => verify_space(&doc.to_space()?, &suites, common.tol, common.seed)?,
            };
            finish(report, started, common.out.as_deref())
        }
        Command::Reconstruct { common } => {
            common.validate()?;
            let doc: KernelDoc = io::read_json(common.single_input()?)?;
            finish(reconstruct_report(&doc, common.tol, common.seed)?, started, common.out.as_deref())
        }
        Command::Flow { common } => {
            common.validate()?;
            let doc: FlowDoc = io::read_json(common.single_input()?)?;
            let (report, csv) = flow_report(&doc, common.tol, common.seed)?;
            if let Some(out) = &common.out {
                io::write_atomic(&out.with_extension("csv"), &csv)?;
            }
            finish(report, started, common.out.as_deref())
        }
        Command::Spectral { common } => {
            common.validate()?;
            let doc: SpectralDoc = io::read_json(common.single_input()?)?;
            finish(spectral_report(&doc, common.tol, common.seed)?, started, common.out.as_deref())
        }
        Command::ReportMerge { common } => {
            let reports = common.input.iter().map(|p| io::read_json::<Report>(p)).collect::<Result<Vec<_>>>()?;
            let mut merged = Report::merge(&reports);
            merged.seed = common.seed;
            emit(&merged, common.out.as_deref())?;
            Ok(if merged.passed() { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
