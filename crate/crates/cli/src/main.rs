//! `gradlab` batch driver.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradlab::io::{parse_config, report_archive, run_experiment, summary, ExperimentKind};
use gradlab::Error;

#[derive(Parser)]
#[command(
    name = "gradlab",
    version,
    about = "Heat and chemotaxis experiments with estimate checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps and checks.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 4 if any check fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a heat problem and run its a-priori checks.
    Heat(Common),
    /// Solve a chemotaxis system and run its checks.
    Chemo(Common),
    /// Run an ε-sweep and its Cauchy ladders.
    Sweep(Common),
    /// Solve and run the full checker suite.
    Verify(Common),
    /// Re-read an archive, verify its digests and print its summary.
    Report(Common),
}

const USAGE: u8 = 1;
const CONFIG: u8 = 2;
const SOLVER: u8 = 3;
const CHECKS: u8 = 4;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("gradlab: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, args) = match cli.command {
        Command::Heat(a) => (ExperimentKind::Heat, a),
        Command::Chemo(a) => (ExperimentKind::Chemo, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
        Command::Report(a) => (ExperimentKind::Report, a),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return fail(USAGE, "--threads must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return fail(USAGE, e);
        }
    }
    let config = match &args.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => match parse_config(&text) {
                Ok(c) => Some(c),
                Err(e) => return fail(CONFIG, format!("{}: {e}", path.display())),
            },
            Err(e) => return fail(CONFIG, format!("{}: {e}", path.display())),
        },
        None => None,
    };
    if let Some(c) = &config {
        if c.kind != kind {
            return fail(
                CONFIG,
                format!(
                    "config describes a '{}' experiment, not '{}'",
                    c.kind.name(),
                    kind.name()
                ),
            );
        }
    }

    if kind == ExperimentKind::Report {
        let dir = args.out.or_else(|| {
            config
                .as_ref()
                .and_then(|c| c.report.as_ref())
                .map(|r| PathBuf::from(&r.archive))
        });
        let Some(dir) = dir else {
            return fail(
                USAGE,
                "report needs --out <archive dir> or a config with report.archive",
            );
        };
        return match report_archive(&dir) {
            Ok(check) => {
                print!("{}", check.summary);
                for f in &check.mismatched {
                    eprintln!("gradlab: digest mismatch: {f}");
                }
                if !check.mismatched.is_empty() {
                    ExitCode::from(SOLVER)
                } else if args.strict && check.failed_reports > 0 {
                    ExitCode::from(CHECKS)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(SOLVER, e),
        };
    }

    let Some(config) = config else {
        return fail(USAGE, "--config <path> is required");
    };
    let Some(out) = args
        .out
        .or_else(|| config.output.as_ref().map(PathBuf::from))
    else {
        return fail(
            USAGE,
            "no output directory: pass --out or set `output` in the config",
        );
    };
    match run_experiment(&config, &out) {
        Ok(archive) => {
            print!("{}", summary(&archive));
            println!("archive: {}", out.display());
            if args.strict && archive.failures() > 0 {
                ExitCode::from(CHECKS)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ (Error::Config(_) | Error::InvalidConfig(_))) => fail(CONFIG, e),
        Err(e) => fail(SOLVER, e),
    }
}
