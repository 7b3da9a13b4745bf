use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flatpencil_cli::{exit_code, identities_report, parse_manifest, run_manifest, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "flatpencil", version, about = "Checks for compatible and flat pencils of metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job of a manifest and write one JSON report per line.
    Run {
        manifest: PathBuf,
        /// Write reports here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for random sample points and pencil members.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate sample points in parallel.
        #[arg(long)]
        parallel: bool,
        /// Default tolerance for jobs that do not set one.
        #[arg(long)]
        tol: Option<f64>,
        /// Leave wall-clock times out of the reports.
        #[arg(long)]
        no_timing: bool,
    },
    /// Check the identities that hold for every pair of metrics on random pairs.
    Identities {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimensions to cycle through.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3])]
        dims: Vec<usize>,
    },
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("flatpencil: {e}");
    ExitCode::from(2)
}

fn run(
    manifest: PathBuf,
    out: Option<PathBuf>,
    opts: RunOptions,
) -> Result<i32, RunError> {
    let text = std::fs::read_to_string(&manifest)
        .map_err(|e| RunError::Input(flatpencil_cli::InputError::new(format!("{}: {e}", manifest.display()))))?;
    let m = parse_manifest(&text)?;
    let mut w: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let reports = run_manifest(&m, &opts, |r| {
        writeln!(w, "{}", r.to_line())?;
        w.flush()
    })?;
    Ok(exit_code(&reports))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            manifest,
            out,
            seed,
            parallel,
            tol,
            no_timing,
        } => {
            let opts = RunOptions {
                seed,
                parallel,
                tol,
                timing: !no_timing,
            };
            match run(manifest, out, opts) {
                Ok(code) => ExitCode::from(code as u8),
                Err(e) => fail(e),
            }
        }
        Command::Identities { trials, seed, dims } => {
            if dims.is_empty() || dims.contains(&0) {
                eprintln!("flatpencil: --dims must list positive dimensions");
                return ExitCode::from(2);
            }
            match identities_report(seed, trials, &dims) {
                Ok(r) => {
                    println!("{}", r.to_line());
                    ExitCode::from(if r.pass { 0 } else { 1 })
                }
                Err(e) => fail(e),
            }
        }
    }
}
