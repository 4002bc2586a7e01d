//! Command-line front end for the coincidence-experiment toolkit: simulate
//! time-tagged runs, analyze them into normalized delay curves, fit the
//! broadened-dip model, evaluate model curves, and self-test the numerical
//! core.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
//! failure.

mod commands;
mod config;
mod errors;
mod selftest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use errors::CliError;

#[derive(Parser)]
#[command(
    name = "fermi-hbt",
    version,
    about = "Simulate, analyze, and fit time-tagged coincidence runs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a time-tag run file from a config
    Simulate {
        #[arg(short = 'c', long)]
        config: PathBuf,
        /// Output run file
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Also dump the continuous beam arrival times as CSV
        #[arg(long)]
        dump_arrivals: Option<PathBuf>,
    },
    /// Build the normalized coincidence curve from a run file
    Analyze {
        #[arg(short = 'c', long)]
        config: PathBuf,
        /// Input run file
        #[arg(short = 'i', long)]
        input: PathBuf,
        /// Output curve CSV
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Worker threads for pair counting (0 = all cores); the
        /// FERMI_HBT_THREADS environment variable overrides this flag
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Fit the broadened-dip model to an analyzed curve
    Fit {
        #[arg(short = 'c', long)]
        config: PathBuf,
        /// Input curve CSV
        #[arg(short = 'i', long)]
        input: PathBuf,
        /// Output JSON report
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Also write the fitted model curve as CSV
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate the configured model curve as CSV
    Model {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Run the built-in oracle suites
    Selftest {
        /// Reduced grids and stream lengths
        #[arg(long)]
        quick: bool,
        /// Tolerance for the closed-form-vs-quadrature grid
        #[arg(long, default_value_t = 1e-8)]
        oracle_tol: f64,
        /// Fault injection: perturb erf so its suite must fail
        #[arg(long, hide = true)]
        perturb_erf: bool,
    },
    /// Write a bundled preset config (`in10` or `t13c`)
    Preset {
        name: String,
        /// Output path (stdout when omitted)
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors; anything else is a
            // validation failure.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Simulate {
            config,
            output,
            dump_arrivals,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_simulate(&cfg, &output, dump_arrivals.as_deref())
        }
        Cmd::Analyze {
            config,
            input,
            output,
            threads,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_analyze(&cfg, &input, &output, resolve_threads(threads)?)
        }
        Cmd::Fit {
            config,
            input,
            output,
            curve,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_fit(&cfg, &input, &output, curve.as_deref())
        }
        Cmd::Model { config, output } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_model(&cfg, &output)
        }
        Cmd::Selftest {
            quick,
            oracle_tol,
            perturb_erf,
        } => selftest::cmd_selftest(&selftest::SelftestOptions {
            quick,
            oracle_tol,
            perturb_erf,
        }),
        Cmd::Preset { name, output } => {
            let cfg = RunConfig::preset(&name).ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown preset `{name}` (available: in10, t13c)"
                ))
            })?;
            match output {
                Some(path) => std::fs::write(&path, cfg.render()).map_err(|e| {
                    CliError::Io(format!("cannot write {}: {e}", path.display()))
                }),
                None => {
                    print!("{}", cfg.render());
                    Ok(())
                }
            }
        }
    }
}

/// Worker-thread count: FERMI_HBT_THREADS beats the flag; 0 means all
/// available cores.
fn resolve_threads(flag: usize) -> Result<usize, CliError> {
    let requested = match std::env::var("FERMI_HBT_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|e| CliError::Validation(format!("FERMI_HBT_THREADS = `{v}`: {e}")))?,
        Err(_) => flag,
    };
    Ok(if requested == 0 {
        std::thread::available_parallelism().map(usize::from).unwrap_or(1)
    } else {
        requested
    })
}
