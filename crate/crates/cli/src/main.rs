use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bayescal::commands;
use bayescal::error::exit;
use clap::{Parser, Subcommand};

/// Bayesian calibration of simulation models with random-walk
/// Metropolis-Hastings.
#[derive(Debug, Parser)]
#[command(name = "bayescal", version, about)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every chain of a config and store chains, report and GOF trace.
    Calibrate { config: PathBuf },
    /// Diagnose stored chains; exits 3 when any parameter fails the R-hat gate.
    Diagnose {
        dir: PathBuf,
        /// Override the R-hat threshold.
        #[arg(long)]
        r_hat: Option<f64>,
    },
    /// Run one calibration per prior set of the config's sweep.
    Sensitivity { config: PathBuf },
    /// Write per-parameter CSVs for plotting.
    Export {
        dir: PathBuf,
        /// trace, density or prior-posterior
        #[arg(long)]
        kind: String,
        /// Destination directory (default: <dir>/plots).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> bayescal::Result<u8> {
    let mut out = std::io::stdout().lock();
    let w = |r: std::io::Result<()>| r.map_err(|e| bayescal::AppError::io("<stdout>", e));
    match cli.command {
        Command::Calibrate { config } => {
            let (dir, outcome) = commands::calibrate(&config)?;
            w(commands::print_report(&mut out, &outcome.report))?;
            w(writeln!(
                out,
                "wrote {} chains to {}",
                outcome.chains.len(),
                dir.display()
            ))?;
            Ok(exit::SUCCESS)
        }
        Command::Diagnose { dir, r_hat } => {
            let report = commands::diagnose(&dir, r_hat)?;
            w(commands::print_report(&mut out, &report))?;
            Ok(commands::diagnose_exit(&report))
        }
        Command::Sensitivity { config } => {
            let (dir, rows) = commands::sensitivity(&config)?;
            w(writeln!(
                out,
                "{:<16} {:<12} {:>14} {:>14} {:>8}",
                "prior set", "parameter", "mean", "sd", "R-hat"
            ))?;
            for r in &rows {
                match &r.error {
                    Some(e) => w(writeln!(
                        out,
                        "{:<16} {:<12} failed: {e}",
                        r.prior_set, r.parameter
                    ))?,
                    None => w(writeln!(
                        out,
                        "{:<16} {:<12} {:>14.6e} {:>14.6e} {:>8.4}",
                        r.prior_set,
                        r.parameter,
                        r.posterior_mean.unwrap_or(f64::NAN),
                        r.posterior_sd.unwrap_or(f64::NAN),
                        r.r_hat.unwrap_or(f64::NAN)
                    ))?,
                }
            }
            w(writeln!(
                out,
                "wrote {}",
                dir.join("sensitivity.csv").display()
            ))?;
            if rows.iter().all(|r| r.error.is_some()) {
                return Ok(exit::RUNTIME);
            }
            Ok(exit::SUCCESS)
        }
        Command::Export {
            dir,
            kind,
            out: dest,
        } => {
            let files = commands::export(&dir, &kind, dest.as_deref())?;
            for f in files {
                w(writeln!(out, "{}", f.display()))?;
            }
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::SUCCESS
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
