//! Subcommand bodies, separated from argument parsing so that tests can
//! drive them directly.

use std::io::Write;
use std::path::{Path, PathBuf};

use bayescal_core::diagnostics::Thresholds;
use bayescal_core::{ChainSet, JointPrior, ParameterPrior, PriorSpec};

use crate::config::{self, derived_quantities};
use crate::error::{exit, AppError, Result};
use crate::export::{self, ExportKind};
use crate::io::{self, RunRecord, REPORT, RUN_RECORD};
use crate::workflow::{self, CalibrationOutcome, RunReport, SweepRow};

pub fn print_report(out: &mut impl Write, report: &RunReport) -> std::io::Result<()> {
    for (k, a) in report.acceptance_rates.iter().enumerate() {
        writeln!(out, "chain {k}: acceptance rate {a:.3}")?;
    }
    if let Some(g) = report.gof {
        writeln!(
            out,
            "GOF: min {:.3}, median {:.3}, max {:.3}",
            g.min, g.median, g.max
        )?;
    }
    let width = report
        .diagnostics
        .parameters
        .iter()
        .map(|p| p.name.len())
        .max()
        .unwrap_or(9)
        .max(9);
    writeln!(
        out,
        "{:<width$}  {:>8}  {:>9}  {:>12}  flags",
        "parameter", "R-hat", "upper CI", "posterior sd"
    )?;
    for p in &report.diagnostics.parameters {
        let flags: Vec<String> = p.flags.iter().map(|f| format!("{f:?}")).collect();
        writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>9.4}  {:>12.5e}  {}",
            p.name,
            p.r_hat.point_estimate,
            p.r_hat.upper_ci,
            p.posterior_sd,
            flags.join(",")
        )?;
    }
    for pair in &report.diagnostics.correlated_pairs {
        writeln!(
            out,
            "correlated: {} ~ {} (r = {:.4})",
            pair.a, pair.b, pair.correlation
        )?;
    }
    writeln!(
        out,
        "converged: {}",
        if report.converged { "yes" } else { "no" }
    )
}

pub fn calibrate(config_path: &Path) -> Result<(PathBuf, CalibrationOutcome)> {
    let cfg = config::load(config_path)?;
    let outcome = workflow::run_calibration(&cfg.run)?;
    Ok((cfg.run.output, outcome))
}

pub fn sensitivity(config_path: &Path) -> Result<(PathBuf, Vec<SweepRow>)> {
    let cfg = config::load(config_path)?;
    let sweep = cfg.sweep()?;
    let rows = workflow::run_sensitivity(sweep)?;
    Ok((sweep.base.output.clone(), rows))
}

fn read_record(dir: &Path) -> Result<Option<RunRecord>> {
    let p = dir.join(RUN_RECORD);
    if p.exists() {
        io::read_json(&p).map(Some)
    } else {
        Ok(None)
    }
}

/// Reads every chain of `dir`; at least two are required.
pub fn load_chains(dir: &Path) -> Result<ChainSet> {
    let chains = io::read_chain_dir(dir)?;
    if chains.len() < 2 {
        return Err(AppError::config(format!(
            "{}: diagnostics need at least 2 chain files, found {}",
            dir.display(),
            chains.len()
        )));
    }
    Ok(ChainSet::new(chains)?)
}

/// Diagnoses stored chains and rewrites `report.json`. Without a run
/// record the priors are treated as flat, so no parameter is flagged as
/// flat, and default thresholds apply.
pub fn diagnose(dir: &Path, r_hat: Option<f64>) -> Result<RunReport> {
    let chains = load_chains(dir)?;
    let record = read_record(dir)?;
    let (prior, derived, mut thresholds) = match &record {
        Some(r) => (r.priors.clone(), derived_quantities(r.model), r.thresholds),
        None => {
            let flat = chains
                .names()
                .iter()
                .map(|n| {
                    ParameterPrior::new(
                        n.clone(),
                        PriorSpec::ImproperUniform {
                            lower: f64::NEG_INFINITY,
                            upper: None,
                        },
                    )
                })
                .collect();
            (JointPrior::new(flat)?, &[][..], Thresholds::default())
        }
    };
    if let Some(r) = r_hat {
        if !(r.is_finite() && r >= 1.0) {
            return Err(AppError::config(format!("--r-hat must be >= 1, got {r}")));
        }
        thresholds.r_hat = r;
    }
    let report = workflow::build_report(&chains, &prior, &thresholds, derived)?;
    io::write_json(&dir.join(REPORT), &report)?;
    Ok(report)
}

pub fn export(dir: &Path, kind: &str, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let kind: ExportKind = kind.parse()?;
    let chains = io::read_chain_dir(dir)?;
    if chains.is_empty() {
        return Err(AppError::config(format!(
            "{}: no chain files",
            dir.display()
        )));
    }
    let chains = ChainSet::new(chains)?;
    let record = read_record(dir)?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("plots"));
    export::export(kind, &chains, record.as_ref(), &out)
}

/// Exit status of `diagnose`: the convergence gate.
pub fn diagnose_exit(report: &RunReport) -> u8 {
    if report.converged {
        exit::SUCCESS
    } else {
        exit::NOT_CONVERGED
    }
}
