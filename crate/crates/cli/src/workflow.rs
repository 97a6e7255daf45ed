//! Calibration runs and prior-sensitivity sweeps.

use std::fs;
use std::path::Path;

use bayescal_core::diagnostics::{
    detect_nonidentifiability, DerivedQuantity, NonIdentifiabilityReport, Thresholds,
};
use bayescal_core::sampler::{check_seeds, draw_initial_state, init_rng, run_chain, Posterior};
use bayescal_core::{Chain, ChainSet, JointPrior};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunSpec, SweepSpec};
use crate::error::{AppError, Result};
use crate::io::{self, DirLock, RunRecord, GOF_TRACE, REPORT, RUN_RECORD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl GofSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            median: median_sorted(&v),
            max: v[v.len() - 1],
        })
    }
}

pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub converged: bool,
    pub identified: bool,
    pub acceptance_rates: Vec<f64>,
    pub gof: Option<GofSummary>,
    pub diagnostics: NonIdentifiabilityReport,
}

pub fn build_report(
    chains: &ChainSet,
    prior: &JointPrior,
    thresholds: &Thresholds,
    derived: &[DerivedQuantity],
) -> Result<RunReport> {
    let diagnostics = detect_nonidentifiability(chains, prior, thresholds, derived)?;
    let gof: Vec<f64> = chains
        .chains()
        .iter()
        .flat_map(|c| c.gof().iter().copied())
        .collect();
    Ok(RunReport {
        converged: diagnostics.converged(),
        identified: diagnostics.identified(),
        acceptance_rates: chains
            .chains()
            .iter()
            .map(|c| c.meta.acceptance_rate)
            .collect(),
        gof: GofSummary::of(&gof),
        diagnostics,
    })
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub chains: ChainSet,
    pub report: RunReport,
    pub record: RunRecord,
}

impl CalibrationOutcome {
    /// `(chain_id, iteration, gof)` for every recorded state.
    pub fn gof_trace(&self) -> Vec<(usize, u64, f64)> {
        gof_trace(&self.chains)
    }
}

pub fn gof_trace(chains: &ChainSet) -> Vec<(usize, u64, f64)> {
    chains
        .chains()
        .iter()
        .flat_map(|c| {
            c.iterations()
                .iter()
                .zip(c.gof())
                .map(move |(&it, &g)| (c.meta.chain_id, it, g))
        })
        .collect()
}

/// Samples every chain in parallel; chain `k` uses `seeds[k]` for both its
/// starting point and its transitions, so results do not depend on
/// scheduling.
pub fn sample(spec: &RunSpec) -> Result<ChainSet> {
    check_seeds(&spec.seeds)?;
    let posterior = Posterior::new(&spec.model, &spec.prior, &spec.targets);
    let chains = spec
        .seeds
        .par_iter()
        .enumerate()
        .map(|(id, &seed)| {
            let init = draw_initial_state(&posterior, &mut init_rng(seed))?;
            let chain = run_chain(&posterior, &spec.proposal, &spec.options, &init, seed, id)?;
            log::info!(
                "chain {id} (seed {seed}): acceptance {:.3}",
                chain.meta.acceptance_rate
            );
            Ok(chain)
        })
        .collect::<bayescal_core::Result<Vec<Chain>>>()?;
    Ok(ChainSet::new(chains)?)
}

pub fn run_record(spec: &RunSpec) -> RunRecord {
    RunRecord {
        model: spec.model.kind(),
        parameters: spec.model.parameter_names(),
        priors: spec.prior.clone(),
        proposal: spec.proposal.clone(),
        options: spec.options,
        seeds: spec.seeds.clone(),
        targets: spec.targets.clone(),
        thresholds: spec.thresholds,
    }
}

/// Samples, diagnoses and persists one calibration run.
pub fn run_calibration(spec: &RunSpec) -> Result<CalibrationOutcome> {
    let _lock = DirLock::acquire(&spec.output)?;
    let chains = sample(spec)?;
    let report = build_report(&chains, &spec.prior, &spec.thresholds, spec.model.derived())?;
    let outcome = CalibrationOutcome {
        chains,
        report,
        record: run_record(spec),
    };
    persist(&outcome, &spec.output)?;
    Ok(outcome)
}

pub fn persist(outcome: &CalibrationOutcome, dir: &Path) -> Result<()> {
    io::write_dir_atomically(dir, |staging| {
        for c in outcome.chains.chains() {
            io::write_chain_csv(c, &staging.join(io::chain_file_name(c.meta.chain_id)))?;
        }
        io::write_json(&staging.join(RUN_RECORD), &outcome.record)?;
        io::write_json(&staging.join(REPORT), &outcome.report)?;
        write_gof_trace(&outcome.gof_trace(), &staging.join(GOF_TRACE))
    })
}

fn write_gof_trace(rows: &[(usize, u64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::parse(path, e.to_string()))?;
    let err = |e: csv::Error| AppError::parse(path, e.to_string());
    w.write_record(["chain_id", "iteration", "gof"])
        .map_err(err)?;
    for &(c, it, g) in rows {
        w.write_record([c.to_string(), it.to_string(), io::fmt_f64(g)])
            .map_err(err)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// One line of `sensitivity.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub prior_set: String,
    pub parameter: String,
    pub posterior_mean: Option<f64>,
    pub posterior_sd: Option<f64>,
    pub r_hat: Option<f64>,
    pub r_hat_upper: Option<f64>,
    pub gof_median: Option<f64>,
    pub gof_min: Option<f64>,
    pub error: Option<String>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn summarize(id: &str, parameters: &[String], outcome: &CalibrationOutcome) -> Vec<SweepRow> {
    let gof = outcome.report.gof;
    parameters
        .iter()
        .map(|p| {
            let j = outcome
                .chains
                .index_of(p)
                .expect("sweep parameters are validated");
            let (m, s) = mean_sd(&outcome.chains.pooled(j));
            let r = &outcome.report.diagnostics.parameters[j].r_hat;
            SweepRow {
                prior_set: id.to_string(),
                parameter: p.clone(),
                posterior_mean: Some(m),
                posterior_sd: Some(s),
                r_hat: Some(r.point_estimate),
                r_hat_upper: Some(r.upper_ci),
                gof_median: gof.map(|g| g.median),
                gof_min: gof.map(|g| g.min),
                error: None,
            }
        })
        .collect()
}

/// Runs one calibration per prior set, each into `<output>/<id>/`, and
/// writes `<output>/sensitivity.csv`. A failing prior set yields rows
/// carrying the error; the other sets still run.
pub fn run_sensitivity(sweep: &SweepSpec) -> Result<Vec<SweepRow>> {
    if sweep.prior_sets.len() < 2 {
        return Err(AppError::config(
            "a sensitivity sweep needs at least 2 prior sets",
        ));
    }
    let out = &sweep.base.output;
    let _lock = DirLock::acquire(out)?;
    fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;

    let per_set: Vec<Vec<SweepRow>> = sweep
        .prior_sets
        .par_iter()
        .map(|set| {
            let spec = RunSpec {
                prior: set.prior.clone(),
                proposal: set.proposal.clone(),
                output: out.join(&set.id),
                ..sweep.base.clone()
            };
            match run_calibration(&spec) {
                Ok(outcome) => summarize(&set.id, &sweep.parameters, &outcome),
                Err(e) => {
                    log::warn!("prior set '{}' failed: {e}", set.id);
                    sweep
                        .parameters
                        .iter()
                        .map(|p| SweepRow {
                            prior_set: set.id.clone(),
                            parameter: p.clone(),
                            posterior_mean: None,
                            posterior_sd: None,
                            r_hat: None,
                            r_hat_upper: None,
                            gof_median: None,
                            gof_min: None,
                            error: Some(e.to_string()),
                        })
                        .collect()
                }
            }
        })
        .collect();
    let rows: Vec<SweepRow> = per_set.into_iter().flatten().collect();
    write_sweep_csv(&rows, &out.join("sensitivity.csv"))?;
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    let err = |e: csv::Error| AppError::parse(path, e.to_string());
    let mut w = csv::Writer::from_path(&tmp).map_err(err)?;
    w.write_record([
        "prior_set",
        "parameter",
        "posterior_mean",
        "posterior_sd",
        "r_hat",
        "r_hat_upper",
        "gof_median",
        "gof_min",
        "error",
    ])
    .map_err(err)?;
    let f = |x: Option<f64>| x.map(io::fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.prior_set.clone(),
            r.parameter.clone(),
            f(r.posterior_mean),
            f(r.posterior_sd),
            f(r.r_hat),
            f(r.r_hat_upper),
            f(r.gof_median),
            f(r.gof_min),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| AppError::io(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}
