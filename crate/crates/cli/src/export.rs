//! Per-parameter CSVs for external plotting.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bayescal_core::diagnostics::prior_posterior_summary;
use bayescal_core::ChainSet;

use crate::error::{AppError, Result};
use crate::io::{self, RunRecord};

pub const DENSITY_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Trace,
    Density,
    PriorPosterior,
}

impl FromStr for ExportKind {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Self::Trace),
            "density" => Ok(Self::Density),
            "prior-posterior" => Ok(Self::PriorPosterior),
            other => Err(AppError::config(format!(
                "unknown export kind '{other}' (expected trace, density or prior-posterior)"
            ))),
        }
    }
}

impl fmt::Display for ExportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Trace => "trace",
            Self::Density => "density",
            Self::PriorPosterior => "prior-posterior",
        })
    }
}

/// File-name stems for parameters: non-alphanumerics become `_`, and
/// clashes get the parameter index appended.
pub fn file_stems(names: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let mut s: String = n
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect();
            if !seen.insert(s.clone()) {
                s = format!("{s}_{j}");
                seen.insert(s.clone());
            }
            s
        })
        .collect()
}

fn write_rows(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let err = |e: csv::Error| AppError::parse(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

fn chain_columns(chains: &ChainSet) -> Vec<String> {
    chains
        .chains()
        .iter()
        .map(|c| format!("chain_{}", c.meta.chain_id))
        .collect()
}

/// `trace_<param>.csv`: iteration then one value column per chain.
pub fn export_trace(chains: &ChainSet, out: &Path) -> Result<Vec<PathBuf>> {
    let stems = file_stems(chains.names());
    let mut header = vec!["iteration".to_string()];
    header.extend(chain_columns(chains));
    let len = chains.chains().iter().map(|c| c.len()).max().unwrap_or(0);
    let iterations = chains
        .chains()
        .iter()
        .max_by_key(|c| c.len())
        .map(|c| c.iterations().to_vec())
        .unwrap_or_default();
    let mut files = Vec::new();
    for (j, stem) in stems.iter().enumerate() {
        let cols: Vec<Vec<f64>> = chains.chains().iter().map(|c| c.column(j)).collect();
        let path = out.join(format!("trace_{stem}.csv"));
        write_rows(
            &path,
            &header,
            (0..len).map(|i| {
                let mut row = vec![iterations[i].to_string()];
                row.extend(
                    cols.iter()
                        .map(|c| c.get(i).map(|&x| io::fmt_f64(x)).unwrap_or_default()),
                );
                row
            }),
        )?;
        files.push(path);
    }
    Ok(files)
}

/// Histogram densities on a grid shared by all chains.
pub fn chain_densities(columns: &[Vec<f64>], bins: usize) -> (Vec<f64>, f64, Vec<Vec<f64>>) {
    let (lo, hi) = columns
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let width = (hi - lo) / bins as f64;
    let centers = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    let heights = columns
        .iter()
        .map(|col| {
            let mut counts = vec![0usize; bins];
            for &x in col {
                counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
            }
            let n = col.len().max(1) as f64;
            counts.into_iter().map(|c| c as f64 / (n * width)).collect()
        })
        .collect();
    (centers, width, heights)
}

/// `density_<param>.csv`: bin center then one density column per chain.
pub fn export_density(chains: &ChainSet, out: &Path) -> Result<Vec<PathBuf>> {
    let stems = file_stems(chains.names());
    let mut header = vec!["bin_center".to_string()];
    header.extend(chain_columns(chains));
    let mut files = Vec::new();
    for (j, stem) in stems.iter().enumerate() {
        let cols: Vec<Vec<f64>> = chains.chains().iter().map(|c| c.column(j)).collect();
        let (centers, _, heights) = chain_densities(&cols, DENSITY_BINS);
        let path = out.join(format!("density_{stem}.csv"));
        write_rows(
            &path,
            &header,
            centers.iter().enumerate().map(|(k, &c)| {
                let mut row = vec![io::fmt_f64(c)];
                row.extend(heights.iter().map(|h| io::fmt_f64(h[k])));
                row
            }),
        )?;
        files.push(path);
    }
    Ok(files)
}

/// `prior_posterior_<param>.csv`: shared grid with prior and pooled
/// posterior densities.
pub fn export_prior_posterior(
    chains: &ChainSet,
    record: &RunRecord,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if chains.names().as_ref() != record.priors.names().as_ref() {
        return Err(AppError::config(
            "chain parameters do not match the priors in the run record",
        ));
    }
    let stems = file_stems(chains.names());
    let header: Vec<String> = [
        "bin_lower",
        "bin_upper",
        "bin_center",
        "prior_density",
        "posterior_density",
    ]
    .map(String::from)
    .into();
    let mut files = Vec::new();
    for (j, stem) in stems.iter().enumerate() {
        let summary = prior_posterior_summary(&record.priors.priors()[j].spec, &chains.pooled(j))?;
        let path = out.join(format!("prior_posterior_{stem}.csv"));
        write_rows(
            &path,
            &header,
            summary.bins.iter().map(|b| {
                vec![
                    io::fmt_f64(b.lower),
                    io::fmt_f64(b.upper),
                    io::fmt_f64(0.5 * (b.lower + b.upper)),
                    io::fmt_f64(b.prior_density),
                    io::fmt_f64(b.posterior_density),
                ]
            }),
        )?;
        files.push(path);
    }
    Ok(files)
}

pub fn export(
    kind: ExportKind,
    chains: &ChainSet,
    record: Option<&RunRecord>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    match kind {
        ExportKind::Trace => export_trace(chains, out),
        ExportKind::Density => export_density(chains, out),
        ExportKind::PriorPosterior => {
            let record = record.ok_or_else(|| {
                AppError::config(format!(
                    "prior-posterior export needs {} next to the chains",
                    io::RUN_RECORD
                ))
            })?;
            export_prior_posterior(chains, record, out)
        }
    }
}
