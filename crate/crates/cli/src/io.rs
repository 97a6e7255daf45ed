//! On-disk formats: chain CSVs with JSON sidecars, target and baseline
//! CSVs, run records, and atomic output directories.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bayescal_core::diagnostics::Thresholds;
use bayescal_core::hpv::{BaselineRow, BaselineTable};
use bayescal_core::sampler::ChainMeta;
use bayescal_core::{Chain, JointPrior, ProposalSpec, SamplerOptions, Target, TargetSet};
use serde::{Deserialize, Serialize};

use crate::config::ModelKind;
use crate::error::{AppError, Result};

const LEAD_COLUMNS: [&str; 2] = ["chain_id", "iteration"];
const TAIL_COLUMNS: [&str; 3] = ["log_posterior", "gof", "accepted"];

/// Seventeen significant digits: enough for every `f64` to parse back to
/// the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn chain_file_name(chain_id: usize) -> String {
    format!("chain_{chain_id}.csv")
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    match e.kind() {
        csv::ErrorKind::Io(_) => AppError::parse(path, e.to_string()),
        _ => {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            AppError::parse(path, format!("line {line}: {e}"))
        }
    }
}

/// Writes the chain CSV and its `.meta.json` sidecar.
pub fn write_chain_csv(chain: &Chain, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = LEAD_COLUMNS.to_vec();
    header.extend(chain.names().iter().map(String::as_str));
    header.extend(TAIL_COLUMNS);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let id = chain.meta.chain_id.to_string();
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..chain.len() {
        row.clear();
        row.push(id.clone());
        row.push(chain.iterations()[i].to_string());
        row.extend(chain.state(i).iter().map(|&x| fmt_f64(x)));
        row.push(fmt_f64(chain.log_posterior()[i]));
        row.push(fmt_f64(chain.gof()[i]));
        row.push(if chain.accepted()[i] { "1" } else { "0" }.to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    write_json(&meta_path(path), &chain.meta)
}

/// Parameter names from a chain CSV header.
pub fn read_chain_header(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    parse_header(path, &header)
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<Vec<String>> {
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    let min = LEAD_COLUMNS.len() + TAIL_COLUMNS.len() + 1;
    if n < min || cols[..2] != LEAD_COLUMNS || cols[n - 3..] != TAIL_COLUMNS {
        return Err(AppError::schema(
            path,
            format!(
                "line 1: header must be chain_id,iteration,<parameters...>,log_posterior,gof,accepted; got {}",
                cols.join(",")
            ),
        ));
    }
    Ok(cols[2..n - 3].iter().map(|s| s.to_string()).collect())
}

/// Reads a chain CSV. Metadata comes from the sidecar when present;
/// otherwise it is reconstructed from the rows.
pub fn read_chain_csv(path: &Path) -> Result<Chain> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let names = parse_header(path, &header)?;
    let width = header.len();
    let dim = names.len();

    struct Row {
        iteration: u64,
        state: Vec<f64>,
        lp: f64,
        gof: f64,
        accepted: bool,
    }
    let mut rows = Vec::new();
    let mut chain_id: Option<usize> = None;
    let mut record = csv::StringRecord::new();
    loop {
        match r.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_err(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| AppError::parse(path, format!("line {line}: {msg}"));
        if record.len() != width {
            return Err(bad(format!(
                "expected {width} fields, got {}",
                record.len()
            )));
        }
        let num = |k: usize| -> Result<f64> {
            record[k].trim().parse::<f64>().map_err(|_| {
                bad(format!(
                    "column '{}': '{}' is not a number",
                    &header[k], &record[k]
                ))
            })
        };
        let id: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("chain_id '{}' is not an integer", &record[0])))?;
        match chain_id {
            None => chain_id = Some(id),
            Some(c) if c != id => {
                return Err(bad(format!(
                    "chain_id {id} differs from {c} on earlier rows"
                )))
            }
            _ => {}
        }
        let iteration: u64 = record[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("iteration '{}' is not an integer", &record[1])))?;
        let state = (2..2 + dim).map(num).collect::<Result<Vec<f64>>>()?;
        let accepted = match record[width - 1].trim() {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("accepted must be 0 or 1, got '{other}'"))),
        };
        rows.push(Row {
            iteration,
            state,
            lp: num(width - 3)?,
            gof: num(width - 2)?,
            accepted,
        });
    }

    let sidecar = meta_path(path);
    let meta = if sidecar.exists() {
        let meta: ChainMeta = read_json(&sidecar)?;
        if chain_id.is_some_and(|c| c != meta.chain_id) {
            return Err(AppError::parse(
                &sidecar,
                format!("chain_id {} disagrees with the CSV", meta.chain_id),
            ));
        }
        meta
    } else {
        let n = rows.len().max(1) as f64;
        ChainMeta {
            chain_id: chain_id.unwrap_or(0),
            seed: 0,
            model_id: "unknown".into(),
            options: SamplerOptions {
                iterations: rows.last().map_or(1, |r| r.iteration),
                burn_in: 0,
                thinning: 1,
            },
            acceptance_rate: rows.iter().filter(|r| r.accepted).count() as f64 / n,
        }
    };
    let names: Arc<[String]> = names.into();
    let mut chain = Chain::new(meta, names);
    for row in rows {
        chain.push(row.iteration, &row.state, row.lp, row.gof, row.accepted);
    }
    Ok(chain)
}

/// Chain CSVs of a run directory, ordered by chain id.
pub fn chain_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| AppError::io(dir, e))?;
    let mut files: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        let id = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("chain_"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(id) = id {
            files.push((id, path));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Reads every chain of a run directory after checking that all headers
/// agree.
pub fn read_chain_dir(dir: &Path) -> Result<Vec<Chain>> {
    let files = chain_files(dir)?;
    let mut first: Option<(PathBuf, Vec<String>)> = None;
    for f in &files {
        let names = read_chain_header(f)?;
        match &first {
            None => first = Some((f.clone(), names)),
            Some((p0, n0)) if *n0 != names => {
                return Err(AppError::schema(
                    f,
                    format!(
                        "header parameters {names:?} differ from {:?} in {}",
                        n0,
                        p0.display()
                    ),
                ))
            }
            _ => {}
        }
    }
    files.iter().map(|f| read_chain_csv(f)).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetRow {
    name: String,
    mean: f64,
    sd: f64,
    #[serde(default)]
    units: String,
}

/// Targets file with columns `name,mean,sd[,units]`.
pub fn read_targets_csv(path: &Path) -> Result<TargetSet> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut targets = Vec::new();
    for row in r.deserialize::<TargetRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        targets.push(Target {
            name: row.name,
            mean: row.mean,
            sd: row.sd,
            units: row.units,
        });
    }
    TargetSet::new(targets).map_err(|e| AppError::parse(path, e.to_string()))
}

pub fn write_targets_csv(targets: &TargetSet, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["name", "mean", "sd", "units"])
        .map_err(|e| csv_err(path, e))?;
    for t in targets.iter() {
        w.write_record([
            t.name.clone(),
            t.mean.to_string(),
            t.sd.to_string(),
            t.units.clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Baseline file with columns `edge,strain,age_lower,age_upper,value`.
pub fn read_baseline_rows(path: &Path) -> Result<Vec<BaselineRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<BaselineRow>()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

pub fn read_baseline_csv(path: &Path) -> Result<BaselineTable> {
    let rows = read_baseline_rows(path)?;
    BaselineTable::from_rows(&rows).map_err(|e| AppError::parse(path, e.to_string()))
}

pub fn write_baseline_csv(rows: &[BaselineRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| AppError::parse(path, e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::parse(path, e.to_string()))
}

pub const RUN_RECORD: &str = "run.json";
pub const REPORT: &str = "report.json";
pub const GOF_TRACE: &str = "gof_trace.csv";

/// What was run, stored next to the chains so that stored runs can be
/// diagnosed and exported without the original config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub parameters: Vec<String>,
    pub priors: JointPrior,
    pub proposal: ProposalSpec,
    pub options: SamplerOptions,
    pub seeds: Vec<u64>,
    pub targets: TargetSet,
    pub thresholds: Thresholds,
}

/// Holds `<dir>.lock` for the lifetime of the guard.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = sibling(dir, ".lock");
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(AppError::Runtime(format!(
                    "{} is locked by another run (remove {} if stale)",
                    dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(AppError::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let mut name = dir
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "output".into());
    name.push(suffix);
    dir.with_file_name(name)
}

/// Fills a staging directory through `fill` and moves it to `dir` in one
/// rename, replacing any previous contents. On failure the staging
/// directory is removed and `dir` is left untouched.
pub fn write_dir_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let staging = sibling(dir, &format!(".partial-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| AppError::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| AppError::io(&staging, e))?;
    if let Err(e) = fill(&staging) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dir.exists() {
        let old = sibling(dir, &format!(".old-{}", std::process::id()));
        fs::rename(dir, &old).map_err(|e| AppError::io(dir, e))?;
        if let Err(e) = fs::rename(&staging, dir) {
            let _ = fs::rename(&old, dir);
            let _ = fs::remove_dir_all(&staging);
            return Err(AppError::io(dir, e));
        }
        let _ = fs::remove_dir_all(&old);
        Ok(())
    } else {
        fs::rename(&staging, dir).map_err(|e| {
            let _ = fs::remove_dir_all(&staging);
            AppError::io(dir, e)
        })
    }
}
