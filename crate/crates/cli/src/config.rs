//! Run configuration: a single TOML file resolved into validated specs.
//!
//! Relative paths resolve against the directory holding the config file.
//! `BAYESCAL_OUTPUT_ROOT`, when set, replaces that directory for the
//! output path only.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Component, Path, PathBuf};

use bayescal_core::diagnostics::{DerivedQuantity, Thresholds};
use bayescal_core::hpv::{self, CohortConfig, HpvModel, MortalityBand, MultiplierMap};
use bayescal_core::sis::{self, SisModel, SisSimConfig};
use bayescal_core::{
    JointPrior, Model, ModelOutputs, ParameterPrior, PriorSpec, ProposalSpec, SamplerOptions,
    TargetSet,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::io;

pub const OUTPUT_ROOT_ENV: &str = "BAYESCAL_OUTPUT_ROOT";

/// Fewest recorded draws per chain that the diagnostics accept.
pub const MIN_RECORDED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sis,
    Hpv,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sis => "sis",
            Self::Hpv => "hpv",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelKind,
    pub targets: PathBuf,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    pub sampler: RawSampler,
    #[serde(default)]
    pub proposal: RawProposal,
    #[serde(default)]
    pub priors: Vec<RawPrior>,
    pub default_prior: Option<RawPrior>,
    pub sis: Option<SisSimConfig>,
    pub hpv: Option<RawHpv>,
    #[serde(default)]
    pub diagnostics: Thresholds,
    pub sensitivity: Option<RawSweep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampler {
    pub iterations: u64,
    /// Defaults to 20% of `iterations`.
    pub burn_in: Option<u64>,
    #[serde(default = "default_thinning")]
    pub thinning: u64,
}

fn default_thinning() -> u64 {
    10
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProposal {
    /// Defaults to the number of parameters.
    pub block_size: Option<usize>,
    /// Per-parameter step sd; unlisted parameters get 5% of the prior scale.
    #[serde(default)]
    pub scales: BTreeMap<String, f64>,
}

/// One prior entry. Which numeric fields apply depends on `kind`:
/// `normal` (mean, sd), `gamma` (shape, rate), `uniform` (lower, upper),
/// `improper_uniform` (lower, optional upper).
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawPrior {
    pub name: Option<String>,
    pub kind: String,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub shape: Option<f64>,
    pub rate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub init: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHpv {
    /// Baseline CSV; the built-in synthetic baseline when absent.
    pub baseline: Option<PathBuf>,
    pub multipliers: Option<MultiplierMap>,
    pub cohort_size: Option<u32>,
    pub start_age: Option<u32>,
    pub end_age: Option<u32>,
    pub seed: Option<u64>,
    pub mortality: Option<Vec<MortalityBand>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    /// Parameters summarized per prior set; all parameters when empty.
    #[serde(default)]
    pub parameters: Vec<String>,
    pub prior_sets: Vec<RawPriorSet>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPriorSet {
    pub id: String,
    /// Replaces base priors with the same name.
    #[serde(default)]
    pub priors: Vec<RawPrior>,
    /// Replaces base proposal scales with the same name.
    #[serde(default)]
    pub scales: BTreeMap<String, f64>,
}

/// A calibrated model resolved from its config section.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Sis(SisModel),
    Hpv(Box<HpvModel>),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Sis(_) => ModelKind::Sis,
            Self::Hpv(_) => ModelKind::Hpv,
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        match self {
            Self::Sis(_) => sis::PARAMETER_NAMES.iter().map(|s| s.to_string()).collect(),
            Self::Hpv(m) => m.parameter_names(),
        }
    }

    pub fn output_names(&self) -> Vec<String> {
        output_names(self.kind())
    }

    pub fn derived(&self) -> &'static [DerivedQuantity] {
        derived_quantities(self.kind())
    }
}

impl Model for ModelSpec {
    fn evaluate(&self, theta: &[f64]) -> bayescal_core::Result<ModelOutputs> {
        match self {
            Self::Sis(m) => m.evaluate(theta),
            Self::Hpv(m) => m.evaluate(theta),
        }
    }

    fn id(&self) -> &str {
        match self {
            Self::Sis(m) => m.id(),
            Self::Hpv(m) => m.id(),
        }
    }
}

fn beta(theta: &[f64]) -> f64 {
    sis::beta_gamma(theta).0
}

fn gamma(theta: &[f64]) -> f64 {
    sis::beta_gamma(theta).1
}

const SIS_DERIVED: [DerivedQuantity; 2] = [
    DerivedQuantity {
        name: "beta",
        f: beta,
    },
    DerivedQuantity {
        name: "gamma",
        f: gamma,
    },
];

pub fn derived_quantities(kind: ModelKind) -> &'static [DerivedQuantity] {
    match kind {
        ModelKind::Sis => &SIS_DERIVED,
        ModelKind::Hpv => &[],
    }
}

pub fn output_names(kind: ModelKind) -> Vec<String> {
    match kind {
        ModelKind::Sis => sis::sis_case_study_targets()
            .names()
            .map(String::from)
            .collect(),
        ModelKind::Hpv => hpv::output_names(),
    }
}

/// Everything one calibration needs, fully validated.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub prior: JointPrior,
    pub proposal: ProposalSpec,
    pub options: SamplerOptions,
    pub targets: TargetSet,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone)]
pub struct PriorSet {
    pub id: String,
    pub prior: JointPrior,
    pub proposal: ProposalSpec,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: RunSpec,
    pub prior_sets: Vec<PriorSet>,
    pub parameters: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunSpec,
    pub sweep: Option<SweepSpec>,
}

impl LoadedConfig {
    pub fn sweep(&self) -> Result<&SweepSpec> {
        self.sweep
            .as_ref()
            .ok_or_else(|| AppError::config("config has no [sensitivity] section"))
    }
}

/// Reads, parses and validates a config file. Every referenced file is
/// read here so that no computation starts on an invalid config.
pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::config(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| AppError::config(format!("{}: {}", path.display(), e.message())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let output_root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
    resolve(raw, &base_dir, output_root.as_deref())
}

pub fn parse_str(text: &str, base_dir: &Path) -> Result<LoadedConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| AppError::config(e.message().to_string()))?;
    resolve(raw, base_dir, None)
}

pub fn resolve(
    raw: RawConfig,
    base_dir: &Path,
    output_root: Option<&Path>,
) -> Result<LoadedConfig> {
    let model = resolve_model(&raw, base_dir)?;
    let names = model.parameter_names();

    let prior = resolve_priors(&raw.priors, raw.default_prior.as_ref(), &names)?;
    let proposal = resolve_proposal(&raw.proposal, &raw.proposal.scales, &prior)?;
    let options = resolve_sampler(&raw.sampler)?;

    if raw.seeds.len() < 2 {
        return Err(AppError::config(format!(
            "seeds: convergence diagnostics need at least 2 chains, got {}",
            raw.seeds.len()
        )));
    }
    if options.recorded_len() < MIN_RECORDED {
        return Err(AppError::config(format!(
            "sampler: {} recorded draws per chain after burn-in and thinning; at least {MIN_RECORDED} are needed",
            options.recorded_len()
        )));
    }
    bayescal_core::sampler::check_seeds(&raw.seeds)
        .map_err(|e| AppError::config(format!("seeds: {e}")))?;
    check_thresholds(&raw.diagnostics)?;

    let targets_path = base_dir.join(&raw.targets);
    let targets = io::read_targets_csv(&targets_path)
        .map_err(|e| AppError::config(format!("targets: {e}")))?;
    check_targets(&model, &targets)?;

    if raw.output.as_os_str().is_empty() {
        return Err(AppError::config("output: path is empty"));
    }
    let output = match output_root {
        // Keep outputs under the root even when the config walks up with `..`.
        Some(root) => root.join(
            raw.output
                .components()
                .filter(|c| !matches!(c, Component::ParentDir | Component::CurDir))
                .collect::<PathBuf>(),
        ),
        None => base_dir.join(&raw.output),
    };

    let run = RunSpec {
        model,
        prior,
        proposal,
        options,
        targets,
        output,
        seeds: raw.seeds.clone(),
        thresholds: raw.diagnostics,
    };

    let sweep = match &raw.sensitivity {
        None => None,
        Some(s) => Some(resolve_sweep(s, &raw, &run)?),
    };
    Ok(LoadedConfig { run, sweep })
}

fn resolve_model(raw: &RawConfig, base_dir: &Path) -> Result<ModelSpec> {
    match raw.model {
        ModelKind::Sis => {
            if raw.hpv.is_some() {
                return Err(AppError::config("hpv: section given but model = \"sis\""));
            }
            let cfg = raw.sis.unwrap_or_default();
            let m = SisModel::new(cfg).map_err(|e| AppError::config(format!("sis: {e}")))?;
            Ok(ModelSpec::Sis(m))
        }
        ModelKind::Hpv => {
            if raw.sis.is_some() {
                return Err(AppError::config("sis: section given but model = \"hpv\""));
            }
            let h = raw
                .hpv
                .clone()
                .ok_or_else(|| AppError::config("hpv: section is required for model = \"hpv\""))?;
            let mut cohort = CohortConfig::default();
            if let Some(v) = h.cohort_size {
                cohort.cohort_size = v;
            }
            if let Some(v) = h.start_age {
                cohort.start_age = v;
            }
            if let Some(v) = h.end_age {
                cohort.end_age = v;
            }
            if let Some(v) = h.seed {
                cohort.seed = v;
            }
            if let Some(v) = h.mortality {
                cohort.mortality = v;
            }
            cohort
                .validate()
                .map_err(|e| AppError::config(format!("hpv: {e}")))?;
            let baseline = match &h.baseline {
                Some(p) => io::read_baseline_csv(&base_dir.join(p))
                    .map_err(|e| AppError::config(format!("hpv.baseline: {e}")))?,
                None => hpv::synthetic_baseline(),
            };
            let map = h.multipliers.unwrap_or_else(MultiplierMap::case_study);
            let m = HpvModel::new(baseline, map, cohort)
                .map_err(|e| AppError::config(format!("hpv: {e}")))?;
            Ok(ModelSpec::Hpv(Box::new(m)))
        }
    }
}

fn resolve_sampler(s: &RawSampler) -> Result<SamplerOptions> {
    let burn_in = s.burn_in.unwrap_or(s.iterations / 5);
    SamplerOptions::new(s.iterations, burn_in, s.thinning)
        .map_err(|e| AppError::config(format!("sampler: {e}")))
}

fn check_thresholds(t: &Thresholds) -> Result<()> {
    if !(t.r_hat.is_finite() && t.r_hat >= 1.0) {
        return Err(AppError::config(format!(
            "diagnostics.r_hat: must be >= 1, got {}",
            t.r_hat
        )));
    }
    if !(t.correlation > 0.0 && t.correlation <= 1.0) {
        return Err(AppError::config(format!(
            "diagnostics.correlation: must be in (0, 1], got {}",
            t.correlation
        )));
    }
    if !(t.flat_ratio.is_finite() && t.flat_ratio > 0.0) {
        return Err(AppError::config(format!(
            "diagnostics.flat_ratio: must be > 0, got {}",
            t.flat_ratio
        )));
    }
    Ok(())
}

fn check_targets(model: &ModelSpec, targets: &TargetSet) -> Result<()> {
    let expected = model.output_names();
    let got: Vec<&str> = targets.names().collect();
    if got.len() != expected.len() {
        return Err(AppError::config(format!(
            "targets: model '{}' produces {} outputs but the targets file has {} rows",
            model.kind(),
            expected.len(),
            got.len()
        )));
    }
    for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
        if g != e {
            return Err(AppError::config(format!(
                "targets: row {} is '{g}', expected '{e}'",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Converts one raw entry; `at` names it in error messages.
pub fn prior_from_raw(raw: &RawPrior, name: &str, at: &str) -> Result<ParameterPrior> {
    let err = |msg: String| AppError::config(format!("{at} ({name}): {msg}"));
    let allowed: &[&str] = match raw.kind.as_str() {
        "normal" => &["mean", "sd"],
        "gamma" => &["shape", "rate"],
        "uniform" => &["lower", "upper"],
        "improper_uniform" => &["lower", "upper"],
        other => {
            return Err(err(format!(
                "kind: unknown prior kind '{other}' (expected normal, gamma, uniform or improper_uniform)"
            )))
        }
    };
    let fields = [
        ("mean", raw.mean),
        ("sd", raw.sd),
        ("shape", raw.shape),
        ("rate", raw.rate),
        ("lower", raw.lower),
        ("upper", raw.upper),
    ];
    for (field, value) in fields {
        if value.is_some() && !allowed.contains(&field) {
            return Err(err(format!(
                "{field}: does not apply to a {} prior",
                raw.kind
            )));
        }
    }
    let need = |field: &str, v: Option<f64>| {
        v.ok_or_else(|| err(format!("{field}: required for a {} prior", raw.kind)))
    };
    let positive = |field: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(err(format!("{field}: must be > 0, got {v}")))
        }
    };
    let finite = |field: &str, v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(format!("{field}: must be finite, got {v}")))
        }
    };

    let spec = match raw.kind.as_str() {
        "normal" => {
            let mean = finite("mean", need("mean", raw.mean)?)?;
            let sd = positive("sd", need("sd", raw.sd)?)?;
            PriorSpec::normal(mean, sd)
        }
        "gamma" => {
            let shape = positive("shape", need("shape", raw.shape)?)?;
            let rate = positive("rate", need("rate", raw.rate)?)?;
            PriorSpec::gamma(shape, rate)
        }
        "uniform" => {
            let lower = finite("lower", need("lower", raw.lower)?)?;
            let upper = finite("upper", need("upper", raw.upper)?)?;
            if upper <= lower {
                return Err(err(format!(
                    "upper: must exceed lower, got [{lower}, {upper}]"
                )));
            }
            PriorSpec::uniform(lower, upper)
        }
        _ => {
            let lower = need("lower", raw.lower)?;
            if lower.is_nan() || lower == f64::INFINITY {
                return Err(err(format!("lower: invalid bound {lower}")));
            }
            if let Some(u) = raw.upper {
                if u.is_nan() || u <= lower {
                    return Err(err(format!("upper: must exceed lower, got [{lower}, {u}]")));
                }
            }
            PriorSpec::improper_uniform(lower, raw.upper)
        }
    }
    .map_err(|e| err(e.to_string()))?;

    let mut prior = ParameterPrior::new(name, spec);
    if let Some([lo, hi]) = raw.init {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(err(format!(
                "init: needs finite lower < upper, got [{lo}, {hi}]"
            )));
        }
        prior = prior.with_init(lo, hi);
    } else if let PriorSpec::ImproperUniform { lower, upper } = spec {
        match upper {
            // Bounded improper priors start uniformly within their bounds.
            Some(u) if lower.is_finite() => prior = prior.with_init(lower, u),
            _ => {
                return Err(err(
                    "init: required for an improper prior without finite bounds".into(),
                ))
            }
        }
    }
    Ok(prior)
}

fn resolve_priors(
    entries: &[RawPrior],
    default: Option<&RawPrior>,
    names: &[String],
) -> Result<JointPrior> {
    let mut by_name: BTreeMap<&str, (usize, &RawPrior)> = BTreeMap::new();
    for (i, p) in entries.iter().enumerate() {
        let name = p
            .name
            .as_deref()
            .ok_or_else(|| AppError::config(format!("priors[{i}]: name is required")))?;
        if !names.iter().any(|n| n == name) {
            return Err(AppError::config(format!(
                "priors[{i}] ({name}): not a model parameter (expected one of {})",
                names.join(", ")
            )));
        }
        if by_name.insert(name, (i, p)).is_some() {
            return Err(AppError::config(format!(
                "priors[{i}] ({name}): duplicate prior"
            )));
        }
    }
    if let Some(d) = default {
        if d.name.is_some() {
            return Err(AppError::config("default_prior.name: not allowed"));
        }
    }
    let mut priors = Vec::with_capacity(names.len());
    for name in names {
        let p = match (by_name.get(name.as_str()), default) {
            (Some((i, raw)), _) => prior_from_raw(raw, name, &format!("priors[{i}]"))?,
            (None, Some(d)) => prior_from_raw(d, name, "default_prior")?,
            (None, None) => {
                return Err(AppError::config(format!(
                    "priors: no prior for parameter '{name}'"
                )))
            }
        };
        priors.push(p);
    }
    JointPrior::new(priors).map_err(|e| AppError::config(format!("priors: {e}")))
}

fn resolve_proposal(
    raw: &RawProposal,
    scales: &BTreeMap<String, f64>,
    prior: &JointPrior,
) -> Result<ProposalSpec> {
    let defaults =
        ProposalSpec::default_for(prior).map_err(|e| AppError::config(format!("proposal: {e}")))?;
    let mut values = defaults.scales().to_vec();
    for (name, &s) in scales {
        let j = prior.index_of(name).ok_or_else(|| {
            AppError::config(format!("proposal.scales.{name}: not a model parameter"))
        })?;
        if !(s.is_finite() && s >= 0.0) {
            return Err(AppError::config(format!(
                "proposal.scales.{name}: must be finite and >= 0, got {s}"
            )));
        }
        values[j] = s;
    }
    let block = raw.block_size.unwrap_or(prior.len());
    if block == 0 || block > prior.len() {
        return Err(AppError::config(format!(
            "proposal.block_size: must be in 1..={}, got {block}",
            prior.len()
        )));
    }
    ProposalSpec::new(values, block).map_err(|e| AppError::config(format!("proposal: {e}")))
}

fn resolve_sweep(s: &RawSweep, raw: &RawConfig, base: &RunSpec) -> Result<SweepSpec> {
    if s.prior_sets.len() < 2 {
        return Err(AppError::config(format!(
            "sensitivity.prior_sets: a sweep needs at least 2 prior sets, got {}",
            s.prior_sets.len()
        )));
    }
    let names = base.model.parameter_names();
    for p in &s.parameters {
        if !names.contains(p) {
            return Err(AppError::config(format!(
                "sensitivity.parameters: '{p}' is not a model parameter"
            )));
        }
    }
    let mut prior_sets = Vec::with_capacity(s.prior_sets.len());
    for (k, set) in s.prior_sets.iter().enumerate() {
        let at = format!("sensitivity.prior_sets[{k}]");
        if set.id.is_empty()
            || !set
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(AppError::config(format!(
                "{at}.id: must be non-empty and use [A-Za-z0-9._-], got '{}'",
                set.id
            )));
        }
        if s.prior_sets[..k].iter().any(|o| o.id == set.id) {
            return Err(AppError::config(format!(
                "{at}.id: duplicate id '{}'",
                set.id
            )));
        }
        let mut entries = raw.priors.clone();
        for (i, p) in set.priors.iter().enumerate() {
            let name = p
                .name
                .as_deref()
                .ok_or_else(|| AppError::config(format!("{at}.priors[{i}]: name is required")))?;
            if !names.iter().any(|n| n == name) {
                return Err(AppError::config(format!(
                    "{at}.priors[{i}] ({name}): not a model parameter"
                )));
            }
            entries.retain(|e| e.name.as_deref() != Some(name));
            entries.push(p.clone());
        }
        let prior = resolve_priors(&entries, raw.default_prior.as_ref(), &names)
            .map_err(|e| AppError::config(format!("{at}: {e}")))?;
        let mut scales = raw.proposal.scales.clone();
        scales.extend(set.scales.iter().map(|(k, v)| (k.clone(), *v)));
        let proposal = resolve_proposal(&raw.proposal, &scales, &prior)
            .map_err(|e| AppError::config(format!("{at}: {e}")))?;
        prior_sets.push(PriorSet {
            id: set.id.clone(),
            prior,
            proposal,
        });
    }
    let parameters = if s.parameters.is_empty() {
        names
    } else {
        s.parameters.clone()
    };
    Ok(SweepSpec {
        base: base.clone(),
        prior_sets,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_targets(dir: &Path) {
        std::fs::write(
            dir.join("targets.csv"),
            "name,mean,sd,units\nP(infected),0.6,0.01,probability\nP(susceptible),0.4,0.01,probability\n",
        )
        .unwrap();
    }

    const BASE: &str = r#"
model = "sis"
targets = "targets.csv"
output = "out"
seeds = [1, 2, 3]

[sampler]
iterations = 1000

[[priors]]
name = "c"
kind = "normal"
mean = 9.0
sd = 1.0

[[priors]]
name = "p"
kind = "normal"
mean = 0.06
sd = 0.01

[[priors]]
name = "d"
kind = "improper_uniform"
lower = 0.0
upper = 100.0
init = [2.0, 10.0]
"#;

    fn load_str(text: &str) -> Result<LoadedConfig> {
        let dir = tempfile::tempdir().unwrap();
        write_targets(dir.path());
        parse_str(text, dir.path())
    }

    #[test]
    fn base_config_resolves() {
        let c = load_str(BASE).unwrap();
        assert_eq!(c.run.prior.len(), 3);
        assert_eq!(c.run.options.burn_in, 200);
        assert_eq!(c.run.options.thinning, 10);
        assert_eq!(c.run.proposal.block_size(), 3);
        assert!((c.run.proposal.scales()[0] - 0.05).abs() < 1e-12);
        assert!(c.run.output.ends_with("out"));
        assert!(c.sweep.is_none());
    }

    #[test]
    fn negative_sd_names_the_field() {
        let text = BASE.replace("sd = 1.0", "sd = -1.0");
        let e = load_str(&text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("sd") && msg.contains("priors[0]"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("[sampler]", "[sampler]\nwarmup = 3");
        assert!(load_str(&text).is_err());
        let text = format!("colour = 1\n{BASE}");
        assert!(load_str(&text).is_err());
    }

    #[test]
    fn missing_targets_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = parse_str(BASE, dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }

    #[test]
    fn output_root_override() {
        let dir = tempfile::tempdir().unwrap();
        write_targets(dir.path());
        let raw: RawConfig = toml::from_str(BASE).unwrap();
        let root = Path::new("/elsewhere");
        let c = resolve(raw, dir.path(), Some(root)).unwrap();
        assert_eq!(c.run.output, root.join("out"));
        let mut raw: RawConfig = toml::from_str(BASE).unwrap();
        raw.output = PathBuf::from("../runs/./x");
        let c = resolve(raw, dir.path(), Some(root)).unwrap();
        assert_eq!(c.run.output, root.join("runs/x"));
    }

    #[test]
    fn sweep_of_one_is_rejected() {
        let text = format!(
            "{BASE}\n[sensitivity]\n[[sensitivity.prior_sets]]\nid = \"a\"\npriors = [{{ name = \"c\", kind = \"normal\", mean = 9.0, sd = 2.0 }}]\n"
        );
        let e = load_str(&text).unwrap_err();
        assert!(e.to_string().contains("at least 2"), "{e}");
    }

    #[test]
    fn sweep_overrides_priors_and_scales() {
        let text = format!(
            "{BASE}\n[sensitivity]\nparameters = [\"c\"]\n\
             [[sensitivity.prior_sets]]\nid = \"a\"\npriors = [{{ name = \"c\", kind = \"normal\", mean = 9.0, sd = 2.0 }}]\nscales = {{ c = 0.1 }}\n\
             [[sensitivity.prior_sets]]\nid = \"b\"\n"
        );
        let c = load_str(&text).unwrap();
        let s = c.sweep().unwrap();
        assert_eq!(s.prior_sets.len(), 2);
        assert_eq!(
            s.prior_sets[0].prior.priors()[0].spec,
            PriorSpec::Normal {
                mu: 9.0,
                sigma: 2.0
            }
        );
        assert_eq!(s.prior_sets[0].proposal.scales()[0], 0.1);
        assert_eq!(s.prior_sets[1].prior, c.run.prior);
    }

    #[test]
    fn default_prior_fills_missing() {
        let text = BASE.replace(
            "[[priors]]\nname = \"p\"\nkind = \"normal\"\nmean = 0.06\nsd = 0.01\n",
            "",
        ) + "\n[default_prior]\nkind = \"uniform\"\nlower = 0.0\nupper = 1.0\n";
        let c = load_str(&text).unwrap();
        assert_eq!(
            c.run.prior.priors()[1].spec,
            PriorSpec::Uniform { a: 0.0, b: 1.0 }
        );
    }

    #[test]
    fn unbounded_improper_needs_init() {
        let text = BASE.replace("upper = 100.0\ninit = [2.0, 10.0]\n", "");
        let e = load_str(&text).unwrap_err();
        assert!(e.to_string().contains("init"), "{e}");
    }

    #[test]
    fn irrelevant_field_rejected() {
        let text = BASE.replace("mean = 9.0", "mean = 9.0\nshape = 2.0");
        let e = load_str(&text).unwrap_err();
        assert!(e.to_string().contains("shape"), "{e}");
    }
}
