//! Convergence and identifiability diagnostics over recorded chains.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::priors::{JointPrior, ParameterPrior, PriorSpec};
use crate::sampler::{Chain, ChainSet};
use crate::special::f_quantile;
use crate::stats::{mean, pearson, sd, variance};
use crate::targets::{gof_total, TargetSet};
use crate::{Error, Result, Rng};

const MIN_GELMAN_LENGTH: usize = 10;
const MIN_SUMMARY_SAMPLES: usize = 100;
const SUMMARY_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GelmanRubinResult {
    pub point_estimate: f64,
    /// 97.5% upper bound of the potential scale reduction factor.
    pub upper_ci: f64,
    pub within: f64,
    pub between: f64,
}

fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

/// Potential scale reduction factor of one parameter.
///
/// Uses the two-variance estimator with the sampling-variability
/// correction of the pooled variance: with `n` draws in each of `m` chains,
/// `V = (n-1)/n·W + (1+1/m)·B/n` and
/// `R̂ = sqrt(df_adj · (R2_fixed + R2_random))`, where
/// `df_adj = (d+3)/(d+1)` and `d = 2V²/Var(V)`. The upper bound replaces
/// `R2_random` by its 97.5% F quantile on `(m-1, 2W²/Var(W))` degrees of
/// freedom.
pub fn gelman_rubin(chains: &ChainSet, parameter: usize) -> Result<GelmanRubinResult> {
    let traces: Vec<Vec<f64>> = chains
        .chains()
        .iter()
        .map(|c| c.column(parameter))
        .collect();
    gelman_rubin_traces(&traces)
}

pub fn gelman_rubin_traces(traces: &[Vec<f64>]) -> Result<GelmanRubinResult> {
    let m = traces.len();
    if m < 2 {
        return Err(Error::InsufficientChains {
            required: 2,
            got: m,
        });
    }
    let n = traces[0].len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(Error::Alignment(
            "chains have unequal recorded lengths".into(),
        ));
    }
    if n < MIN_GELMAN_LENGTH {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_GELMAN_LENGTH} recorded draws per chain, got {n}"
        )));
    }
    let (nf, mf) = (n as f64, m as f64);
    let s2: Vec<f64> = traces.iter().map(|t| variance(t)).collect();
    let xbar: Vec<f64> = traces.iter().map(|t| mean(t)).collect();
    let w = mean(&s2);
    if !(w > 0.0) {
        return Err(Error::DegenerateChain("zero within-chain variance".into()));
    }
    let b = nf * variance(&xbar);

    let var_w = variance(&s2) / mf;
    let var_b = 2.0 * b * b / (mf - 1.0);
    let xbar2: Vec<f64> = xbar.iter().map(|x| x * x).collect();
    let cov_wb = nf / mf * (covariance(&s2, &xbar2) - 2.0 * mean(&xbar) * covariance(&s2, &xbar));

    let v = (nf - 1.0) / nf * w + (1.0 + 1.0 / mf) * b / nf;
    let var_v = ((nf - 1.0) * (nf - 1.0) * var_w
        + (1.0 + 1.0 / mf) * (1.0 + 1.0 / mf) * var_b
        + 2.0 * (nf - 1.0) * (1.0 + 1.0 / mf) * cov_wb)
        / (nf * nf);
    let df_v = if var_v > 0.0 {
        2.0 * v * v / var_v
    } else {
        f64::INFINITY
    };
    let df_adj = if df_v.is_finite() {
        (df_v + 3.0) / (df_v + 1.0)
    } else {
        1.0
    };
    let w_df = if var_w > 0.0 {
        2.0 * w * w / var_w
    } else {
        f64::INFINITY
    };

    let r2_fixed = (nf - 1.0) / nf;
    let r2_random = (1.0 + 1.0 / mf) * (1.0 / nf) * (b / w);
    let point = sqrt(df_adj * (r2_fixed + r2_random));
    let q = f_quantile(0.975, mf - 1.0, w_df);
    let upper = sqrt(df_adj * (r2_fixed + q * r2_random)).max(point);
    Ok(GelmanRubinResult {
        point_estimate: point,
        upper_ci: upper,
        within: w,
        between: b,
    })
}

/// Normalized sample autocorrelation of `trace` at lags `0..=max_lag`.
pub fn autocorrelation_trace(trace: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = trace.len();
    if n <= max_lag {
        return Err(Error::InsufficientData(format!(
            "autocorrelation at lag {max_lag} needs more than {max_lag} draws, got {n}"
        )));
    }
    let m = mean(trace);
    let c0: f64 = trace.iter().map(|x| (x - m) * (x - m)).sum();
    if !(c0 > 0.0) {
        return Err(Error::DegenerateChain(
            "constant trace has no autocorrelation".into(),
        ));
    }
    Ok((0..=max_lag)
        .map(|k| {
            let ck: f64 = trace[..n - k]
                .iter()
                .zip(&trace[k..])
                .map(|(a, b)| (a - m) * (b - m))
                .sum();
            if k == 0 {
                1.0
            } else {
                (ck / c0).clamp(-1.0, 1.0)
            }
        })
        .collect())
}

pub fn autocorrelation(chain: &Chain, parameter: usize, max_lag: usize) -> Result<Vec<f64>> {
    autocorrelation_trace(&chain.column(parameter), max_lag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major `names.len()²` entries.
    pub values: Vec<f64>,
    /// Columns with zero variance; their off-diagonal entries are 0.
    pub degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.get(i, j))
    }
}

/// Pearson correlations between named columns of equal length.
pub fn correlation_matrix(names: Vec<String>, columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    if names.len() != columns.len() {
        return Err(Error::Alignment(format!(
            "{} names for {} columns",
            names.len(),
            columns.len()
        )));
    }
    let len = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::Alignment("columns have unequal lengths".into()));
    }
    if len < MIN_GELMAN_LENGTH {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least {MIN_GELMAN_LENGTH} draws, got {len}"
        )));
    }
    let k = columns.len();
    let degenerate: Vec<bool> = columns.iter().map(|c| !(variance(c) > 0.0)).collect();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        values[i * k + i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&columns[i], &columns[j]).unwrap_or(0.0);
            values[i * k + j] = r;
            values[j * k + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names,
        values,
        degenerate,
    })
}

/// Correlation matrix of one chain's parameters.
pub fn cross_correlation(chain: &Chain) -> Result<CorrelationMatrix> {
    let columns: Vec<Vec<f64>> = (0..chain.dim()).map(|j| chain.column(j)).collect();
    correlation_matrix(chain.names().to_vec(), &columns)
}

/// A function of the parameter vector tracked alongside the parameters,
/// such as `β = c·p`.
#[derive(Debug, Clone, Copy)]
pub struct DerivedQuantity {
    pub name: &'static str,
    pub f: fn(&[f64]) -> f64,
}

/// Correlation matrix of pooled draws over parameters and derived
/// quantities.
pub fn pooled_correlation(
    chains: &ChainSet,
    derived: &[DerivedQuantity],
) -> Result<CorrelationMatrix> {
    let mut names: Vec<String> = chains.names().to_vec();
    let mut columns: Vec<Vec<f64>> = (0..names.len()).map(|j| chains.pooled(j)).collect();
    for d in derived {
        names.push(String::from(d.name));
        columns.push(chains.pooled_derived(d.f));
    }
    correlation_matrix(names, &columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NuisanceStrategy {
    /// Hold the other parameters at these values (full-length vector; the
    /// profiled entry is overwritten).
    Fixed(Vec<f64>),
    /// Keep the best GOF over `draws` random nuisance vectors drawn from
    /// `prior` (initialization bounds apply for improper priors).
    BestOfDraws {
        draws: usize,
        prior: JointPrior,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub value: f64,
    /// Minimal GOF found; `inf` when every evaluation failed.
    pub gof: f64,
    pub best_theta: Option<Vec<f64>>,
}

/// Profile of the GOF along one parameter.
pub fn profile_likelihood<M: Model + ?Sized>(
    model: &M,
    targets: &TargetSet,
    parameter: usize,
    grid: &[f64],
    nuisance: &NuisanceStrategy,
) -> Result<Vec<ProfilePoint>> {
    if grid.is_empty() {
        return Err(Error::Domain("profile grid is empty".into()));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!(
            "profile grid value {x} is not finite"
        )));
    }
    let score = |theta: &[f64]| match model.evaluate(theta) {
        Ok(out) => gof_total(&out, targets).unwrap_or(f64::INFINITY),
        Err(e) => {
            log::debug!("profile evaluation failed at {theta:?}: {e}");
            f64::INFINITY
        }
    };
    match nuisance {
        NuisanceStrategy::Fixed(base) => {
            if parameter >= base.len() {
                return Err(Error::Alignment(format!(
                    "profiled index {parameter} outside a {}-parameter vector",
                    base.len()
                )));
            }
            Ok(grid
                .iter()
                .map(|&value| {
                    let mut theta = base.clone();
                    theta[parameter] = value;
                    let gof = score(&theta);
                    ProfilePoint {
                        value,
                        gof,
                        best_theta: gof.is_finite().then_some(theta),
                    }
                })
                .collect())
        }
        NuisanceStrategy::BestOfDraws { draws, prior, seed } => {
            if parameter >= prior.len() {
                return Err(Error::Alignment(format!(
                    "profiled index {parameter} outside a {}-parameter prior",
                    prior.len()
                )));
            }
            if *draws == 0 {
                return Err(Error::Domain(
                    "best-of-draws profiling needs at least one draw".into(),
                ));
            }
            let mut rng = Rng::seed_from_u64(*seed);
            grid.iter()
                .map(|&value| {
                    let mut best = ProfilePoint {
                        value,
                        gof: f64::INFINITY,
                        best_theta: None,
                    };
                    for _ in 0..*draws {
                        let mut theta = prior.sample_init(&mut rng)?;
                        theta[parameter] = value;
                        let gof = score(&theta);
                        if gof < best.gof {
                            best.gof = gof;
                            best.best_theta = Some(theta);
                        }
                    }
                    Ok(best)
                })
                .collect()
        }
    }
}

/// `max - min` of the profile's GOF values; `inf` if any point failed.
pub fn profile_range(curve: &[ProfilePoint]) -> f64 {
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.gof), hi.max(p.gof))
        });
    if hi.is_finite() {
        hi - lo
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub r_hat: f64,
    pub correlation: f64,
    pub flat_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            r_hat: 1.1,
            correlation: 0.9,
            flat_ratio: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    NotConverged,
    Correlated,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPair {
    pub a: String,
    pub b: String,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVerdict {
    pub name: String,
    pub r_hat: GelmanRubinResult,
    pub posterior_sd: f64,
    /// Posterior sd over the prior's reference sd; `None` when the prior has
    /// no finite scale.
    pub sd_ratio: Option<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonIdentifiabilityReport {
    pub thresholds: Thresholds,
    pub parameters: Vec<ParameterVerdict>,
    pub correlated_pairs: Vec<CorrelatedPair>,
    pub correlation: CorrelationMatrix,
}

impl NonIdentifiabilityReport {
    /// True when no parameter carries a flag.
    pub fn identified(&self) -> bool {
        self.parameters.iter().all(|p| p.flags.is_empty())
    }

    pub fn converged(&self) -> bool {
        self.parameters
            .iter()
            .all(|p| !p.flags.contains(&Flag::NotConverged))
    }

    /// Names of flagged parameters.
    pub fn flagged(&self) -> BTreeSet<&str> {
        self.parameters
            .iter()
            .filter(|p| !p.flags.is_empty())
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn verdict(&self, name: &str) -> Option<&ParameterVerdict> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Standard deviation of the prior used for the flatness ratio. Uniform
/// and bounded improper priors use `width/√12`; an unbounded improper prior
/// falls back to its initialization bounds.
pub fn prior_reference_sd(prior: &ParameterPrior) -> Option<f64> {
    const INV_SQRT_12: f64 = 0.288_675_134_594_812_9;
    match prior.spec {
        PriorSpec::ImproperUniform { .. } | PriorSpec::Uniform { .. } => {
            prior.scale_reference().map(|w| w * INV_SQRT_12)
        }
        spec => spec.sd(),
    }
}

/// Gathers R̂, pooled correlations and posterior/prior spread into one
/// report. Derived quantities enter the correlation screen only.
pub fn detect_nonidentifiability(
    chains: &ChainSet,
    priors: &JointPrior,
    thresholds: &Thresholds,
    derived: &[DerivedQuantity],
) -> Result<NonIdentifiabilityReport> {
    if chains.len() < 2 {
        return Err(Error::InsufficientChains {
            required: 2,
            got: chains.len(),
        });
    }
    if chains.names().as_ref() != priors.names().as_ref() {
        return Err(Error::Alignment(format!(
            "chains carry {:?} but priors {:?}",
            chains.names(),
            priors.names()
        )));
    }
    let correlation = pooled_correlation(chains, derived)?;
    let k = correlation.dim();
    let mut correlated_pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let r = correlation.get(i, j);
            if r.abs() > thresholds.correlation {
                correlated_pairs.push(CorrelatedPair {
                    a: correlation.names[i].clone(),
                    b: correlation.names[j].clone(),
                    correlation: r,
                });
            }
        }
    }

    let parameters = priors
        .priors()
        .iter()
        .enumerate()
        .map(|(j, prior)| {
            let r_hat = gelman_rubin(chains, j)?;
            let posterior_sd = sd(&chains.pooled(j));
            let sd_ratio = prior_reference_sd(prior).map(|s| posterior_sd / s);
            let mut flags = Vec::new();
            if r_hat.point_estimate > thresholds.r_hat {
                flags.push(Flag::NotConverged);
            }
            if correlated_pairs
                .iter()
                .any(|p| p.a == prior.name || p.b == prior.name)
            {
                flags.push(Flag::Correlated);
            }
            if sd_ratio.is_some_and(|r| r > thresholds.flat_ratio) {
                flags.push(Flag::Flat);
            }
            Ok(ParameterVerdict {
                name: prior.name.clone(),
                r_hat,
                posterior_sd,
                sd_ratio,
                flags,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(NonIdentifiabilityReport {
        thresholds: *thresholds,
        parameters,
        correlated_pairs,
        correlation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub lower: f64,
    pub upper: f64,
    pub prior_density: f64,
    pub posterior_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorPosteriorSummary {
    pub prior_mean: Option<f64>,
    pub prior_sd: Option<f64>,
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    /// `∫ min(prior, posterior)` over the shared grid, in `[0, 1]`.
    pub overlap: f64,
    pub bins: Vec<DensityBin>,
}

fn summary_grid(prior: &PriorSpec, samples: &[f64]) -> (f64, f64) {
    let (smin, smax) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let (slo, shi) = prior.support();
    let prior_range = match *prior {
        PriorSpec::ImproperUniform { .. } => None,
        PriorSpec::Uniform { a, b } => Some((a, b)),
        spec => match (spec.mean(), spec.sd()) {
            (Some(m), Some(s)) => Some(((m - 4.0 * s).max(slo), (m + 4.0 * s).min(shi))),
            _ => None,
        },
    };
    let (lo, hi) = match prior_range {
        Some((a, b)) => (smin.min(a), smax.max(b)),
        None => (smin, smax),
    };
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Binned prior and posterior densities on a shared grid plus their
/// overlap coefficient. Improper priors are drawn flat over the grid.
pub fn prior_posterior_summary(
    prior: &PriorSpec,
    samples: &[f64],
) -> Result<PriorPosteriorSummary> {
    if samples.len() < MIN_SUMMARY_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "prior/posterior summary needs at least {MIN_SUMMARY_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("posterior sample {x} is not finite")));
    }
    let (lo, hi) = summary_grid(prior, samples);
    let width = (hi - lo) / SUMMARY_BINS as f64;
    let mut counts = [0usize; SUMMARY_BINS];
    for &x in samples {
        let k = (((x - lo) / width) as usize).min(SUMMARY_BINS - 1);
        counts[k] += 1;
    }
    let n = samples.len() as f64;
    let mut overlap = 0.0;
    let bins: Vec<DensityBin> = (0..SUMMARY_BINS)
        .map(|k| {
            let lower = lo + k as f64 * width;
            let upper = if k + 1 == SUMMARY_BINS {
                hi
            } else {
                lo + (k + 1) as f64 * width
            };
            let prior_density = match (prior.cdf(upper), prior.cdf(lower)) {
                (Some(a), Some(b)) => (a - b).max(0.0) / width,
                _ => 1.0 / (hi - lo),
            };
            let posterior_density = counts[k] as f64 / n / width;
            overlap += prior_density.min(posterior_density) * width;
            DensityBin {
                lower,
                upper,
                prior_density,
                posterior_density,
            }
        })
        .collect();
    Ok(PriorPosteriorSummary {
        prior_mean: prior.mean(),
        prior_sd: prior.sd(),
        posterior_mean: mean(samples),
        posterior_sd: sd(samples),
        overlap: overlap.clamp(0.0, 1.0),
        bins,
    })
}
