//! Calibration targets and the Gaussian goodness-of-fit.
//!
//! Each target `k` is an independent `N(d_k, σ_k)` density. A model output
//! `x_k` is scored by `ln[f_k(x_k) / f_k(d_k)]`, i.e. the log density
//! normalized at its mode, so the log-likelihood is never positive and a
//! perfect fit scores exactly zero. The GOF statistic is `-2` times that sum,
//! which reduces to the sum of squared z-scores and is `χ²_K` distributed
//! when the model is correct.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::log;
use serde::{Deserialize, Serialize};

use crate::special::{chi_square_sf, ln_sqrt_two_pi};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub units: String,
}

impl Target {
    pub fn new(name: impl Into<String>, mean: f64, sd: f64) -> Result<Self> {
        Self::with_units(name, mean, sd, "")
    }

    pub fn with_units(
        name: impl Into<String>,
        mean: f64,
        sd: f64,
        units: impl Into<String>,
    ) -> Result<Self> {
        let name = name.into();
        if !mean.is_finite() {
            return Err(Error::Parse(format!(
                "target '{name}': mean must be finite"
            )));
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::Parse(format!(
                "target '{name}': sd must be finite and > 0, got {sd}"
            )));
        }
        Ok(Self {
            name,
            mean,
            sd,
            units: units.into(),
        })
    }

    /// Log of the `N(mean, sd)` density at `x`.
    pub fn ln_density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -log(self.sd) - ln_sqrt_two_pi() - 0.5 * z * z
    }

    pub fn z_score(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

/// An ordered, non-empty set of uniquely named targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Target>", into = "Vec<Target>")]
pub struct TargetSet {
    targets: Vec<Target>,
}

impl TargetSet {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Parse("target set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for (row, t) in targets.iter().enumerate() {
            if !(t.sd.is_finite() && t.sd > 0.0) {
                return Err(Error::Parse(format!(
                    "row {} ('{}'): sd must be finite and > 0, got {}",
                    row + 1,
                    t.name,
                    t.sd
                )));
            }
            if !t.mean.is_finite() {
                return Err(Error::Parse(format!(
                    "row {} ('{}'): mean must be finite",
                    row + 1,
                    t.name
                )));
            }
            if !seen.insert(t.name.as_str()) {
                return Err(Error::Parse(format!("duplicate target name '{}'", t.name)));
            }
        }
        Ok(Self { targets })
    }

    /// Builds a target set from `(name, mean, sd, units)` rows, reporting the
    /// first invalid row by its 1-based position and name.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64, f64, &'a str)>,
    {
        let mut targets = Vec::new();
        for (i, (name, mean, sd, units)) in rows.into_iter().enumerate() {
            let t = Target::with_units(name, mean, sd, units)
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
            targets.push(t);
        }
        Self::new(targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Target> {
        self.targets.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.targets.iter().map(|t| t.name.as_str())
    }
}

impl TryFrom<Vec<Target>> for TargetSet {
    type Error = Error;
    fn try_from(v: Vec<Target>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TargetSet> for Vec<Target> {
    fn from(t: TargetSet) -> Self {
        t.targets
    }
}

/// Model predictions aligned index-for-index with a [`TargetSet`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelOutputs(pub Vec<f64>);

impl ModelOutputs {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ModelOutputs {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn check_aligned(outputs: &ModelOutputs, targets: &TargetSet) -> Result<()> {
    if outputs.len() != targets.len() {
        return Err(Error::Alignment(format!(
            "{} model outputs for {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if let Some((i, x)) = outputs
        .values()
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite())
    {
        return Err(Error::Evaluation(format!(
            "output {i} ('{}') is not finite: {x}",
            targets.targets[i].name
        )));
    }
    Ok(())
}

/// `GOF_total = -2 Σ_k ln[f_k(x_k) / f_k(d_k)]`, evaluated from the log
/// densities themselves.
pub fn gof_total(outputs: &ModelOutputs, targets: &TargetSet) -> Result<f64> {
    check_aligned(outputs, targets)?;
    let sum: f64 = outputs
        .values()
        .iter()
        .zip(targets.iter())
        .map(|(&x, t)| t.ln_density(x) - t.ln_density(t.mean))
        .sum();
    Ok((-2.0 * sum).max(0.0))
}

/// The reduced form `Σ_k ((x_k - d_k) / σ_k)²` of [`gof_total`].
pub fn gof_z_squared(outputs: &ModelOutputs, targets: &TargetSet) -> Result<f64> {
    check_aligned(outputs, targets)?;
    Ok(outputs
        .values()
        .iter()
        .zip(targets.iter())
        .map(|(&x, t)| {
            let z = t.z_score(x);
            z * z
        })
        .sum())
}

/// Mode-normalized Gaussian log-likelihood, `-GOF/2`. Never positive.
pub fn log_likelihood(outputs: &ModelOutputs, targets: &TargetSet) -> Result<f64> {
    check_aligned(outputs, targets)?;
    Ok(outputs
        .values()
        .iter()
        .zip(targets.iter())
        .map(|(&x, t)| {
            let z = t.z_score(x);
            -0.5 * z * z
        })
        .sum())
}

/// Upper-tail probability `P(χ²_dof > gof)`.
pub fn chi_square_p_value(gof: f64, dof: u32) -> Result<f64> {
    if gof.is_nan() || gof < 0.0 {
        return Err(Error::Domain(format!("GOF must be >= 0, got {gof}")));
    }
    if dof == 0 {
        return Err(Error::Domain("degrees of freedom must be positive".into()));
    }
    Ok(chi_square_sf(gof, dof as f64).clamp(0.0, 1.0))
}
