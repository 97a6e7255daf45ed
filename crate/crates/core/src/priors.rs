//! Per-parameter priors and the independent joint prior.
//!
//! Gamma priors use the shape/rate parameterization throughout.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::special::{gamma_p, ln_gamma, ln_sqrt_two_pi, normal_cdf};
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Flat, unnormalized density on `[lower, upper]` (`upper` may be absent).
    ImproperUniform {
        lower: f64,
        upper: Option<f64>,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
}

impl PriorSpec {
    pub fn improper_uniform(lower: f64, upper: Option<f64>) -> Result<Self> {
        Self::ImproperUniform { lower, upper }.validated()
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::Uniform { a, b }.validated()
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Normal { mu, sigma }.validated()
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::Gamma { shape, rate }.validated()
    }

    /// Returns `self` if its parameters are valid.
    pub fn validated(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidPrior(msg));
        match self {
            Self::ImproperUniform { lower, upper } => {
                if lower.is_nan() || lower == f64::INFINITY {
                    return bad(format!("improper uniform lower bound {lower} is invalid"));
                }
                if let Some(u) = upper {
                    if u.is_nan() || u <= lower {
                        return bad(format!(
                            "improper uniform needs lower < upper, got [{lower}, {u}]"
                        ));
                    }
                }
            }
            Self::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("uniform needs finite a < b, got ({a}, {b})"));
                }
            }
            Self::Normal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return bad(format!(
                        "normal needs finite mu and sigma > 0, got ({mu}, {sigma})"
                    ));
                }
            }
            Self::Gamma { shape, rate } => {
                if !(shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0) {
                    return bad(format!(
                        "gamma needs shape > 0 and rate > 0, got ({shape}, {rate})"
                    ));
                }
            }
        }
        Ok(self)
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, Self::ImproperUniform { .. })
    }

    /// Closed support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::ImproperUniform { lower, upper } => (lower, upper.unwrap_or(f64::INFINITY)),
            Self::Uniform { a, b } => (a, b),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Natural log of the density at `x`; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Self::ImproperUniform { lower, upper } => {
                if x >= lower && upper.is_none_or(|u| x <= u) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Uniform { a, b } => {
                if (a..=b).contains(&x) {
                    -log(b - a)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Normal { mu, sigma } => {
                let z = (x - mu) / sigma;
                -log(sigma) - ln_sqrt_two_pi() - 0.5 * z * z
            }
            Self::Gamma { shape, rate } => {
                if x < 0.0 || x.is_infinite() {
                    return f64::NEG_INFINITY;
                }
                if x == 0.0 {
                    return match shape {
                        s if s < 1.0 => f64::INFINITY,
                        1.0 => log(rate),
                        _ => f64::NEG_INFINITY,
                    };
                }
                shape * log(rate) - ln_gamma(shape) + (shape - 1.0) * log(x) - rate * x
            }
        }
    }

    /// CDF of a proper prior; `None` for improper ones.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        Some(match *self {
            Self::ImproperUniform { .. } => return None,
            Self::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Self::Normal { mu, sigma } => normal_cdf((x - mu) / sigma),
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_p(shape, rate * x)
                }
            }
        })
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Self::ImproperUniform { .. } => None,
            Self::Uniform { a, b } => Some(0.5 * (a + b)),
            Self::Normal { mu, .. } => Some(mu),
            Self::Gamma { shape, rate } => Some(shape / rate),
        }
    }

    pub fn sd(&self) -> Option<f64> {
        match *self {
            Self::ImproperUniform { .. } => None,
            Self::Uniform { a, b } => Some((b - a) / sqrt(12.0)),
            Self::Normal { sigma, .. } => Some(sigma),
            Self::Gamma { shape, rate } => Some(sqrt(shape) / rate),
        }
    }

    /// Draws from a proper prior. Improper priors need initialization
    /// bounds; see [`ParameterPrior::sample`].
    pub fn sample(&self, rng: &mut Rng) -> Result<f64> {
        match *self {
            Self::ImproperUniform { .. } => Err(Error::Config(
                "improper uniform prior cannot be sampled without initialization bounds".into(),
            )),
            Self::Uniform { a, b } => Ok(a + (b - a) * rng.random::<f64>()),
            Self::Normal { mu, sigma } => Ok(Normal::new(mu, sigma)
                .map_err(|e| Error::InvalidPrior(format!("{e}")))?
                .sample(rng)),
            Self::Gamma { shape, rate } => Ok(Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::InvalidPrior(format!("{e}")))?
                .sample(rng)),
        }
    }
}

/// A named prior plus optional bounds used only to draw chain starting
/// points (required for improper priors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPrior {
    pub name: String,
    pub spec: PriorSpec,
    #[serde(default)]
    pub init: Option<(f64, f64)>,
}

impl ParameterPrior {
    pub fn new(name: impl Into<String>, spec: PriorSpec) -> Self {
        Self {
            name: name.into(),
            spec,
            init: None,
        }
    }

    pub fn with_init(mut self, lower: f64, upper: f64) -> Self {
        self.init = Some((lower, upper));
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validated()?;
        if let Some((lo, hi)) = self.init {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidPrior(format!(
                    "'{}': initialization bounds need finite lower < upper, got [{lo}, {hi}]",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Starting-point draw: uniform within the initialization bounds when
    /// present, otherwise from the prior itself.
    pub fn sample(&self, rng: &mut Rng) -> Result<f64> {
        match (self.init, self.spec) {
            (Some((lo, hi)), _) => Ok(lo + (hi - lo) * rng.random::<f64>()),
            (None, spec @ PriorSpec::ImproperUniform { .. }) => Err(Error::Config(format!(
                "parameter '{}' has an improper prior {spec:?} and no initialization bounds",
                self.name
            ))),
            (None, spec) => spec.sample(rng),
        }
    }

    /// Scale reference for proposals and flatness checks: the prior sd, or
    /// for improper priors the width of the finite bounds (falling back to
    /// the initialization bounds).
    pub fn scale_reference(&self) -> Option<f64> {
        match self.spec {
            PriorSpec::ImproperUniform { lower, upper } => match (lower, upper) {
                (l, Some(u)) if l.is_finite() => Some(u - l),
                _ => self.init.map(|(lo, hi)| hi - lo),
            },
            PriorSpec::Uniform { a, b } => Some(b - a),
            spec => spec.sd(),
        }
    }
}

/// Product of independent one-dimensional priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPrior {
    priors: Vec<ParameterPrior>,
}

impl JointPrior {
    pub fn new(priors: Vec<ParameterPrior>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::Config(
                "joint prior needs at least one parameter".into(),
            ));
        }
        for (i, p) in priors.iter().enumerate() {
            p.validate()?;
            if priors[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!(
                    "duplicate parameter name '{}'",
                    p.name
                )));
            }
        }
        Ok(Self { priors })
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn priors(&self) -> &[ParameterPrior] {
        &self.priors
    }

    pub fn names(&self) -> Arc<[String]> {
        self.priors.iter().map(|p| p.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.priors.iter().position(|p| p.name == name)
    }

    /// Sum of per-parameter log densities; `-inf` as soon as any factor is.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.priors.len() {
            return Err(Error::Alignment(format!(
                "{} parameter values for {} priors",
                theta.len(),
                self.priors.len()
            )));
        }
        let mut total = 0.0;
        for (p, &x) in self.priors.iter().zip(theta) {
            let lp = p.spec.log_density(x);
            if lp == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += lp;
        }
        Ok(total)
    }

    /// One starting-point draw per parameter.
    pub fn sample_init(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        self.priors.iter().map(|p| p.sample(rng)).collect()
    }
}
