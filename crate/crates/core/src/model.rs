//! The contract between calibrated models and the sampler.

use alloc::vec::Vec;

use crate::{ModelOutputs, Result};

/// A deterministic map from a parameter vector to outputs aligned with a
/// target set. Stochastic simulators fix their seed internally so that the
/// same parameters always give the same outputs.
pub trait Model {
    fn evaluate(&self, theta: &[f64]) -> Result<ModelOutputs>;

    /// Identifier recorded in chain metadata.
    fn id(&self) -> &str {
        "custom"
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn evaluate(&self, theta: &[f64]) -> Result<ModelOutputs> {
        (**self).evaluate(theta)
    }

    fn id(&self) -> &str {
        (**self).id()
    }
}

/// Adapts a closure into a [`Model`].
pub struct FnModel<F> {
    f: F,
    id: &'static str,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    pub fn new(id: &'static str, f: F) -> Self {
        Self { f, id }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn evaluate(&self, theta: &[f64]) -> Result<ModelOutputs> {
        (self.f)(theta).map(ModelOutputs)
    }

    fn id(&self) -> &str {
        self.id
    }
}
