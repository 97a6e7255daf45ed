//! Strain-stratified HPV natural-history cohort model.
//!
//! Women enter at `start_age` in Well and move monthly through HPV
//! infection, CIN1, CIN2/3 and three cancer stages, each pre-cancer state
//! tagged with one of four strains. Calibrated parameters are multipliers
//! on a baseline table of monthly transition probabilities.

pub mod baseline;
pub mod cohort;
pub mod states;

use alloc::string::String;
use alloc::vec::Vec;

pub use baseline::{
    apply_multipliers, synthetic_baseline, synthetic_baseline_rows, BaselineRow, BaselineTable,
    Edge, EffectiveTable, MultiplierMap, MultiplierSpec, StrainSelector,
};
pub use cohort::{
    case_study_targets, output_names, simulate_cohort, state_census, CohortConfig,
    CohortSimulation, MortalityBand, N_OUTPUTS,
};
pub use states::{HealthState, Strain, N_STATES, STRAINS};

use crate::model::Model;
use crate::targets::ModelOutputs;
use crate::Result;

/// The cohort model as a function of its multiplier vector.
#[derive(Debug, Clone)]
pub struct HpvModel {
    pub baseline: BaselineTable,
    pub multipliers: MultiplierMap,
    pub config: CohortConfig,
}

impl HpvModel {
    pub fn new(
        baseline: BaselineTable,
        multipliers: MultiplierMap,
        config: CohortConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            baseline,
            multipliers,
            config,
        })
    }

    /// Synthetic baseline, the 26 case-study multipliers and `config`.
    pub fn case_study(config: CohortConfig) -> Result<Self> {
        Self::new(synthetic_baseline(), MultiplierMap::case_study(), config)
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.multipliers.names().map(String::from).collect()
    }

    pub fn simulate(&self, multipliers: &[f64]) -> Result<CohortSimulation> {
        let table = apply_multipliers(&self.baseline, &self.multipliers, multipliers)?;
        simulate_cohort(&table, &self.config)
    }
}

impl Model for HpvModel {
    fn evaluate(&self, theta: &[f64]) -> Result<ModelOutputs> {
        Ok(self.simulate(theta)?.outputs)
    }

    fn id(&self) -> &str {
        "hpv"
    }
}
