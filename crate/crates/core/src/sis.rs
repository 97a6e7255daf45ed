//! Two-compartment susceptible-infected-susceptible ODE model.
//!
//! ```text
//! dS/dt = -β·S·I + γ·I
//! dI/dt =  β·S·I - γ·I        β = c·p,  γ = 1/d
//! ```
//!
//! The state is integrated with classical RK4, the step capped by the rates,
//! until the horizon
//! or until the per-step change in `I` drops below `equilibrium_tol`. The
//! endemic equilibrium `I* = 1 - γ/β` depends on `β/γ` only, so every pair
//! on the line `γ = β(1 - I*)` produces the same outputs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::targets::{ModelOutputs, Target, TargetSet};
use crate::{Error, Result};

/// Upper bound on `(β + γ)·dt`.
const MAX_RATE_STEP: f64 = 0.1;

/// Parameter names in the order the model expects them.
pub const PARAMETER_NAMES: [&str; 3] = ["c", "p", "d"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisParameters {
    /// Contact rate per time unit.
    pub c: f64,
    /// Transmission probability per contact.
    pub p: f64,
    /// Infectious period in time units.
    pub d: f64,
}

impl SisParameters {
    pub fn new(c: f64, p: f64, d: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!(
                "contact rate c must be > 0, got {c}"
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!(
                "transmission probability p must be in (0, 1], got {p}"
            )));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Domain(format!(
                "infectious period d must be > 0, got {d}"
            )));
        }
        Ok(Self { c, p, d })
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        match theta {
            &[c, p, d] => Self::new(c, p, d),
            _ => Err(Error::Alignment(format!(
                "SIS expects 3 parameters, got {}",
                theta.len()
            ))),
        }
    }

    pub fn beta(&self) -> f64 {
        self.c * self.p
    }

    pub fn gamma(&self) -> f64 {
        1.0 / self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SisSimConfig {
    pub s0: f64,
    pub i0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub equilibrium_tol: f64,
}

impl Default for SisSimConfig {
    fn default() -> Self {
        Self {
            s0: 0.99,
            i0: 0.01,
            dt: 0.01,
            horizon: 500.0,
            equilibrium_tol: 1e-10,
        }
    }
}

impl SisSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 >= 0.0 && self.i0 >= 0.0 && (self.s0 + self.i0 - 1.0).abs() < 1e-12) {
            return Err(Error::Config(format!(
                "s0 + i0 must equal 1 with both non-negative, got {} + {}",
                self.s0, self.i0
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if !(self.equilibrium_tol >= 0.0) {
            return Err(Error::Config(format!(
                "equilibrium_tol must be >= 0, got {}",
                self.equilibrium_tol
            )));
        }
        Ok(())
    }
}

/// One recorded integration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisState {
    pub t: f64,
    pub s: f64,
    pub i: f64,
}

fn integrate<F: FnMut(SisState)>(
    params: &SisParameters,
    config: &SisSimConfig,
    mut observe: F,
) -> Result<SisState> {
    config.validate()?;
    let beta = params.beta();
    let gamma = params.gamma();
    // Fast rates shrink the step so RK4 stays inside its stability region;
    // too large a step has spurious fixed points that can mimic the targets.
    let dt = config.dt.min(MAX_RATE_STEP / (beta + gamma));
    let deriv = |s: f64, i: f64| {
        let flow = beta * s * i - gamma * i;
        (-flow, flow)
    };

    let steps = libm::ceil(config.horizon / dt) as u64;
    let mut state = SisState {
        t: 0.0,
        s: config.s0,
        i: config.i0,
    };
    observe(state);
    for step in 1..=steps {
        let SisState { s, i, .. } = state;
        let (ks1, ki1) = deriv(s, i);
        let (ks2, ki2) = deriv(s + 0.5 * dt * ks1, i + 0.5 * dt * ki1);
        let (ks3, ki3) = deriv(s + 0.5 * dt * ks2, i + 0.5 * dt * ki2);
        let (ks4, ki4) = deriv(s + dt * ks3, i + dt * ki3);
        let ds = dt / 6.0 * (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4);
        let di = dt / 6.0 * (ki1 + 2.0 * ki2 + 2.0 * ki3 + ki4);
        state = SisState {
            t: step as f64 * dt,
            s: s + ds,
            i: i + di,
        };
        if !(state.s.is_finite() && state.i.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite SIS state at step {step} (t = {})",
                state.t
            )));
        }
        observe(state);
        if di.abs() < config.equilibrium_tol {
            break;
        }
    }
    Ok(state)
}

/// Runs the model and returns `(P(infected), P(susceptible))` at
/// termination.
pub fn simulate_sis(params: &SisParameters, config: &SisSimConfig) -> Result<ModelOutputs> {
    let end = integrate(params, config, |_| {})?;
    Ok(ModelOutputs(vec![end.i, end.s]))
}

/// Same integration as [`simulate_sis`], keeping every step.
pub fn simulate_sis_trajectory(
    params: &SisParameters,
    config: &SisSimConfig,
) -> Result<Vec<SisState>> {
    let mut out = Vec::new();
    integrate(params, config, |s| out.push(s))?;
    Ok(out)
}

/// Endemic equilibrium `max(0, 1 - γ/β)`.
pub fn sis_equilibrium_analytic(beta: f64, gamma: f64) -> Result<f64> {
    if !(beta > 0.0 && gamma > 0.0) {
        return Err(Error::Domain(format!(
            "beta and gamma must be > 0, got ({beta}, {gamma})"
        )));
    }
    Ok((1.0 - gamma / beta).max(0.0))
}

/// The two equilibrium targets: 15,000 of 25,000 infected.
pub fn sis_case_study_targets() -> TargetSet {
    TargetSet::new(vec![
        Target::with_units("P(infected)", 0.6, 0.01, "probability").expect("valid target"),
        Target::with_units("P(susceptible)", 0.4, 0.01, "probability").expect("valid target"),
    ])
    .expect("valid target set")
}

/// `(β, γ)` from a `(c, p, d)` parameter vector.
pub fn beta_gamma(theta: &[f64]) -> (f64, f64) {
    (theta[0] * theta[1], 1.0 / theta[2])
}

/// [`Model`] adapter over `(c, p, d)`.
#[derive(Debug, Clone, Default)]
pub struct SisModel {
    pub config: SisSimConfig,
}

impl SisModel {
    pub fn new(config: SisSimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Model for SisModel {
    fn evaluate(&self, theta: &[f64]) -> Result<ModelOutputs> {
        let params = SisParameters::from_slice(theta)?;
        simulate_sis(&params, &self.config)
    }

    fn id(&self) -> &str {
        "sis"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn run(c: f64, p: f64, d: f64) -> (f64, f64) {
        let out = simulate_sis(
            &SisParameters::new(c, p, d).unwrap(),
            &SisSimConfig::default(),
        )
        .unwrap();
        (out.0[0], out.0[1])
    }

    #[test]
    fn subcritical_dies_out() {
        let (i, s) = run(1.0, 0.1, 5.0);
        assert!(i < 1e-4, "I = {i}");
        assert!((s + i - 1.0).abs() < 1e-9);
    }

    #[test]
    fn endemic_equilibrium_point_six() {
        // β = 0.54, γ = 0.216 → I* = 0.6
        let (i, _) = run(9.0, 0.06, 1.0 / 0.216);
        assert!((i - 0.6).abs() < 1e-4, "I = {i}");
    }

    #[test]
    fn analytic_equilibrium() {
        assert!((sis_equilibrium_analytic(0.54, 0.216).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(sis_equilibrium_analytic(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(sis_equilibrium_analytic(0.1, 0.3).unwrap(), 0.0);
        assert!(sis_equilibrium_analytic(0.0, 0.3).is_err());
        assert!(sis_equilibrium_analytic(0.3, -1.0).is_err());
    }

    #[test]
    fn case_study_targets() {
        let t = sis_case_study_targets();
        let means: Vec<f64> = t.iter().map(|t| t.mean).collect();
        assert_eq!(means, vec![0.6, 0.4]);
        assert!(t.iter().all(|t| t.sd == 0.01));
        assert!((means.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conservation_along_trajectory() {
        let traj = simulate_sis_trajectory(
            &SisParameters::new(12.0, 0.3, 2.0).unwrap(),
            &SisSimConfig::default(),
        )
        .unwrap();
        assert!(traj.len() > 10);
        for st in &traj {
            assert!(
                (st.s + st.i - 1.0).abs() < 1e-9,
                "t = {}: {}",
                st.t,
                st.s + st.i
            );
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(SisParameters::new(0.0, 0.1, 1.0).is_err());
        assert!(SisParameters::new(1.0, 1.5, 1.0).is_err());
        assert!(SisParameters::new(1.0, 0.5, -1.0).is_err());
        let bad = SisSimConfig {
            s0: 0.9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SisSimConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_supercritical_equilibria() {
        let mut rng = crate::Rng::seed_from_u64(3);
        for _ in 0..100 {
            let gamma: f64 = rng.random_range(0.1..0.5);
            let ratio: f64 = rng.random_range(1.5..5.0);
            let beta = gamma * ratio;
            let (i, _) = run(beta, 1.0, 1.0 / gamma);
            let expected = sis_equilibrium_analytic(beta, gamma).unwrap();
            assert!(
                (i - expected).abs() < 1e-4,
                "β={beta} γ={gamma}: {i} vs {expected}"
            );
        }
    }

    #[test]
    fn ridge_is_flat() {
        // Every (β, γ) with γ = β(1 - 0.6) gives the same equilibrium.
        for beta in [0.2, 0.54, 1.0, 3.0] {
            let gamma = beta * 0.4;
            let (i, _) = run(beta, 1.0, 1.0 / gamma);
            assert!((i - 0.6).abs() < 1e-4, "β={beta}: {i}");
        }
    }

    #[test]
    fn stiff_rates_reach_the_analytic_equilibrium() {
        for (c, p, d) in [(50.0, 1.0, 0.025), (15.0, 0.5, 0.0027), (40.0, 0.9, 0.05)] {
            let params = SisParameters::new(c, p, d).unwrap();
            let out = simulate_sis(&params, &SisSimConfig::default()).unwrap();
            let exact = sis_equilibrium_analytic(params.beta(), params.gamma()).unwrap();
            assert!(
                (out.0[0] - exact).abs() < 1e-6,
                "({c}, {p}, {d}): {} vs {exact}",
                out.0[0]
            );
        }
    }

    #[test]
    fn halving_dt_is_stable() {
        let params = SisParameters::new(9.0, 0.06, 1.0 / 0.216).unwrap();
        let coarse = simulate_sis(&params, &SisSimConfig::default()).unwrap();
        let fine = simulate_sis(
            &params,
            &SisSimConfig {
                dt: 0.005,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((coarse.0[0] - fine.0[0]).abs() < 1e-6);
    }
}
