//! Monthly individual-level cohort simulation.
//!
//! Every individual owns a ChaCha stream derived from the cohort seed and
//! its index, and consumes exactly two uniforms per cycle (mortality, then
//! transition). Trajectories are therefore independent of evaluation order
//! and two runs that differ only in transition probabilities share their
//! random numbers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::pow;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use super::baseline::{Edge, EffectiveTable, AGES};
use super::states::{HealthState, Strain, N_STATES, STRAINS};
use crate::targets::{ModelOutputs, Target, TargetSet};
use crate::{Error, Result, Rng};

pub const N_OUTPUTS: usize = 31;
pub const PREVALENCE_BANDS: [(u32, u32); 5] = [(20, 25), (25, 35), (35, 45), (45, 55), (55, 65)];
pub const INCIDENCE_BANDS: usize = 11;
const INCIDENCE_START: u32 = 25;
/// Strain order of the duration outputs.
const DURATION_ORDER: [Strain; 4] = [
    Strain::LowRisk,
    Strain::HighRiskOther,
    Strain::HighRisk16,
    Strain::HighRisk18,
];
/// Cumulative order of the infection intervals out of Well.
const INFECTION_ORDER: [Strain; 4] = [
    Strain::HighRisk16,
    Strain::HighRisk18,
    Strain::HighRiskOther,
    Strain::LowRisk,
];

/// Annual death probability applied to ages `age_lower..age_upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalityBand {
    pub age_lower: u32,
    pub age_upper: u32,
    pub annual_probability: f64,
}

/// Gompertz-shaped background mortality in five-year bands (synthetic).
pub fn default_mortality() -> Vec<MortalityBand> {
    (0..AGES as u32)
        .step_by(5)
        .map(|lo| {
            let mid = lo as f64 + 2.5;
            MortalityBand {
                age_lower: lo,
                age_upper: (lo + 5).min(AGES as u32),
                annual_probability: (4e-4 * libm::exp(0.08 * (mid - 15.0))).min(1.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub cohort_size: u32,
    pub start_age: u32,
    pub end_age: u32,
    pub seed: u64,
    pub mortality: Vec<MortalityBand>,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            cohort_size: 20_000,
            start_age: 15,
            end_age: 80,
            seed: 2011,
            mortality: default_mortality(),
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cohort_size == 0 {
            return Err(Error::Config("cohort_size must be positive".into()));
        }
        if self.start_age >= self.end_age || self.end_age as usize > AGES {
            return Err(Error::Config(format!(
                "need start_age < end_age <= {AGES}, got {} and {}",
                self.start_age, self.end_age
            )));
        }
        for (i, b) in self.mortality.iter().enumerate() {
            if b.age_lower >= b.age_upper || b.age_upper as usize > AGES {
                return Err(Error::Config(format!(
                    "mortality band {}: invalid age range [{}, {})",
                    i + 1,
                    b.age_lower,
                    b.age_upper
                )));
            }
            if !(0.0..=1.0).contains(&b.annual_probability) {
                return Err(Error::Config(format!(
                    "mortality band {}: annual probability {} outside [0, 1]",
                    i + 1,
                    b.annual_probability
                )));
            }
        }
        Ok(())
    }

    pub fn cycles(&self) -> usize {
        ((self.end_age - self.start_age) * 12) as usize
    }

    /// Monthly death probability `1 - (1 - q)^(1/12)` per year of age; ages
    /// without a band have zero background mortality.
    pub fn monthly_mortality(&self) -> [f64; AGES] {
        let mut out = [0.0; AGES];
        for b in &self.mortality {
            let m = monthly_from_annual(b.annual_probability);
            for v in &mut out[b.age_lower as usize..b.age_upper as usize] {
                *v = m;
            }
        }
        out
    }
}

pub fn monthly_from_annual(q: f64) -> f64 {
    1.0 - pow(1.0 - q, 1.0 / 12.0)
}

/// Result of one cohort run: the 31 outputs and the state census at every
/// cycle boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSimulation {
    pub outputs: ModelOutputs,
    cohort_size: u32,
    census: Vec<[u32; N_STATES]>,
    /// Entries into local cancer over the whole run.
    pub cancer_cases: u64,
    /// HPV episodes ending in a return to Well.
    pub clearances: u64,
}

impl CohortSimulation {
    pub fn cycles(&self) -> usize {
        self.census.len() - 1
    }

    pub fn cohort_size(&self) -> u32 {
        self.cohort_size
    }
}

/// Counts per state at the start of `cycle` (`0..=cycles`).
pub fn state_census(sim: &CohortSimulation, cycle: usize) -> Result<[u32; N_STATES]> {
    sim.census.get(cycle).copied().ok_or_else(|| {
        Error::Domain(format!(
            "cycle {cycle} outside the simulated range 0..={}",
            sim.cycles()
        ))
    })
}

#[derive(Default)]
struct Tally {
    duration_sum: [[u64; 2]; 4],
    duration_n: [[u64; 2]; 4],
    prevalence_num: [u64; 5],
    prevalence_den: [u64; 5],
    cin1: [u64; 4],
    cin23: [u64; 4],
    cancer: [u64; 4],
    incidence_num: [u64; INCIDENCE_BANDS],
    incidence_den: [u64; INCIDENCE_BANDS],
    cancer_cases: u64,
    clearances: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn share(counts: &[u64; 4], s: Strain) -> f64 {
    ratio(counts[s.index()], counts.iter().sum())
}

impl Tally {
    fn outputs(&self) -> ModelOutputs {
        let mut out = Vec::with_capacity(N_OUTPUTS);
        for group in 0..2 {
            for s in DURATION_ORDER {
                out.push(ratio(
                    self.duration_sum[s.index()][group],
                    self.duration_n[s.index()][group],
                ));
            }
        }
        for b in 0..5 {
            out.push(ratio(self.prevalence_num[b], self.prevalence_den[b]));
        }
        out.push(share(&self.cin1, Strain::HighRisk16));
        out.push(share(&self.cin1, Strain::HighRiskOther));
        out.push(share(&self.cin23, Strain::HighRisk16));
        out.push(share(&self.cin23, Strain::HighRisk18));
        out.push(share(&self.cin23, Strain::HighRiskOther));
        out.push(share(&self.cancer, Strain::HighRisk16));
        out.push(share(&self.cancer, Strain::HighRisk18));
        for b in 0..INCIDENCE_BANDS {
            // Cases per 100,000 woman-years from person-months.
            out.push(ratio(
                self.incidence_num[b] * 1_200_000,
                self.incidence_den[b],
            ));
        }
        debug_assert_eq!(out.len(), N_OUTPUTS);
        ModelOutputs(out)
    }
}

fn prevalence_band(age: u32) -> Option<usize> {
    PREVALENCE_BANDS
        .iter()
        .position(|&(lo, hi)| (lo..hi).contains(&age))
}

fn incidence_band(age: u32) -> Option<usize> {
    let b = age.checked_sub(INCIDENCE_START)? / 5;
    ((b as usize) < INCIDENCE_BANDS).then_some(b as usize)
}

#[derive(Clone, Copy)]
struct Person {
    state: HealthState,
    /// Strain carried into cancer, for the cancer strain shares.
    strain: Strain,
    cleared: u8,
    infected_at: u32,
    infected_young: bool,
}

#[inline]
fn step(p: &Person, u: f64, table: &EffectiveTable, age: usize) -> Option<HealthState> {
    use HealthState::*;
    let g = |e: Edge, s: Strain| table.get(e, s, age);
    // Each row is laid out as [regression | stay | progression | death] on
    // the unit interval.
    let next = match p.state {
        Well => {
            let mut cum = 0.0;
            let mut hit = None;
            for s in INFECTION_ORDER {
                let mut q = g(Edge::Infection, s);
                if p.cleared & (1 << s.index()) != 0 {
                    q *= 1.0 - g(Edge::ImmuneDegree, s).clamp(0.0, 1.0);
                }
                cum += q;
                if u < cum {
                    hit = Some(Hpv(s));
                    break;
                }
            }
            hit?
        }
        Hpv(s) => {
            if u < g(Edge::Clearance, s) {
                Well
            } else if u >= 1.0 - g(Edge::HpvToCin1, s) {
                Cin1(s)
            } else {
                return None;
            }
        }
        Cin1(s) => {
            if u < g(Edge::Cin1Regression, s) {
                Well
            } else if u >= 1.0 - g(Edge::Cin1ToCin23, s) {
                Cin23(s)
            } else {
                return None;
            }
        }
        Cin23(s) => {
            if u < g(Edge::Cin23Regression, s) {
                Cin1(s)
            } else if u >= 1.0 - g(Edge::Cin23ToCancer, s) {
                CancerLocal
            } else {
                return None;
            }
        }
        CancerLocal | CancerRegional | CancerDistant => {
            let (forward, death, to) = match p.state {
                CancerLocal => (Edge::LocalToRegional, Edge::LocalDeath, CancerRegional),
                CancerRegional => (Edge::RegionalToDistant, Edge::RegionalDeath, CancerDistant),
                _ => (Edge::DistantDeath, Edge::DistantDeath, CancerDistant),
            };
            let d = g(death, p.strain);
            let f = if p.state == CancerDistant {
                0.0
            } else {
                g(forward, p.strain)
            };
            if u >= 1.0 - d {
                Dead
            } else if u >= 1.0 - d - f {
                to
            } else {
                return None;
            }
        }
        Dead => return None,
    };
    Some(next)
}

/// Runs the cohort under an already-scaled transition table.
pub fn simulate_cohort(table: &EffectiveTable, config: &CohortConfig) -> Result<CohortSimulation> {
    config.validate()?;
    let cycles = config.cycles();
    let mortality = config.monthly_mortality();
    let start_months = config.start_age * 12;
    let mut census = vec![[0u32; N_STATES]; cycles + 1];
    let mut deaths = vec![0u32; cycles + 1];
    let mut tally = Tally::default();
    let root = Rng::seed_from_u64(config.seed);

    for i in 0..config.cohort_size {
        let mut rng = root.clone();
        rng.set_stream(u64::from(i));
        let mut p = Person {
            state: HealthState::Well,
            strain: Strain::LowRisk,
            cleared: 0,
            infected_at: 0,
            infected_young: false,
        };
        let mut died_at = None;
        for t in 0..cycles as u32 {
            let age = (start_months + t) / 12;
            let state = p.state;
            census[t as usize][state.index()] += 1;

            if let Some(b) = prevalence_band(age) {
                tally.prevalence_den[b] += 1;
                if state.strain().is_some_and(Strain::is_high_risk) {
                    tally.prevalence_num[b] += 1;
                }
            }
            match state {
                HealthState::Cin1(s) => tally.cin1[s.index()] += 1,
                HealthState::Cin23(s) => tally.cin23[s.index()] += 1,
                _ if state.is_cancer() => tally.cancer[p.strain.index()] += 1,
                _ => {}
            }
            let band = incidence_band(age);
            if let (Some(b), false) = (band, state.is_cancer()) {
                tally.incidence_den[b] += 1;
            }

            let u_mortality: f64 = rng.random();
            let u_transition: f64 = rng.random();
            if u_mortality < mortality[age as usize] {
                died_at = Some(t + 1);
                break;
            }
            let Some(next) = step(&p, u_transition, table, age as usize) else {
                continue;
            };
            match (state, next) {
                (HealthState::Well, HealthState::Hpv(_)) => {
                    p.infected_at = t + 1;
                    p.infected_young = (start_months + t + 1) / 12 < 30;
                }
                (HealthState::Hpv(s), _) => {
                    let k = s.index();
                    let g = usize::from(!p.infected_young);
                    tally.duration_sum[k][g] += u64::from(t + 1 - p.infected_at);
                    tally.duration_n[k][g] += 1;
                    if next == HealthState::Well {
                        tally.clearances += 1;
                    }
                }
                _ => {}
            }
            match next {
                HealthState::Well => {
                    if let Some(s) = state.strain() {
                        p.cleared |= 1 << s.index();
                    }
                }
                HealthState::CancerLocal => {
                    tally.cancer_cases += 1;
                    if let Some(b) = band {
                        tally.incidence_num[b] += 1;
                    }
                }
                HealthState::Dead => {
                    died_at = Some(t + 1);
                    break;
                }
                _ => {}
            }
            if let Some(s) = next.strain() {
                p.strain = s;
            }
            p.state = next;
        }
        match died_at {
            Some(d) => deaths[d as usize] += 1,
            None => census[cycles][p.state.index()] += 1,
        }
    }

    let dead = HealthState::Dead.index();
    let mut cumulative = 0;
    for (row, d) in census.iter_mut().zip(&deaths) {
        cumulative += d;
        row[dead] = cumulative;
    }
    Ok(CohortSimulation {
        outputs: tally.outputs(),
        cohort_size: config.cohort_size,
        census,
        cancer_cases: tally.cancer_cases,
        clearances: tally.clearances,
    })
}

/// Output names in model order.
pub fn output_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_OUTPUTS);
    for group in ["<30", ">30"] {
        for s in DURATION_ORDER {
            names.push(format!("duration {s} {group}"));
        }
    }
    for (lo, hi) in PREVALENCE_BANDS {
        names.push(format!("HR prevalence {lo}-{}", hi - 1));
    }
    names.push("CIN1 share HR16".into());
    names.push("CIN1 share HRother".into());
    names.push("CIN23 share HR16".into());
    names.push("CIN23 share HR18".into());
    names.push("CIN23 share HRother".into());
    names.push("cancer share HR16".into());
    names.push("cancer share HR18".into());
    for b in 0..INCIDENCE_BANDS as u32 {
        let lo = INCIDENCE_START + 5 * b;
        names.push(format!("cancer incidence {lo}-{}", lo + 4));
    }
    names
}

/// The 31 calibration targets with their units.
pub fn case_study_targets() -> TargetSet {
    const VALUES: [(f64, f64); N_OUTPUTS] = [
        (9.775, 0.599),
        (11.720, 0.638),
        (12.905, 1.334),
        (10.015, 1.620),
        (9.910, 0.378),
        (11.300, 0.622),
        (10.875, 1.099),
        (10.960, 1.857),
        (0.398, 0.107),
        (0.224, 0.069),
        (0.108, 0.044),
        (0.077, 0.036),
        (0.060, 0.027),
        (0.2222, 0.025),
        (0.1025, 0.022),
        (0.6333, 0.148),
        (0.0761, 0.010),
        (0.0557, 0.055),
        (0.6810, 0.029),
        (0.1067, 0.010),
        (6.34, 2.67),
        (14.67, 3.60),
        (20.13, 4.58),
        (23.83, 3.74),
        (21.83, 4.28),
        (18.29, 5.06),
        (18.25, 4.34),
        (13.47, 3.83),
        (15.59, 4.08),
        (14.46, 4.07),
        (16.38, 6.74),
    ];
    let units = |k: usize| match k {
        0..=7 => "months",
        8..=19 => "proportion",
        _ => "per 100,000 woman-years",
    };
    TargetSet::new(
        output_names()
            .into_iter()
            .zip(VALUES)
            .enumerate()
            .map(|(k, (name, (mean, sd)))| {
                Target::with_units(name, mean, sd, units(k)).expect("valid target")
            })
            .collect(),
    )
    .expect("valid target set")
}

/// Individuals starting in `state`; convenience for census checks.
pub fn alive(census: &[u32; N_STATES]) -> u32 {
    census.iter().sum::<u32>() - census[HealthState::Dead.index()]
}

/// Total HPV-positive (any strain, any pre-cancer stage) in a census row.
pub fn infected(census: &[u32; N_STATES]) -> u32 {
    STRAINS
        .iter()
        .flat_map(|&s| {
            [
                HealthState::Hpv(s),
                HealthState::Cin1(s),
                HealthState::Cin23(s),
            ]
        })
        .map(|st| census[st.index()])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpv::baseline::{apply_multipliers, synthetic_baseline, MultiplierMap};

    fn small(seed: u64) -> CohortConfig {
        CohortConfig {
            cohort_size: 500,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn census_is_conserved_and_dead_absorbing() {
        let sim = simulate_cohort(&synthetic_baseline(), &small(1)).unwrap();
        let first = state_census(&sim, 0).unwrap();
        assert_eq!(first[HealthState::Well.index()], 500);
        assert_eq!(first.iter().sum::<u32>(), 500);
        let mut last_dead = 0;
        for t in 0..=sim.cycles() {
            let c = state_census(&sim, t).unwrap();
            assert_eq!(c.iter().sum::<u32>(), 500, "cycle {t}");
            let dead = c[HealthState::Dead.index()];
            assert!(dead >= last_dead);
            last_dead = dead;
        }
        assert!(last_dead > 0);
        assert!(matches!(
            state_census(&sim, sim.cycles() + 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_cohort(&synthetic_baseline(), &small(9)).unwrap();
        let b = simulate_cohort(&synthetic_baseline(), &small(9)).unwrap();
        assert_eq!(
            a.outputs.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.outputs.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        let c = simulate_cohort(&synthetic_baseline(), &small(10)).unwrap();
        assert_ne!(a.outputs, c.outputs);
    }

    #[test]
    fn no_infection_means_no_disease() {
        let mut m = vec![1.0; 26];
        m[..4].fill(0.0);
        let table =
            apply_multipliers(&synthetic_baseline(), &MultiplierMap::case_study(), &m).unwrap();
        let sim = simulate_cohort(&table, &small(2)).unwrap();
        assert!(sim.outputs.0.iter().all(|&x| x == 0.0), "{:?}", sim.outputs);
        for t in 0..=sim.cycles() {
            let c = state_census(&sim, t).unwrap();
            assert_eq!(alive(&c), c[HealthState::Well.index()]);
        }
    }

    #[test]
    fn regression_returns_people_to_well() {
        let sim = simulate_cohort(&synthetic_baseline(), &small(3)).unwrap();
        assert!(sim.clearances > 0);
        let names = output_names();
        assert_eq!(names.len(), N_OUTPUTS);
        assert_eq!(case_study_targets().len(), N_OUTPUTS);
    }

    #[test]
    fn empty_cohort_is_a_config_error() {
        let cfg = CohortConfig {
            cohort_size: 0,
            ..Default::default()
        };
        assert!(matches!(
            simulate_cohort(&synthetic_baseline(), &cfg),
            Err(Error::Config(_))
        ));
        let cfg = CohortConfig {
            start_age: 80,
            end_age: 20,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn band_lookup() {
        assert_eq!(prevalence_band(19), None);
        assert_eq!(prevalence_band(20), Some(0));
        assert_eq!(prevalence_band(34), Some(1));
        assert_eq!(prevalence_band(65), None);
        assert_eq!(incidence_band(24), None);
        assert_eq!(incidence_band(25), Some(0));
        assert_eq!(incidence_band(79), Some(10));
        assert_eq!(incidence_band(80), None);
    }

    #[test]
    fn monthly_mortality_compounds_to_annual() {
        let m = monthly_from_annual(0.1);
        assert!((1.0 - libm::pow(1.0 - m, 12.0) - 0.1).abs() < 1e-14);
    }
}
