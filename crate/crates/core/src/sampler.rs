//! Random-walk Metropolis-Hastings with random block updates.
//!
//! Each iteration picks `block_size` coordinates uniformly without
//! replacement, perturbs each by an independent Gaussian step of its own
//! scale, and accepts with probability
//! `min{1, f(x')q(x|x') / f(x)q(x'|x)}`. The Gaussian walk is symmetric, so
//! the Hastings ratio is zero on the log scale; [`Proposal::log_q_ratio`]
//! carries it anyway for asymmetric proposals.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use libm::exp;
use rand::seq::index;
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::priors::JointPrior;
use crate::targets::{gof_total, log_likelihood, TargetSet};
use crate::{Error, Result, Rng};

/// Proposal scale as a fraction of each parameter's prior scale.
pub const DEFAULT_SCALE_FRACTION: f64 = 0.05;
/// Attempts at drawing a starting point with finite log-posterior.
const INIT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    names: Arc<[String]>,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(names: Arc<[String]>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Alignment(format!(
                "{} names for {} values",
                names.len(),
                values.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate parameter name '{n}'")));
            }
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    scales: Vec<f64>,
    block_size: usize,
}

impl ProposalSpec {
    /// Scales must be finite and non-negative; a zero scale pins that
    /// coordinate.
    pub fn new(scales: Vec<f64>, block_size: usize) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Config("proposal needs at least one scale".into()));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Config(format!(
                "proposal scale must be finite and >= 0, got {s}"
            )));
        }
        if block_size == 0 || block_size > scales.len() {
            return Err(Error::Config(format!(
                "block size must be in [1, {}], got {block_size}",
                scales.len()
            )));
        }
        Ok(Self { scales, block_size })
    }

    /// 5% of each prior's scale reference, updating every coordinate.
    pub fn default_for(prior: &JointPrior) -> Result<Self> {
        let scales = prior
            .priors()
            .iter()
            .map(|p| {
                p.scale_reference()
                    .map(|s| DEFAULT_SCALE_FRACTION * s)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "no default proposal scale for '{}': give an explicit scale or bounds",
                            p.name
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = scales.len();
        Self::new(scales, n)
    }

    pub fn with_block_size(self, block_size: usize) -> Result<Self> {
        Self::new(self.scales, block_size)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    pub iterations: u64,
    pub burn_in: u64,
    pub thinning: u64,
}

impl SamplerOptions {
    pub fn new(iterations: u64, burn_in: u64, thinning: u64) -> Result<Self> {
        let o = Self {
            iterations,
            burn_in,
            thinning,
        };
        o.validate()?;
        Ok(o)
    }

    /// Burn-in of 20% of `iterations` and thinning of 10.
    pub fn with_defaults(iterations: u64) -> Result<Self> {
        Self::new(iterations, iterations / 5, 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be >= 1".into()));
        }
        Ok(())
    }

    pub fn recorded_len(&self) -> usize {
        ((self.iterations - self.burn_in) / self.thinning) as usize
    }
}

/// Log-posterior and its pieces at one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPoint {
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub gof: f64,
}

impl PosteriorPoint {
    const INFEASIBLE: Self = Self {
        log_prior: f64::NEG_INFINITY,
        log_likelihood: f64::NEG_INFINITY,
        gof: f64::INFINITY,
    };

    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }

    pub fn is_feasible(&self) -> bool {
        self.log_posterior().is_finite()
    }
}

/// Model, prior and targets bundled into an unnormalized posterior.
pub struct Posterior<'a, M: ?Sized> {
    pub model: &'a M,
    pub prior: &'a JointPrior,
    pub targets: &'a TargetSet,
}

impl<M: ?Sized> Clone for Posterior<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M: ?Sized> Copy for Posterior<'_, M> {}

impl<'a, M: Model + ?Sized> Posterior<'a, M> {
    pub fn new(model: &'a M, prior: &'a JointPrior, targets: &'a TargetSet) -> Self {
        Self {
            model,
            prior,
            targets,
        }
    }

    /// Joint log-prior plus mode-normalized log-likelihood. The model is
    /// not run when the prior already rules `theta` out; model failures
    /// count as zero likelihood.
    pub fn evaluate(&self, theta: &[f64]) -> Result<PosteriorPoint> {
        let log_prior = self.prior.log_density(theta)?;
        if log_prior == f64::NEG_INFINITY {
            return Ok(PosteriorPoint::INFEASIBLE);
        }
        let outputs = match self.model.evaluate(theta) {
            Ok(o) => o,
            Err(e) => {
                log::debug!("model evaluation failed at {theta:?}: {e}");
                return Ok(PosteriorPoint::INFEASIBLE);
            }
        };
        let (ll, gof) = match (
            log_likelihood(&outputs, self.targets),
            gof_total(&outputs, self.targets),
        ) {
            (Ok(ll), Ok(gof)) => (ll, gof),
            (Err(e @ Error::Alignment(_)), _) => return Err(e),
            (Err(e), _) | (_, Err(e)) => {
                log::debug!("likelihood evaluation failed at {theta:?}: {e}");
                return Ok(PosteriorPoint::INFEASIBLE);
            }
        };
        Ok(PosteriorPoint {
            log_prior,
            log_likelihood: ll,
            gof,
        })
    }

    pub fn log_posterior(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(theta)?.log_posterior())
    }
}

/// A candidate state and its log Hastings correction
/// `ln q(x|x') - ln q(x'|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub candidate: Vec<f64>,
    pub log_q_ratio: f64,
}

pub fn propose(current: &[f64], spec: &ProposalSpec, rng: &mut Rng) -> Proposal {
    debug_assert_eq!(current.len(), spec.dim());
    let mut candidate = Vec::from(current);
    let n = spec.dim();
    let mut perturb = |i: usize, rng: &mut Rng| {
        let z: f64 = StandardNormal.sample(rng);
        candidate[i] += spec.scales[i] * z;
    };
    if spec.block_size == n {
        for i in 0..n {
            perturb(i, rng);
        }
    } else {
        let mut block = index::sample(rng, n, spec.block_size).into_vec();
        block.sort_unstable();
        for i in block {
            perturb(i, rng);
        }
    }
    Proposal {
        candidate,
        log_q_ratio: 0.0,
    }
}

/// `min{1, exp(candidate - current + log_q_ratio)}`.
pub fn acceptance_probability(current: f64, candidate: f64, log_q_ratio: f64) -> Result<f64> {
    if !current.is_finite() {
        return Err(Error::InvalidState(format!(
            "current log-posterior must be finite, got {current}"
        )));
    }
    if candidate.is_nan() || candidate == f64::NEG_INFINITY || log_q_ratio.is_nan() {
        return Ok(0.0);
    }
    let log_ratio = candidate - current + log_q_ratio;
    Ok(if log_ratio >= 0.0 {
        1.0
    } else {
        exp(log_ratio)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain_id: usize,
    pub seed: u64,
    pub model_id: String,
    pub options: SamplerOptions,
    pub acceptance_rate: f64,
}

/// Recorded (post burn-in, thinned) states of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub meta: ChainMeta,
    names: Arc<[String]>,
    iterations: Vec<u64>,
    values: Vec<f64>,
    log_posterior: Vec<f64>,
    gof: Vec<f64>,
    accepted: Vec<bool>,
}

impl Chain {
    pub fn new(meta: ChainMeta, names: Arc<[String]>) -> Self {
        Self {
            meta,
            names,
            iterations: Vec::new(),
            values: Vec::new(),
            log_posterior: Vec::new(),
            gof: Vec::new(),
            accepted: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        iteration: u64,
        state: &[f64],
        log_posterior: f64,
        gof: f64,
        accepted: bool,
    ) {
        debug_assert_eq!(state.len(), self.names.len());
        self.iterations.push(iteration);
        self.values.extend_from_slice(state);
        self.log_posterior.push(log_posterior);
        self.gof.push(gof);
        self.accepted.push(accepted);
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim().max(1))
    }

    /// Trace of parameter `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    pub fn iterations(&self) -> &[u64] {
        &self.iterations
    }

    pub fn log_posterior(&self) -> &[f64] {
        &self.log_posterior
    }

    pub fn gof(&self) -> &[f64] {
        &self.gof
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    /// Applies `f` to every recorded state, e.g. to derive `β = c·p`.
    pub fn derived(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.states().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    chains: Vec<Chain>,
}

impl ChainSet {
    pub fn new(chains: Vec<Chain>) -> Result<Self> {
        if chains.is_empty() {
            return Err(Error::InsufficientChains {
                required: 1,
                got: 0,
            });
        }
        let names = chains[0].names();
        if let Some(c) = chains.iter().find(|c| c.names() != names) {
            return Err(Error::Alignment(format!(
                "chain {} has parameters {:?}, expected {:?}",
                c.meta.chain_id,
                c.names(),
                names
            )));
        }
        Ok(Self { chains })
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn names(&self) -> &Arc<[String]> {
        self.chains[0].names()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| n == name)
    }

    /// All chains' traces of parameter `j`, concatenated.
    pub fn pooled(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.column(j)).collect()
    }

    pub fn pooled_derived(&self, f: impl Fn(&[f64]) -> f64 + Copy) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.derived(f)).collect()
    }
}

/// Draws a starting point with finite log-posterior from the prior (or the
/// initialization bounds of improper priors).
pub fn draw_initial_state<M: Model + ?Sized>(
    posterior: &Posterior<'_, M>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    for _ in 0..INIT_ATTEMPTS {
        let theta = posterior.prior.sample_init(rng)?;
        if posterior.evaluate(&theta)?.is_feasible() {
            return Ok(theta);
        }
    }
    Err(Error::Initialization(format!(
        "no feasible starting point in {INIT_ATTEMPTS} prior draws"
    )))
}

/// Random source for chain initialization, independent of the chain's own
/// stream for the same seed.
pub fn init_rng(seed: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs one chain for `options.iterations` steps from `init`.
pub fn run_chain<M: Model + ?Sized>(
    posterior: &Posterior<'_, M>,
    proposal: &ProposalSpec,
    options: &SamplerOptions,
    init: &[f64],
    seed: u64,
    chain_id: usize,
) -> Result<Chain> {
    options.validate()?;
    let names = posterior.prior.names();
    if init.len() != names.len() || proposal.dim() != names.len() {
        return Err(Error::Alignment(format!(
            "init has {} values and proposal {} scales for {} parameters",
            init.len(),
            proposal.dim(),
            names.len()
        )));
    }
    let mut current = Vec::from(init);
    let mut current_point = posterior.evaluate(&current)?;
    if !current_point.is_feasible() {
        return Err(Error::Initialization(format!(
            "initial state {init:?} has zero posterior density; draw a start point from the prior"
        )));
    }

    let mut rng = Rng::seed_from_u64(seed);
    let mut chain = Chain::new(
        ChainMeta {
            chain_id,
            seed,
            model_id: String::from(posterior.model.id()),
            options: *options,
            acceptance_rate: 0.0,
        },
        names,
    );
    let mut n_accepted = 0u64;
    for t in 1..=options.iterations {
        let Proposal {
            candidate,
            log_q_ratio,
        } = propose(&current, proposal, &mut rng);
        let point = posterior.evaluate(&candidate)?;
        let alpha = acceptance_probability(
            current_point.log_posterior(),
            point.log_posterior(),
            log_q_ratio,
        )?;
        let accepted = rng.random::<f64>() < alpha;
        if accepted {
            current = candidate;
            current_point = point;
            n_accepted += 1;
        }
        if t > options.burn_in && (t - options.burn_in).is_multiple_of(options.thinning) {
            chain.push(
                t,
                &current,
                current_point.log_posterior(),
                current_point.gof,
                accepted,
            );
        }
    }
    chain.meta.acceptance_rate = n_accepted as f64 / options.iterations as f64;
    Ok(chain)
}

/// Runs one chain per seed, each started from its own prior draw.
pub fn run_chains<M: Model + ?Sized>(
    posterior: &Posterior<'_, M>,
    proposal: &ProposalSpec,
    options: &SamplerOptions,
    seeds: &[u64],
) -> Result<ChainSet> {
    check_seeds(seeds)?;
    let chains = seeds
        .iter()
        .enumerate()
        .map(|(id, &seed)| {
            let init = draw_initial_state(posterior, &mut init_rng(seed))?;
            run_chain(posterior, proposal, options, &init, seed, id)
        })
        .collect::<Result<Vec<_>>>()?;
    ChainSet::new(chains)
}

pub fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one chain seed is required".into()));
    }
    for (i, s) in seeds.iter().enumerate() {
        if seeds[..i].contains(s) {
            return Err(Error::Config(format!("duplicate chain seed {s}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::priors::{ParameterPrior, PriorSpec};
    use crate::targets::Target;
    use alloc::vec;

    fn flat_prior(n: usize) -> JointPrior {
        JointPrior::new(
            (0..n)
                .map(|i| {
                    ParameterPrior::new(
                        format!("x{i}"),
                        PriorSpec::improper_uniform(-1e6, Some(1e6)).unwrap(),
                    )
                    .with_init(-1.0, 1.0)
                })
                .collect(),
        )
        .unwrap()
    }

    fn identity_targets(n: usize) -> TargetSet {
        TargetSet::new(
            (0..n)
                .map(|i| Target::new(format!("t{i}"), 0.0, 1.0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(-3.0, -3.0, 0.0).unwrap(), 1.0);
        let half = acceptance_probability(-3.0, -3.0 - libm::log(2.0), 0.0).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        assert_eq!(
            acceptance_probability(-3.0, f64::NEG_INFINITY, 0.0).unwrap(),
            0.0
        );
        assert!(matches!(
            acceptance_probability(f64::NEG_INFINITY, 0.0, 0.0),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn block_proposals_touch_at_most_s_coordinates() {
        let mut rng = Rng::seed_from_u64(5);
        let current = vec![0.0; 26];
        for s in [1, 7, 26] {
            let spec = ProposalSpec::new(vec![1.0; 26], s).unwrap();
            for _ in 0..200 {
                let p = propose(&current, &spec, &mut rng);
                let changed = p.candidate.iter().filter(|x| **x != 0.0).count();
                assert_eq!(changed, s);
                assert_eq!(p.log_q_ratio, 0.0);
            }
        }
    }

    #[test]
    fn proposal_spec_validation() {
        assert!(ProposalSpec::new(vec![1.0, 1.0], 3).is_err());
        assert!(ProposalSpec::new(vec![1.0, 1.0], 0).is_err());
        assert!(ProposalSpec::new(vec![1.0, -1.0], 1).is_err());
        assert!(ProposalSpec::new(vec![0.0, 0.0], 2).is_ok());
    }

    #[test]
    fn options_validation_and_recorded_length() {
        assert!(SamplerOptions::new(100, 100, 1).is_err());
        assert!(SamplerOptions::new(100, 10, 0).is_err());
        let o = SamplerOptions::new(1003, 100, 7).unwrap();
        assert_eq!(o.recorded_len(), 129);
    }

    #[test]
    fn prior_short_circuits_model() {
        let prior = JointPrior::new(vec![ParameterPrior::new(
            "x",
            PriorSpec::uniform(0.0, 1.0).unwrap(),
        )])
        .unwrap();
        let targets = identity_targets(1);
        let model = FnModel::new("panics", |_: &[f64]| -> Result<Vec<f64>> {
            panic!("model must not run")
        });
        let post = Posterior::new(&model, &prior, &targets);
        assert_eq!(post.log_posterior(&[2.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn flat_prior_posterior_is_likelihood() {
        let prior = flat_prior(2);
        let targets = identity_targets(2);
        let model = FnModel::new("id", |t: &[f64]| Ok(t.to_vec()));
        let post = Posterior::new(&model, &prior, &targets);
        let lp = post.log_posterior(&[1.0, 2.0]).unwrap();
        assert!((lp + 0.5 * (1.0 + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn model_failure_is_zero_density() {
        let prior = flat_prior(1);
        let targets = identity_targets(1);
        let model = FnModel::new("fails", |_: &[f64]| Err(Error::Infeasible("nope".into())));
        let post = Posterior::new(&model, &prior, &targets);
        assert_eq!(post.log_posterior(&[0.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn zero_width_walk_never_moves() {
        let prior = flat_prior(2);
        let targets = identity_targets(2);
        let model = FnModel::new("id", |t: &[f64]| Ok(t.to_vec()));
        let post = Posterior::new(&model, &prior, &targets);
        let proposal = ProposalSpec::new(vec![0.0, 0.0], 2).unwrap();
        let options = SamplerOptions::new(500, 100, 1).unwrap();
        let chain = run_chain(&post, &proposal, &options, &[0.3, -0.2], 9, 0).unwrap();
        assert_eq!(chain.meta.acceptance_rate, 1.0);
        assert!(chain.states().all(|s| s == [0.3, -0.2]));
        assert_eq!(chain.len(), 400);
    }

    #[test]
    fn infeasible_init_is_rejected() {
        let prior = JointPrior::new(vec![ParameterPrior::new(
            "x",
            PriorSpec::uniform(0.0, 1.0).unwrap(),
        )])
        .unwrap();
        let targets = identity_targets(1);
        let model = FnModel::new("id", |t: &[f64]| Ok(t.to_vec()));
        let post = Posterior::new(&model, &prior, &targets);
        let proposal = ProposalSpec::new(vec![0.1], 1).unwrap();
        let options = SamplerOptions::new(10, 0, 1).unwrap();
        assert!(matches!(
            run_chain(&post, &proposal, &options, &[5.0], 1, 0),
            Err(Error::Initialization(_))
        ));
    }

    #[test]
    fn chains_are_deterministic_and_seeds_unique() {
        let prior = flat_prior(2);
        let targets = identity_targets(2);
        let model = FnModel::new("id", |t: &[f64]| Ok(t.to_vec()));
        let post = Posterior::new(&model, &prior, &targets);
        let proposal = ProposalSpec::new(vec![0.8, 0.8], 1).unwrap();
        let options = SamplerOptions::new(2000, 400, 4).unwrap();
        let a = run_chains(&post, &proposal, &options, &[1, 2, 3]).unwrap();
        let b = run_chains(&post, &proposal, &options, &[1, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.chains().iter().all(|c| c.len() == options.recorded_len()));
        let single = run_chains(&post, &proposal, &options, &[4]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(matches!(
            run_chains(&post, &proposal, &options, &[1, 1]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn default_proposal_scales() {
        let prior = JointPrior::new(vec![
            ParameterPrior::new("c", PriorSpec::normal(9.0, 1.0).unwrap()),
            ParameterPrior::new("m", PriorSpec::gamma(4.0, 4.0).unwrap()),
            ParameterPrior::new("d", PriorSpec::improper_uniform(0.0, Some(100.0)).unwrap()),
            ParameterPrior::new("u", PriorSpec::uniform(1.0, 3.0).unwrap()),
        ])
        .unwrap();
        let spec = ProposalSpec::default_for(&prior).unwrap();
        let expected = [0.05, 0.025, 5.0, 0.1];
        for (a, b) in spec.scales().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(spec.block_size(), 4);
    }
}
