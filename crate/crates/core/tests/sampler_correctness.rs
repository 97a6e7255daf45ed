use bayescal_core::model::FnModel;
use bayescal_core::sampler::{acceptance_probability, run_chain, Posterior};
use bayescal_core::stats::{mean, variance};
use bayescal_core::{
    JointPrior, ParameterPrior, PriorSpec, ProposalSpec, SamplerOptions, Target, TargetSet,
};

fn bounded(name: &str, lo: f64, hi: f64) -> ParameterPrior {
    ParameterPrior::new(name, PriorSpec::improper_uniform(lo, Some(hi)).unwrap())
        .with_init(-0.5, 0.5)
}

#[test]
fn bivariate_standard_normal() {
    let prior =
        JointPrior::new(vec![bounded("x", -50.0, 50.0), bounded("y", -50.0, 50.0)]).unwrap();
    let targets = TargetSet::new(vec![
        Target::new("x", 0.0, 1.0).unwrap(),
        Target::new("y", 0.0, 1.0).unwrap(),
    ])
    .unwrap();
    let model = FnModel::new("identity", |t: &[f64]| Ok(t.to_vec()));
    let post = Posterior::new(&model, &prior, &targets);
    let proposal = ProposalSpec::new(vec![2.4, 2.4], 1).unwrap();
    let options = SamplerOptions::new(100_000, 5_000, 1).unwrap();
    let chain = run_chain(&post, &proposal, &options, &[0.0, 0.0], 42, 0).unwrap();

    let x = chain.column(0);
    let y = chain.column(1);
    assert!(mean(&x).abs() < 0.05, "mean x {}", mean(&x));
    assert!(mean(&y).abs() < 0.05, "mean y {}", mean(&y));
    assert!((variance(&x) - 1.0).abs() < 0.1);
    assert!((variance(&y) - 1.0).abs() < 0.1);
    let (mx, my) = (mean(&x), mean(&y));
    let cov = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() - 1) as f64;
    assert!(cov.abs() < 0.1, "cov {cov}");
    assert!((0.2..0.8).contains(&chain.meta.acceptance_rate));
}

/// A step density on [0, 3) with masses (0.2, 0.3, 0.5), expressed through
/// the Gaussian likelihood: output `sqrt(-2 ln w)` against a N(0, 1) target
/// has log-likelihood `ln w`.
#[test]
fn three_point_occupancy() {
    const W: [f64; 3] = [0.2, 0.3, 0.5];
    let prior = JointPrior::new(vec![ParameterPrior::new(
        "k",
        PriorSpec::uniform(0.0, 3.0).unwrap(),
    )])
    .unwrap();
    let targets = TargetSet::new(vec![Target::new("w", 0.0, 1.0).unwrap()]).unwrap();
    let model = FnModel::new("steps", |t: &[f64]| {
        let k = (t[0].floor() as usize).min(2);
        Ok(vec![(-2.0 * W[k].ln()).sqrt()])
    });
    let post = Posterior::new(&model, &prior, &targets);
    let proposal = ProposalSpec::new(vec![1.5], 1).unwrap();
    let options = SamplerOptions::new(100_000, 2_000, 1).unwrap();
    let chain = run_chain(&post, &proposal, &options, &[1.5], 7, 0).unwrap();
    let mut counts = [0usize; 3];
    for x in chain.column(0) {
        counts[(x.floor() as usize).min(2)] += 1;
    }
    let n = chain.len() as f64;
    for (c, w) in counts.iter().zip(W) {
        assert!((*c as f64 / n - w).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn detailed_balance_on_three_states() {
    // Symmetric proposal over three states: π(i) P(i→j) = π(j) P(j→i).
    let pi: [f64; 3] = [0.2, 0.3, 0.5];
    let q = 0.5;
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let a_ij = acceptance_probability(pi[i].ln(), pi[j].ln(), 0.0).unwrap();
            let a_ji = acceptance_probability(pi[j].ln(), pi[i].ln(), 0.0).unwrap();
            assert!((pi[i] * q * a_ij - pi[j] * q * a_ji).abs() < 1e-15);
        }
    }
}

#[test]
fn asymmetric_correction_enters_the_ratio() {
    let a = acceptance_probability(0.0, 0.0, -(2.0f64).ln()).unwrap();
    assert!((a - 0.5).abs() < 1e-15);
}
