use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bayescal::io::{self, chain_file_name, write_chain_csv};
use bayescal_core::model::FnModel;
use bayescal_core::sampler::{run_chain, Posterior};
use bayescal_core::{
    Chain, JointPrior, ParameterPrior, PriorSpec, ProposalSpec, SamplerOptions, Target, TargetSet,
};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(rel)
}

fn bayescal(args: &[&str], output_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayescal"))
        .args(args)
        .env("BAYESCAL_OUTPUT_ROOT", output_root)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

/// Prior-only chains of a standard normal in two coordinates.
fn normal_chains(seeds: &[u64]) -> Vec<Chain> {
    let model = FnModel::new("stub", |_: &[f64]| Ok(vec![0.0]));
    let prior = JointPrior::new(vec![
        ParameterPrior::new("x", PriorSpec::normal(0.0, 1.0).unwrap()),
        ParameterPrior::new("y", PriorSpec::normal(0.0, 1.0).unwrap()),
    ])
    .unwrap();
    let targets = TargetSet::new(vec![Target::new("t", 0.0, 1.0).unwrap()]).unwrap();
    let post = Posterior::new(&model, &prior, &targets);
    let proposal = ProposalSpec::new(vec![2.4, 2.4], 1).unwrap();
    let options = SamplerOptions::new(20_000, 2_000, 10).unwrap();
    seeds
        .iter()
        .enumerate()
        .map(|(k, &s)| run_chain(&post, &proposal, &options, &[0.0, 0.0], s, k).unwrap())
        .collect()
}

fn shifted(chain: &Chain, by: f64) -> Chain {
    let mut c = Chain::new(chain.meta.clone(), chain.names().clone());
    for i in 0..chain.len() {
        let s: Vec<f64> = chain.state(i).iter().map(|x| x + by).collect();
        c.push(
            chain.iterations()[i],
            &s,
            chain.log_posterior()[i],
            chain.gof()[i],
            chain.accepted()[i],
        );
    }
    c
}

fn write_chains(dir: &Path, chains: &[Chain]) {
    fs::create_dir_all(dir).unwrap();
    for c in chains {
        write_chain_csv(c, &dir.join(chain_file_name(c.meta.chain_id))).unwrap();
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn calibrate_writes_artifacts_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = data("valid/sis_small.toml");
    let cfg = cfg.to_str().unwrap();
    let o = bayescal(&["calibrate", cfg], a.path());
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(text(&o).contains("acceptance rate"), "{}", text(&o));
    assert!(text(&o).contains("R-hat"));
    let out = a.path().join("out");
    for f in [
        "chain_0.csv",
        "chain_1.csv",
        "chain_0.meta.json",
        "run.json",
        "report.json",
        "gof_trace.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let trace = fs::read_to_string(out.join("gof_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 160);

    assert_eq!(code(&bayescal(&["calibrate", cfg], b.path())), 0);
    assert_eq!(dir_bytes(&out), dir_bytes(&b.path().join("out")));
    assert!(!a.path().join("out.lock").exists());
}

#[test]
fn calibrate_rejects_invalid_configs_with_exit_2() {
    let root = tempfile::tempdir().unwrap();
    let o = bayescal(
        &[
            "calibrate",
            data("malformed/negative_sd.toml").to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("sd"), "{}", text(&o));
    let o = bayescal(
        &[
            "calibrate",
            data("malformed/missing_targets_file.toml")
                .to_str()
                .unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 2, "{}", text(&o));
    let o = bayescal(
        &["calibrate", data("does_not_exist.toml").to_str().unwrap()],
        root.path(),
    );
    assert_eq!(code(&o), 2);
    assert_eq!(
        fs::read_dir(root.path()).unwrap().count(),
        0,
        "nothing written"
    );
}

#[test]
fn diagnose_gate() {
    let root = tempfile::tempdir().unwrap();
    let chains = normal_chains(&[1, 2, 3]);

    let good = root.path().join("good");
    write_chains(&good, &chains);
    let o = bayescal(&["diagnose", good.to_str().unwrap()], root.path());
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(good.join("report.json").exists());

    let bad = root.path().join("bad");
    let displaced = vec![
        chains[0].clone(),
        chains[1].clone(),
        shifted(&chains[2], 5.0),
    ];
    write_chains(&bad, &displaced);
    let o = bayescal(&["diagnose", bad.to_str().unwrap()], root.path());
    assert_eq!(code(&o), 3, "{}", text(&o));

    let one = root.path().join("one");
    write_chains(&one, &chains[..1]);
    assert_eq!(
        code(&bayescal(&["diagnose", one.to_str().unwrap()], root.path())),
        2
    );

    let mismatch = root.path().join("mismatch");
    write_chains(&mismatch, &chains[..2]);
    fs::write(
        mismatch.join("chain_2.csv"),
        "chain_id,iteration,x,z,log_posterior,gof,accepted\n",
    )
    .unwrap();
    assert_eq!(
        code(&bayescal(
            &["diagnose", mismatch.to_str().unwrap()],
            root.path()
        )),
        2
    );
}

#[test]
fn export_kinds() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("chains");
    write_chains(&dir, &normal_chains(&[4, 5, 6]));

    let o = bayescal(
        &["export", dir.to_str().unwrap(), "--kind", "trace"],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    for p in ["x", "y"] {
        let t = fs::read_to_string(dir.join(format!("plots/trace_{p}.csv"))).unwrap();
        let mut lines = t.lines();
        assert_eq!(lines.next().unwrap(), "iteration,chain_0,chain_1,chain_2");
        assert_eq!(lines.count(), 1800);
    }

    let o = bayescal(
        &["export", dir.to_str().unwrap(), "--kind", "density"],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let t = fs::read_to_string(dir.join("plots/density_x.csv")).unwrap();
    let rows: Vec<Vec<f64>> = t
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let width = rows[1][0] - rows[0][0];
    for k in 1..4 {
        let mass: f64 = rows.iter().map(|r| r[k] * width).sum();
        assert!((mass - 1.0).abs() < 1e-9, "chain column {k}: {mass}");
    }

    let o = bayescal(
        &["export", dir.to_str().unwrap(), "--kind", "histogram"],
        root.path(),
    );
    assert_eq!(code(&o), 2);

    // No run record: prior-posterior has no priors to draw.
    let o = bayescal(
        &["export", dir.to_str().unwrap(), "--kind", "prior-posterior"],
        root.path(),
    );
    assert_eq!(code(&o), 2, "{}", text(&o));
}

#[test]
fn prior_posterior_export_after_calibrate() {
    let root = tempfile::tempdir().unwrap();
    let o = bayescal(
        &["calibrate", data("valid/sis_small.toml").to_str().unwrap()],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let dir = root.path().join("out");
    let dest = root.path().join("pp");
    let o = bayescal(
        &[
            "export",
            dir.to_str().unwrap(),
            "--kind",
            "prior-posterior",
            "--out",
            dest.to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let t = fs::read_to_string(dest.join("prior_posterior_c.csv")).unwrap();
    let mut lines = t.lines();
    assert_eq!(
        lines.next().unwrap(),
        "bin_lower,bin_upper,bin_center,prior_density,posterior_density"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 40);
    for w in rows.windows(2) {
        assert_eq!(w[0][1], w[1][0], "shared contiguous grid");
    }
    let prior_mass: f64 = rows.iter().map(|r| r[3] * (r[1] - r[0])).sum();
    let post_mass: f64 = rows.iter().map(|r| r[4] * (r[1] - r[0])).sum();
    assert!((post_mass - 1.0).abs() < 1e-9);
    assert!(
        prior_mass > 0.99 && prior_mass <= 1.0 + 1e-9,
        "{prior_mass}"
    );
    let record: io::RunRecord = io::read_json(&dir.join(io::RUN_RECORD)).unwrap();
    assert_eq!(record.parameters, ["c", "p", "d"]);
}

#[test]
fn sensitivity_command() {
    let root = tempfile::tempdir().unwrap();
    let o = bayescal(
        &[
            "sensitivity",
            data("valid/sis_sweep.toml").to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let out = root.path().join("out");
    assert!(out.join("a/chain_0.csv").exists());
    assert!(out.join("b/chain_1.csv").exists());
    let t = fs::read_to_string(out.join("sensitivity.csv")).unwrap();
    assert_eq!(t.lines().count(), 1 + 2 * 3);
    assert!(t.starts_with("prior_set,parameter,posterior_mean,posterior_sd,r_hat"));

    let o = bayescal(
        &[
            "sensitivity",
            data("valid/sis_small.toml").to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 2, "{}", text(&o));
}

#[test]
fn usage_errors_exit_2() {
    let root = tempfile::tempdir().unwrap();
    assert_eq!(code(&bayescal(&["frobnicate"], root.path())), 2);
    assert_eq!(code(&bayescal(&["export", "x"], root.path())), 2);
    assert_eq!(code(&bayescal(&["--help"], root.path())), 0);
}
