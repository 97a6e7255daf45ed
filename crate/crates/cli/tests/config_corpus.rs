use std::path::{Path, PathBuf};

use bayescal::config;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn tomls(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn every_malformed_config_is_rejected_with_exit_2() {
    let files = tomls(&data_dir().join("malformed"));
    assert!(files.len() >= 40, "corpus has {} files", files.len());
    let mut accepted = Vec::new();
    for f in &files {
        match config::load(f) {
            Ok(_) => accepted.push(f.display().to_string()),
            Err(e) => assert_eq!(e.exit_code(), 2, "{}: {e}", f.display()),
        }
    }
    assert!(
        accepted.is_empty(),
        "accepted malformed configs: {accepted:?}"
    );
}

#[test]
fn valid_corpus_loads() {
    for f in tomls(&data_dir().join("valid")) {
        config::load(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let files = tomls(&root);
    assert_eq!(files.len(), 4);
    for f in files {
        let c = config::load(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert!(c.run.output.ends_with(f.file_stem().unwrap()));
    }
}

#[test]
fn negative_sd_message_names_the_field() {
    let e = config::load(&data_dir().join("malformed/negative_sd.toml")).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("sd: must be > 0"), "{msg}");
}
