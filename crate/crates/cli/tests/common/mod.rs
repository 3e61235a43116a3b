#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsmpc::config::{preset, ExperimentConfig};

/// Small, fast configurations covering every experiment.
pub fn tiny_configs() -> Vec<(&'static str, ExperimentConfig)> {
    let mut three = preset("three-level").unwrap();
    three.model.t_final = 2.0;
    three.n_paths = 20;

    let mut scaling = preset("scaling-ci").unwrap();
    scaling.model.t_final = 2.0;
    scaling.scaling.as_mut().unwrap().paths = Some(vec![12, 3]);
    scaling.record_every = 20;

    let mut ising = preset("ising-4").unwrap();
    ising.model.t_final = 0.5;
    ising.n_paths = 3;
    ising.ising.as_mut().unwrap().window_periods = 5;

    let mut compare = preset("compare-ci").unwrap();
    compare.model.t_final = 1.5;
    compare.n_paths = 10;
    let c = compare.compare.as_mut().unwrap();
    c.scenario_counts = vec![4, 8];
    c.timing_paths = 1;

    let mut reduction = preset("reduction-check").unwrap();
    reduction.n_paths = 40;

    vec![
        ("three-level", three),
        ("scaling", scaling),
        ("ising", ising),
        ("compare", compare),
        ("reduction-check", reduction),
    ]
}

pub fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

pub fn qsmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsmpc"))
        .args(args)
        .env_remove("QSMPC_THREADS")
        .output()
        .unwrap()
}

/// Runs `experiment` from `config` into `out` with the given thread count.
pub fn run_cli(experiment: &str, config: &Path, out: &Path, threads: usize) -> Output {
    let threads = threads.to_string();
    let out_str = out.to_str().unwrap();
    let config = config.to_str().unwrap();
    let o = qsmpc(&[experiment, "--config", config, "--threads", &threads, "--out", out_str]);
    assert!(
        o.status.code().is_some_and(|c| c <= 1),
        "{experiment} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Contents of the non-timing CSV files listed in the manifest.
pub fn deterministic_outputs(out: &Path) -> BTreeMap<String, Vec<u8>> {
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let name = f.as_str().unwrap().to_string();
            let bytes = std::fs::read(out.join(&name)).unwrap();
            (name, bytes)
        })
        .collect()
}
