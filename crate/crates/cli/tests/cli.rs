mod common;

use common::*;
use qsmpc::config::{preset, ExperimentConfig, PRESETS};
use qsmpc::{experiments, CliError};

#[test]
fn outputs_repeat_exactly_across_runs_and_thread_counts() {
    for (name, cfg) in tiny_configs() {
        let dir = scratch(&format!("determinism-{name}"));
        let config = write_config(&dir, &cfg);
        let runs: Vec<_> = [(1, "a"), (1, "b"), (3, "c")]
            .iter()
            .map(|(threads, tag)| {
                let out = dir.join(tag);
                run_cli(name, &config, &out, *threads);
                deterministic_outputs(&out)
            })
            .collect();
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{name}: repeated run differs");
        assert_eq!(runs[0], runs[2], "{name}: thread count changes output");
    }
}

#[test]
fn table_headers_match_golden() {
    let mut got = String::new();
    for (_, cfg) in tiny_configs() {
        let report = experiments::run(&cfg).unwrap();
        for t in &report.tables {
            got.push_str(&format!("{}: {}\n", t.file_name(), t.headers.join(",")));
        }
    }
    let golden = include_str!("golden/headers.txt");
    assert_eq!(got, golden);
}

#[test]
fn manifest_records_config_and_versions() {
    let (name, cfg) = tiny_configs().remove(4);
    let dir = scratch("manifest");
    let config = write_config(&dir, &cfg);
    let out = dir.join("out");
    let o = qsmpc(&[name, "--config", config.to_str().unwrap(), "--seed", "11", "--paths", "30", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["tool"], "qsmpc");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["experiment"], "reduction-check");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["n_paths"], 30);
    assert_eq!(m["config"]["seed"], 11);
    let hash = m["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let recorded: ExperimentConfig = serde_json::from_value(m["config"].clone()).unwrap();
    assert_eq!(qsmpc::output::config_hash(&recorded), hash);
}

#[test]
fn thread_count_falls_back_to_environment() {
    let (name, cfg) = tiny_configs().remove(4);
    let dir = scratch("env-threads");
    let config = write_config(&dir, &cfg);
    let out = dir.join("out");
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_qsmpc"))
        .args([name, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("QSMPC_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threads"], 2);
}

#[test]
fn configuration_errors_name_the_field() {
    let dir = scratch("bad-config");
    let mut cfg = preset("three-level").unwrap();
    cfg.model.target_index = Some(7);
    let config = write_config(&dir, &cfg);
    let o = qsmpc(&["three-level", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.target_index"));

    let o = qsmpc(&["scaling", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));

    let text = preset("three-level").unwrap().to_json().replace("\"n_paths\"", "\"n_path\"");
    let err = ExperimentConfig::from_json(&text).unwrap_err();
    assert!(err.to_string().contains("n_path"), "{err}");

    let mut cfg = preset("three-level").unwrap();
    cfg.model.dt = -1.0;
    assert!(cfg.validate().unwrap_err().to_string().contains("dt"));

    let mut cfg = preset("reduction-check").unwrap();
    cfg.reduction.as_mut().unwrap().amplitude = 9.0;
    match cfg.validate() {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "reduction.amplitude"),
        other => panic!("{other:?}"),
    }

    let o = qsmpc(&["compare", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preset"));
}

#[test]
fn every_preset_validates() {
    for (name, _) in PRESETS {
        let cfg = preset(name).unwrap();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
    let o = qsmpc(&["presets"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), PRESETS.len());
}

#[test]
fn zero_horizon_scaling_reports_the_mixed_state_overlap() {
    let mut cfg = preset("scaling-ci").unwrap();
    cfg.model.t_final = 0.0;
    cfg.scaling.as_mut().unwrap().j_values = vec![1.0];
    cfg.scaling.as_mut().unwrap().paths = None;
    cfg.n_paths = 4;
    let report = experiments::run(&cfg).unwrap();
    let f: f64 = report.table("scaling").unwrap().column("terminal_mean_fidelity").unwrap()[0]
        .parse()
        .unwrap();
    assert!((f - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn ising_run_starts_outside_the_target() {
    let (_, cfg) = tiny_configs().remove(2);
    let report = experiments::run(&cfg).unwrap();
    let table = report.table("ising").unwrap();
    let f0: f64 = table.column("mean_fidelity").unwrap()[0].parse().unwrap();
    assert!(f0.abs() < 1e-12);
    assert!(report.checks[0].passed);
}

#[test]
fn born_rule_case_of_the_reduction_check_is_exact() {
    let (_, cfg) = tiny_configs().remove(4);
    let report = experiments::run(&cfg).unwrap();
    let t = report.table("reduction_check").unwrap();
    let reduced: f64 = t.column("reduced_cost").unwrap()[0].parse().unwrap();
    assert!((reduced - 1.4).abs() < 1e-12);
}
