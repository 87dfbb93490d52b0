use std::process::Command;

use capa_core::em::{ApertureConfig, Scene};
use capa_core::presets::reference_targets;
use capa_harness::export::{export_results, read_results, sweep_header, write_sweep_csv, Manifest, SWEEP_SCHEMA};
use capa_harness::runner::{run_trials, Outcome};
use capa_harness::{AttitudeSetting, ExperimentConfig, HarnessError, Method, Sweep, SweepVariable};

fn small(noise: f64) -> ExperimentConfig {
    let aperture = ApertureConfig::square(0.5, 0.1).unwrap();
    let scene = Scene::new(aperture, reference_targets(), noise, 20, 0).unwrap();
    let mut cfg = ExperimentConfig {
        name: "small".into(),
        scene,
        quadrature_order: 8,
        sweep: Sweep { variable: SweepVariable::NoisePower, values: vec![noise] },
        trials: 1,
        methods: vec![Method::Tri],
        workers: Some(1),
        ..ExperimentConfig::default()
    };
    cfg.doa.grid.step = 0.05;
    cfg.doa.refine_tol = 1e-10;
    cfg.doa.max_evals = 800;
    cfg
}

#[test]
fn noiseless_single_trial_is_exact() {
    let res = run_trials(&small(0.0)).unwrap();
    let mse = res.records[0].mse(Method::Tri).unwrap();
    assert_eq!(mse.trials, 1);
    assert!(mse.theta < 1e-6 && mse.phi < 1e-6, "{mse:?}");
}

#[test]
fn config_roundtrips_through_json() {
    let cfg = ExperimentConfig { workers: None, ..small(1e-3) };
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let partial = ExperimentConfig::from_json(r#"{"trials": 7}"#).unwrap();
    assert_eq!(partial.trials, 7);
    assert_eq!(partial.quadrature_order, 16);
}

#[test]
fn invalid_configs_are_rejected() {
    let cases: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
        Box::new(|c| c.sweep.values.clear()),
        Box::new(|c| c.trials = 0),
        Box::new(|c| c.quadrature_order = 0),
        Box::new(|c| c.sweep = Sweep { variable: SweepVariable::TargetCount, values: vec![3.0] }),
        Box::new(|c| c.sweep = Sweep { variable: SweepVariable::QuadratureOrder, values: vec![4.5] }),
        Box::new(|c| c.sweep = Sweep { variable: SweepVariable::Snapshots, values: vec![1.0] }),
        Box::new(|c| c.sweep.values = vec![f64::NAN]),
        Box::new(|c| {
            c.methods.clear();
            c.attitude = AttitudeSetting::Off;
        }),
    ];
    for (i, f) in cases.iter().enumerate() {
        let mut c = small(1e-3);
        f(&mut c);
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))), "case {i}");
        assert_eq!(HarnessError::Config(String::new()).exit_code(), 2);
    }
}

#[test]
fn common_random_numbers_share_seeds() {
    let mut cfg = small(1e-3);
    cfg.sweep.values = vec![1e-4, 1e-3];
    assert_eq!(cfg.trial_seed(0, 3), cfg.trial_seed(1, 3));
    assert_ne!(cfg.trial_seed(0, 3), cfg.trial_seed(0, 4));
    cfg.common_random_numbers = false;
    assert_ne!(cfg.trial_seed(0, 3), cfg.trial_seed(1, 3));
}

fn export_bytes(cfg: &ExperimentConfig) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let res = run_trials(cfg).unwrap();
    let mut files: Vec<_> = export_results(&res, dir.path())
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn exports_are_deterministic_across_worker_counts() {
    let mut cfg = small(1e-3);
    cfg.sweep.values = vec![1e-4, 1e-2];
    cfg.trials = 3;
    cfg.methods = vec![Method::Tri, Method::Singlepol, Method::Crlb];
    cfg.attitude = AttitudeSetting::Blind;
    let a = export_bytes(&cfg);
    cfg.workers = Some(3);
    let b = export_bytes(&cfg);
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
}

#[test]
fn export_layout() {
    let mut cfg = ExperimentConfig { workers: None, ..small(1e-3) };
    cfg.methods = vec![Method::Tri, Method::Crlb];
    cfg.attitude = AttitudeSetting::Known;
    cfg.output_prefix = "t_".into();

    let mut buf = Vec::new();
    write_sweep_csv(&cfg, &[], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(
        sweep_header(&cfg),
        [
            "noise_power", "trials", "tri_mse_theta", "tri_mse_phi", "tri_failures", "crlb_theta", "crlb_phi", "mae_best",
            "mae_worst", "ambiguity_rate", "attitude_failures"
        ]
    );

    let dir = tempfile::tempdir().unwrap();
    let res = run_trials(&cfg).unwrap();
    assert_eq!(res.trial_seeds.len(), 1);
    assert!(matches!(res.outcomes[0][0].doa[&Method::Tri], Outcome::Ok(_)));
    export_results(&res, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("t_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(read_results(&dir.path().join("t_results.json")).unwrap(), res);
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.files.iter().any(|e| e.file == "t_sweep.csv" && e.schema == SWEEP_SCHEMA));
}

#[test]
fn failures_are_recorded_not_fatal() {
    let mut cfg = small(1e-3);
    let along = cfg.scene.targets[1].direction();
    cfg.scene.targets[1] = cfg.scene.targets[1].with_attitude(along);
    cfg.methods = vec![Method::Tri, Method::Crlb];
    cfg.trials = 2;
    let res = run_trials(&cfg).unwrap();
    let crlb = res.records[0].crlb.as_ref().unwrap();
    assert_eq!(crlb.failures, 2);
}

fn capa(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_capa")).args(args).output().unwrap()
}

#[test]
fn cli_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg = small(1e-4);
    cfg.methods = vec![Method::Tri, Method::Crlb];
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let c = cfg_path.to_str().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();

    let list = capa(&["presets"]);
    assert!(list.status.success());
    assert!(String::from_utf8_lossy(&list.stdout).contains("convergence"));

    let doa = capa(&["--config", c, "--degrees", "doa"]);
    assert!(doa.status.success(), "{}", String::from_utf8_lossy(&doa.stderr));
    let v: serde_json::Value = serde_json::from_slice(&doa.stdout).unwrap();
    assert_eq!(v["units"], "deg");
    assert_eq!(v["estimates"].as_array().unwrap().len(), 2);

    assert!(capa(&["--config", c, "attitude", "--mode", "known", "--truth-doas"]).status.success());
    assert!(capa(&["--config", c, "--out-dir", o, "crlb"]).status.success());
    assert!(capa(&["--config", c, "--out-dir", o, "spectrum", "--step", "0.1"]).status.success());
    assert!(capa(&["--config", c, "--out-dir", o, "sweep"]).status.success());
    for f in ["crlb.json", "spectrum_tri.csv", "sweep.csv", "results.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    std::fs::write(&cfg_path, r#"{"trials": 0}"#).unwrap();
    assert_eq!(capa(&["--config", c, "doa"]).status.code(), Some(2));
    assert_eq!(capa(&["--config", "/nonexistent.json", "doa"]).status.code(), Some(4));
    assert_eq!(capa(&["sweep", "--preset", "nope"]).status.code(), Some(2));
}
