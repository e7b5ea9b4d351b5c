//! End-to-end tests of the command layer: file contracts, determinism,
//! validation errors and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use identikit::commands::{
    cmd_fit, cmd_forward, cmd_simulate, cmd_sobol, cmd_structural, cmd_workflow, Ctx,
};
use identikit::config::RunConfig;
use identikit::CliError;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load(name: &str) -> RunConfig {
    RunConfig::from_path(&config_path(name)).expect("config loads")
}

fn ctx_in(dir: &Path, cfg: RunConfig) -> Ctx {
    Ctx::new(cfg, None, Some(dir.to_path_buf()), false)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|_| panic!("missing {name}"))
}

#[test]
fn simulate_writes_trajectory_with_grid_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("sir_simulate.json");
    cmd_simulate(&ctx_in(tmp.path(), cfg)).unwrap();
    let csv = read(tmp.path(), "trajectory.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,S,I,R");
    assert_eq!(lines.count(), 301);
    let manifest = read(tmp.path(), "manifest.json");
    assert!(manifest.contains("trajectory.csv"));
    assert!(manifest.contains("sha256"));
}

#[test]
fn seirdz_simulation_has_five_states_and_honors_the_switch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("seirdz_simulate.json");
    cmd_simulate(&ctx_in(tmp.path(), cfg)).unwrap();
    let csv = read(tmp.path(), "trajectory.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,S,E,I,R,D");
    // t_lock = 15 with grid step 0.5: S declines faster just before the
    // lockdown than just after it
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let idx = |t: f64| rows.iter().position(|r| (r[0] - t).abs() < 1e-9).unwrap();
    let drop_before = rows[idx(14.0)][1] - rows[idx(15.0)][1];
    let drop_after = rows[idx(16.0)][1] - rows[idx(17.0)][1];
    assert!(
        drop_before > drop_after,
        "before {drop_before} after {drop_after}"
    );
}

#[test]
fn missing_initial_condition_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = load("sir_simulate.json");
    cfg.initial_conditions.remove("I");
    let err = cmd_simulate(&ctx_in(tmp.path(), cfg)).unwrap_err();
    match err {
        CliError::Config(msg) => assert!(msg.contains("initial_conditions.I"), "{msg}"),
        other => panic!("wrong error kind: {other}"),
    }
}

#[test]
fn simulate_rejects_free_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("example1_forward.json");
    let err = cmd_simulate(&ctx_in(tmp.path(), cfg)).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
}

#[test]
fn forward_outputs_are_byte_identical_across_reruns() {
    let mut cfg = load("example1_forward.json");
    cfg.sampling.as_mut().unwrap().n = 200;
    cfg.sampling.as_mut().unwrap().n_pdf = Some(400);

    let run = |dir: &Path| {
        cmd_forward(&ctx_in(dir, cfg.clone())).unwrap();
        let mut files: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| (f.clone(), std::fs::read(dir.join(f)).unwrap()))
            .collect::<Vec<_>>()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = run(a.path());
    let fb = run(b.path());
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert_eq!(ba, bb, "file {na} differs between reruns");
    }
    // expected artifacts
    let names: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    assert!(names.iter().any(|n| *n == "samples.csv"));
    assert!(names.iter().any(|n| *n == "forward_I.csv"));
    assert!(names.iter().any(|n| n.starts_with("pdf_peak_time_I")));
}

#[test]
fn forward_with_fixed_parameters_collapses_bands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("sir_simulate.json");
    cmd_forward(&ctx_in(tmp.path(), cfg)).unwrap();
    let csv = read(tmp.path(), "forward_I.csv");
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        // var = 0 and q05 = q95 = mean
        assert_eq!(v[2], 0.0);
        assert_eq!(v[3], v[1]);
        assert_eq!(v[4], v[1]);
    }
}

#[test]
fn structural_verdict_names_the_identifiable_combinations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("example6_structural_halt.json");
    cmd_structural(&ctx_in(tmp.path(), cfg)).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "structural.json")).unwrap();
    assert_eq!(json["verdict"], "combinations");
    let combos: Vec<String> = json["combinations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(combos, vec!["r".to_string(), "K*beta".to_string()]);
    // K*beta = 3 * 0.3 = 0.9 at the configured truth
    let v = json["values"]["K*beta"].as_f64().unwrap();
    assert!((v - 0.9).abs() < 1e-12);
}

#[test]
fn fit_command_reproduces_example3_bands() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = load("example3_fit.json");
    cfg.fit.as_mut().unwrap().restarts = 8;
    cmd_fit(&ctx_in(tmp.path(), cfg)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "fit.json")).unwrap();
    let beta = json["theta_mle"][0].as_f64().unwrap();
    let r = json["theta_mle"][1].as_f64().unwrap();
    let sigma = json["sigma_hat"][0].as_f64().unwrap();
    assert!((beta - 0.29).abs() <= 0.02, "beta {beta}");
    assert!((r - 0.09).abs() <= 0.01, "r {r}");
    assert!(sigma > 0.02 && sigma < 0.035, "sigma {sigma}");
    // both covariance routes present
    assert!(json["covariance"].is_array());
    assert!(json["covariance_jacobian"].is_array());
    // gof and data artifacts exist
    read(tmp.path(), "gof.csv");
    read(tmp.path(), "data.csv");
    read(tmp.path(), "fit_summary.csv");
}

#[test]
fn sobol_command_writes_table_and_screening() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = load("example1_forward.json");
    cfg.sobol = serde_json::from_str(r#"{"n": 128, "seed": 3}"#).unwrap();
    cmd_sobol(&ctx_in(tmp.path(), cfg)).unwrap();
    let csv = read(tmp.path(), "sobol.csv");
    assert!(csv.starts_with("observable,time,param,principal,principal_se,total,total_se"));
    let json: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "sobol_screening.json")).unwrap();
    // both SIR parameters clear the default floor
    assert_eq!(json["hard_to_infer"].as_array().unwrap().len(), 0);
}

#[test]
fn workflow_halts_at_the_structural_gate_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("example6_structural_halt.json");
    let err = cmd_workflow(&ctx_in(tmp.path(), cfg)).unwrap_err();
    assert!(matches!(err, CliError::GateHalt(_)));
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "workflow.json")).unwrap();
    assert_eq!(json["halted"], true);
    let stages: Vec<&str> = json["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        vec![
            "sobol_screening",
            "structural_gate",
            "practical_gate",
            "inverse_uq",
            "posterior_forward"
        ]
    );
    let statuses: Vec<&str> = json["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["status"].as_str().unwrap())
        .collect();
    assert_eq!(statuses[1], "halted");
    assert_eq!(statuses[2], "skipped");
    assert_eq!(statuses[3], "skipped");
    // the report acknowledges that sampling-based inversion is out of scope
    let summary = json["stages"][1]["summary"].as_str().unwrap();
    assert!(summary.contains("out of scope"), "{summary}");
}

#[test]
fn binary_exit_codes_match_the_contract() {
    let bin = env!("CARGO_BIN_EXE_identikit");

    // validation error: nonexistent config
    let out = Command::new(bin)
        .args(["fit", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "io error is a runtime failure");

    // validation error: malformed config
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"model\": {\"name\": \"sir\"}}").unwrap();
    let out = Command::new(bin)
        .args(["simulate", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // gate halt: structurally non-identifiable workflow
    let cfg = config_path("example6_structural_halt.json");
    let out = Command::new(bin)
        .args([
            "workflow",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("halt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // success: simulate
    let out = Command::new(bin)
        .args([
            "simulate",
            "--config",
            config_path("sir_simulate.json").to_str().unwrap(),
            "--out",
            tmp.path().join("sim").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn dataset_csv_round_trips_with_ragged_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("data.csv");
    std::fs::write(&path, "time,I_obs,R_obs\n1,0.05,0.01\n2,,0.02\n3,0.07,\n").unwrap();
    let data = identikit::dataio::read_dataset_csv(&path).unwrap();
    assert_eq!(data.series.len(), 2);
    assert_eq!(data.series[0].points, vec![(1.0, 0.05), (3.0, 0.07)]);
    assert_eq!(data.series[1].points, vec![(1.0, 0.01), (2.0, 0.02)]);
    let emitted = String::from_utf8(identikit::dataio::dataset_csv(&data)).unwrap();
    assert_eq!(emitted, "time,I_obs,R_obs\n1,0.05,0.01\n2,,0.02\n3,0.07,\n");
}

#[test]
fn profile_command_finds_k_identifiable_past_the_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("example8_profile_K.json");
    identikit::commands::cmd_profile(&ctx_in(tmp.path(), cfg)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "profiles.json")).unwrap();
    let k = json
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["param"] == "K")
        .unwrap();
    assert_eq!(k["identifiable"], true);
    let argmin = k["argmin"].as_f64().unwrap();
    assert!((argmin - 3.0).abs() <= 0.5, "argmin {argmin}");
    read(tmp.path(), "profile_K.csv");
}

#[test]
fn workflow_example9_reports_weak_parameters_and_hierarchical_refit() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = load("example9_seirdz_fit.json");
    // desk-scale settings for the test
    cfg.sobol.as_mut().unwrap().n = 128;
    cfg.sampling.as_mut().unwrap().n = 300;
    cmd_workflow(&ctx_in(tmp.path(), cfg)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "workflow.json")).unwrap();
    assert_eq!(json["halted"], false);
    // the SEIRDz fit is practically non-identifiable in some directions:
    // the practical gate must say so rather than silently continuing
    let practical = json["stages"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["stage"] == "practical_gate")
        .unwrap();
    let summary = practical["summary"].as_str().unwrap();
    assert!(
        summary.contains("non-identifiable"),
        "expected weak parameters in: {summary}"
    );
    // hierarchical remedy artifacts are present
    read(tmp.path(), "hierarchical_fit.json");
    read(tmp.path(), "profiles.json");
    // prior bands always exist; posterior bands may be legitimately skipped
    read(tmp.path(), "prior_I.csv");
}

#[test]
fn thread_cap_env_var_is_accepted_and_deterministic() {
    let bin = env!("CARGO_BIN_EXE_identikit");
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (dir, threads) in [("t1", "1"), ("t2", "4")] {
        let out_dir = tmp.path().join(dir);
        let out = Command::new(bin)
            .env("IDENTIKIT_THREADS", threads)
            .args([
                "fit",
                "--config",
                config_path("example3_fit.json").to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push(std::fs::read(out_dir.join("fit.json")).unwrap());
    }
    assert_eq!(
        outputs[0], outputs[1],
        "fit.json differs across thread counts"
    );
}

#[test]
fn fit_accepts_csv_data() {
    // synthesize through one run, feed the emitted CSV back through another
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = load("example3_fit.json");
    cfg.fit.as_mut().unwrap().restarts = 4;
    cmd_fit(&ctx_in(tmp.path(), cfg)).unwrap();
    let data_path = tmp.path().join("data.csv");

    let mut cfg2 = load("example3_fit.json");
    cfg2.fit.as_mut().unwrap().restarts = 4;
    cfg2.data = Some(identikit::config::DataConfig {
        csv: Some(data_path),
        synthetic: None,
    });
    let tmp2 = tempfile::tempdir().unwrap();
    cmd_fit(&ctx_in(tmp2.path(), cfg2)).unwrap();
    let a: serde_json::Value = serde_json::from_str(&read(tmp.path(), "fit.json")).unwrap();
    let b: serde_json::Value = serde_json::from_str(&read(tmp2.path(), "fit.json")).unwrap();
    let ba = a["theta_mle"][0].as_f64().unwrap();
    let bb = b["theta_mle"][0].as_f64().unwrap();
    assert!(
        (ba - bb).abs() < 1e-9,
        "CSV round trip changed the fit: {ba} vs {bb}"
    );
}
