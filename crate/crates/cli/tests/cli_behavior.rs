//! End-to-end behavior of the command-line front end: output schema,
//! determinism, config merging, exit codes, and the cross-check suite.

use std::fs;

use mimotrain_cli::output::{csv_columns, RunManifest};
use mimotrain_cli::{run_cli, verify};

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["mimotrain"];
    full.extend_from_slice(args);
    run_cli(full)
}

#[test]
fn run_twice_yields_identical_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let code = run(&[
            "run", "--n-tx", "8", "--t-len", "2", "--rho-db", "0", "--a", "0.9",
            "--strategy", "cl-mem-snr", "--iterations", "100", "--seed", "7",
            "--bits", "3", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let b1 = fs::read(&out1).unwrap();
    assert!(!b1.is_empty());
    assert_eq!(b1, fs::read(&out2).unwrap());
}

#[test]
fn csv_schema_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let code = run(&[
        "run", "--n-tx", "4", "--t-len", "2", "--strategy", "ol_mem", "--bits", "2",
        "--iterations", "20", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strategy,block,n_tx,t_len,rho_db,a,eta,bits,gamma_db,gamma_stderr,mse,mse_stderr,samples"
    );
    assert_eq!(text.lines().count(), 11);
    assert!(text.ends_with('\n'));
    assert!(!text.contains('\r'));
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 13);
    assert_eq!(fields[0], "ol_mem");
    assert_eq!(fields[1], "0");
    // 12 significant digits in scientific form
    let gamma = fields[8];
    let (mantissa, _) = gamma.split_once('e').unwrap();
    let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
    assert_eq!(digits, 12, "unexpected float width in {gamma:?}");
}

#[test]
fn bound_columns_append_after_base_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let code = run(&[
        "run", "--n-tx", "4", "--t-len", "2", "--strategy", "cl_ss_full",
        "--iterations", "10", "--bounds", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').collect::<Vec<_>>(), csv_columns(true));
    assert!(header.ends_with("gamma_bound_db,gamma_ceiling_db"));
    // bound columns are config-level: constant across a run's blocks
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r[13] == rows[0][13] && r[14] == rows[0][14]));
}

#[test]
fn manifest_records_resolved_config_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let manifest = dir.path().join("m.json");
    let code = run(&[
        "run", "--n-tx", "4", "--t-len", "1", "--rho-db", "10", "--strategy", "ol_ss",
        "--bits", "2", "--iterations", "15", "--seed", "3",
        "--out", out.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&manifest).unwrap();
    let m = RunManifest::from_json(&text).unwrap();
    assert_eq!(m.format, "mimotrain-run-manifest");
    assert_eq!(m.command, "run");
    assert_eq!(m.runs.len(), 1);
    let cfg = &m.runs[0].config;
    assert_eq!((cfg.n_tx, cfg.t_len, cfg.bits, cfg.master_seed), (4, 1, 2, 3));
    assert!((cfg.rho - 10.0).abs() < 1e-9);
    assert!((m.runs[0].resolved_eta - 0.9881).abs() < 1e-4);
    assert!(m.wall_time_s >= 0.0);
    // byte-level round trip of the serialized form
    let again = RunManifest::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(again, m);
}

#[test]
fn config_file_merges_under_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"n_tx": 4, "t_len": 2, "rho_db": 10.0, "a": 0.5, "strategy": "ol_mem",
           "bits": 2, "iterations": 30, "seed": 9, "eta": 0.95, "shuffle": false}"#,
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let manifest = dir.path().join("m.json");
    let code = run(&[
        "run", "--config", cfg_path.to_str().unwrap(), "--iterations", "12",
        "--out", out.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let m = RunManifest::from_json(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let cfg = &m.runs[0].config;
    assert_eq!(cfg.n_tx, 4, "file key applies");
    assert_eq!(cfg.iterations, 12, "explicit flag beats file key");
    assert_eq!(cfg.master_seed, 9);
    assert!(!cfg.shuffle_codebook);
    assert!((m.runs[0].resolved_eta - 0.95).abs() < 1e-12);

    // unknown keys are rejected, not ignored
    fs::write(&cfg_path, r#"{"n_tx": 4, "iteratons": 5}"#).unwrap();
    let code = run(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn codebook_design_inspect_round_trip_and_tamper_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let cb = dir.path().join("cb.json");
    let code = run(&[
        "codebook", "design", "--n-tx", "8", "--t-len", "2", "--bits", "3",
        "--budget", "100", "--seed", "1", "-o", cb.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(run(&["codebook", "inspect", cb.to_str().unwrap()]), 0);

    // same design twice is byte-identical
    let cb2 = dir.path().join("cb2.json");
    let code = run(&[
        "codebook", "design", "--n-tx", "8", "--t-len", "2", "--bits", "3",
        "--budget", "100", "--seed", "1", "-o", cb2.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(&cb).unwrap(), fs::read(&cb2).unwrap());

    // a run can consume the file
    let out = dir.path().join("r.csv");
    let code = run(&[
        "run", "--n-tx", "8", "--t-len", "2", "--bits", "3", "--strategy", "ol_ss",
        "--iterations", "10", "--codebook-file", cb.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    // tampering flips one scalar; inspect and run must both reject
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cb).unwrap()).unwrap();
    doc["entries"][0][0][0][0] = serde_json::json!(5.0);
    fs::write(&cb, serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(run(&["codebook", "inspect", cb.to_str().unwrap()]), 1);
    let code = run(&[
        "run", "--n-tx", "8", "--t-len", "2", "--bits", "3", "--strategy", "ol_ss",
        "--iterations", "10", "--codebook-file", cb.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn exit_codes_split_usage_from_runtime_failures() {
    // parse-level problems: 2
    assert_eq!(run(&["run", "--not-a-flag"]), 2);
    assert_eq!(run(&["run", "--preset", "fig3", "--n-tx", "8"]), 2);
    assert_eq!(run(&["run", "--eta", "0.9", "--v-kmh", "3"]), 2);
    assert_eq!(run(&["verify", "--only", "nonsense"]), 2);
    assert_eq!(run(&["nope"]), 2);
    // post-parse problems: 1
    assert_eq!(run(&["run", "--strategy", "bogus", "--iterations", "1"]), 1);
    assert_eq!(run(&["run", "--preset", "fig99"]), 1);
    assert_eq!(run(&["codebook", "inspect", "/definitely/missing.json"]), 1);
    assert_eq!(run(&["sweep", "--axis", "rho", "--values", "1", "--iterations", "1"]), 1);
    // help exits clean
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn sweep_converts_db_axis_and_emits_all_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let manifest = dir.path().join("s.json");
    let code = run(&[
        "sweep", "--axis", "rho_db", "--values", "0,10", "--n-tx", "4", "--t-len", "2",
        "--strategy", "ol_mem", "--bits", "2", "--iterations", "10",
        "--out", out.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let m = RunManifest::from_json(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m.command, "sweep");
    let rhos: Vec<f64> = m.runs.iter().map(|r| r.config.rho).collect();
    assert!((rhos[0] - 1.0).abs() < 1e-12 && (rhos[1] - 10.0).abs() < 1e-9);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1 + 20);

    let code = run(&[
        "sweep", "--axis", "strategy", "--values", "ol_ss,cl_ss_full", "--n-tx", "4",
        "--t-len", "2", "--bits", "2", "--iterations", "10",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\nol_ss,") && text.contains("\ncl_ss_full,"));
}

#[test]
fn preset_runs_expand_and_honor_scale_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let manifest = dir.path().join("p.json");
    let code = run(&[
        "run", "--preset", "fig8", "--iterations", "2", "--budget", "40",
        "--out", out.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let m = RunManifest::from_json(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m.preset.as_deref(), Some("fig8"));
    assert_eq!(m.runs.len(), 4);
    assert!(m.runs.iter().all(|r| r.config.iterations == 2));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 10);
}

#[test]
fn workers_env_var_is_honored_and_results_match() {
    let dir = tempfile::tempdir().unwrap();
    let out_env = dir.path().join("e.csv");
    let out_flag = dir.path().join("f.csv");
    std::env::set_var(mimotrain_cli::WORKERS_ENV, "2");
    let code = run(&[
        "run", "--n-tx", "4", "--t-len", "2", "--strategy", "ol_mem", "--bits", "2",
        "--iterations", "25", "--out", out_env.to_str().unwrap(),
    ]);
    std::env::remove_var(mimotrain_cli::WORKERS_ENV);
    assert_eq!(code, 0);
    let code = run(&[
        "run", "--n-tx", "4", "--t-len", "2", "--strategy", "ol_mem", "--bits", "2",
        "--iterations", "25", "--workers", "1", "--out", out_flag.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(&out_env).unwrap(), fs::read(&out_flag).unwrap());
}

#[test]
fn fast_verify_checks_pass_in_both_modes() {
    for strict in [false, true] {
        for name in ["ss-mse", "tracked-mse", "snr-bounds"] {
            let reports = verify::run_checks(Some(name), strict).unwrap();
            assert_eq!(reports.len(), 1);
            assert!(
                reports[0].passed,
                "{name} (strict={strict}): {}",
                reports[0].detail
            );
        }
    }
}
