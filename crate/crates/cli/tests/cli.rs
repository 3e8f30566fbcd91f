use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chanmetrics(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanmetrics"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_small(dir: &Path, seed: &str) -> Output {
    chanmetrics(&[
        "synth", "--model", "iid", "--antennas", "8", "--snapshots", "300", "--freqs", "2", "--positions", "4",
        "--seed", seed, "--out", p(dir),
    ])
}

#[test]
fn synth_writes_requested_positions() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let out = chanmetrics(&[
        "synth", "--model", "iid", "--antennas", "32", "--snapshots", "600", "--freqs", "2", "--positions", "10",
        "--seed", "7", "--out", p(&ds),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ds.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["positions"].as_array().unwrap().len(), 10);
    assert_eq!(manifest["num_antennas"], 32);
    for i in 0..10 {
        let len = fs::metadata(ds.join(format!("p{i:03}.cf64"))).unwrap().len();
        assert_eq!(len, 600 * 2 * 32 * 16);
    }
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(code(&synth_small(&a, "3")), 0);
    assert_eq!(code(&synth_small(&b, "3")), 0);
    assert_eq!(code(&synth_small(&c, "4")), 0);
    for f in ["manifest.json", "p000.cf64", "p003.cf64"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("p000.cf64")).unwrap(), fs::read(c.join("p000.cf64")).unwrap());
}

#[test]
fn synth_rejects_bad_models() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("x");
    let out = chanmetrics(&["synth", "--antennas", "0", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
    let out = chanmetrics(&["synth", "--model", "kronecker", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 2);
    let out = chanmetrics(&["synth", "--model", "laplace", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&chanmetrics(&["synth", "--bogus-flag"])), 2);
}

#[test]
fn synth_multipath_and_ura() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let out = chanmetrics(&[
        "synth", "--model", "multipath", "--angles", "-0.4,0.3", "--powers", "1,0.5", "--antennas", "8", "--array",
        "ura", "--rows", "2", "--snapshots", "50", "--freqs", "1", "--positions", "2", "--out", p(&ds),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ds.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["array"]["kind"], "ura");
    assert_eq!(code(&chanmetrics(&["validate", p(&ds)])), 0);
}

#[test]
fn validate_reports_per_position() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth_small(&ds, "1");
    let out = chanmetrics(&["validate", p(&ds)]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);

    let file = ds.join("p002.cf64");
    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() - 16]).unwrap();
    let out = chanmetrics(&["validate", p(&ds)]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("FAIL p002")), "{stdout}");
    assert!(stdout.lines().any(|l| l == "PASS p001"));
}

#[test]
fn validate_rejects_geometry_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth_small(&ds, "1");
    let path = ds.join("manifest.json");
    let mut manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    manifest["array"] = serde_json::json!({"kind": "ura", "rows": 3, "cols": 2});
    fs::write(&path, manifest.to_string()).unwrap();
    let out = chanmetrics(&["validate", p(&ds)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("FAIL manifest"));
}

#[test]
fn validate_missing_path_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&chanmetrics(&["validate", p(&tmp.path().join("nope"))])), 3);
    assert_eq!(
        code(&chanmetrics(&["analyze", "--dataset", p(&tmp.path().join("nope")), "--experiments", "hardening"])),
        3
    );
}

#[test]
fn analyze_hardening_writes_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth_small(&ds, "1");
    let res = tmp.path().join("res");
    let out = chanmetrics(&[
        "analyze", "--dataset", p(&ds), "--experiments", "hardening", "--window-length", "100", "--out", p(&res),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(res.join("hardening_std.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("m,mean,stderr,trials"));
    assert_eq!(csv.lines().count(), 9);
    assert!(res.join("hardening_db.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiments"]["hardening"]["windows"], 12);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("hardening:"));
}

#[test]
fn analyze_validation_failures_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth_small(&ds, "1");
    let res = tmp.path().join("res");
    let cases: [&[&str]; 6] = [
        &["--experiments", "hardening,bogus"],
        &["--experiments", "hardening", "--antenna-counts", "1,9"],
        &["--experiments", "hardening", "--window-length", "0"],
        &["--experiments", "eigen", "--p", "9"],
        &["--experiments", "condition", "--node-counts", "2,2"],
        &["--experiments", "schedule", "--group-size", "1"],
    ];
    for extra in cases {
        let mut args = vec!["analyze", "--dataset", p(&ds), "--out", p(&res)];
        args.extend_from_slice(extra);
        let out = chanmetrics(&args);
        assert_eq!(code(&out), 2, "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!res.exists(), "{extra:?} created output");
    }
    assert_eq!(code(&chanmetrics(&["analyze", "--out", p(&res)])), 2);
}

#[test]
fn analyze_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth_small(&ds, "1");
    let run = |dir: &str, seed: &str, threads: &str| {
        let res = tmp.path().join(dir);
        let out = chanmetrics(&[
            "analyze", "--dataset", p(&ds), "--experiments", "correlation,condition,eigen", "--trials", "3000",
            "--window-length", "100", "--seed", seed, "--threads", threads, "--out", p(&res),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        ["correlation_delta_sq.csv", "condition_inv_kappa.csv", "condition_cdf_k2.csv", "eigen_values_db.csv"]
            .map(|f| fs::read(res.join(f)).unwrap())
    };
    let a = run("a", "5", "1");
    assert_eq!(a, run("b", "5", "4"));
    assert_ne!(a[0], run("c", "6", "1")[0]);
}

#[test]
fn config_file_drives_a_model_run() {
    let tmp = tempfile::tempdir().unwrap();
    let res = tmp.path().join("res");
    let cfg = tmp.path().join("run.json");
    let json = serde_json::json!({
        "seed": 9,
        "out": p(&res),
        "threads": 2,
        "source": {"model": {"kind": "kronecker", "rho": 0.7, "antennas": 8, "snapshots": 200, "freqs": 1, "positions": 6}},
        "experiments": {
            "correlation": {"antenna_counts": [2, 8], "trials": 2000},
            "eigen": {"window_length": 100, "p": 2, "group_a": ["synth-00000"], "group_b": ["synth-00001"]},
            "schedule": {"window_length": 100, "p": 2, "group_size": 3}
        }
    });
    fs::write(&cfg, json.to_string()).unwrap();
    let out = chanmetrics(&["analyze", "--config", p(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    let delta = fs::read_to_string(res.join("correlation_delta.csv")).unwrap();
    assert_eq!(delta.lines().count(), 3);
    let chordal = fs::read_to_string(res.join("eigen_chordal.csv")).unwrap();
    assert!(chordal.starts_with("m,mean,stderr,trials"));
    let groups: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("schedule_groups.json")).unwrap()).unwrap();
    assert_eq!(groups["groups"].as_array().unwrap().len(), 2);

    // Flags override the config file.
    let res2 = tmp.path().join("res2");
    let out = chanmetrics(&[
        "analyze", "--config", p(&cfg), "--out", p(&res2), "--experiments", "correlation", "--antennas", "4",
        "--antenna-counts", "1,4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let delta = fs::read_to_string(res2.join("correlation_delta.csv")).unwrap();
    assert!(delta.lines().last().unwrap().starts_with("4,"));
    assert!(!res2.join("eigen_values_db.csv").exists());
}

#[test]
fn invalid_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"experiments": {"hardening": {"windw": 3}}}"#).unwrap();
    assert_eq!(code(&chanmetrics(&["analyze", "--config", p(&cfg)])), 2);
    assert_eq!(code(&chanmetrics(&["analyze", "--config", p(&tmp.path().join("missing.json"))])), 3);
}

#[test]
fn schedule_subcommand_groups_positions() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth_small(&ds, "2");
    let res = tmp.path().join("res");
    let out = chanmetrics(&[
        "schedule", "--dataset", p(&ds), "--window-length", "100", "--p", "2", "--group-size", "2", "--out", p(&res),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let groups: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("schedule_groups.json")).unwrap()).unwrap();
    let mut members: Vec<String> = groups["groups"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|g| g["members"].as_array().unwrap().iter().map(|m| m.as_str().unwrap().to_string()))
        .collect();
    members.sort();
    assert_eq!(members, vec!["p000", "p001", "p002", "p003"]);
    assert_eq!(
        code(&chanmetrics(&["schedule", "--dataset", p(&ds), "--metric", "cosine", "--out", p(&res)])),
        2
    );
}
