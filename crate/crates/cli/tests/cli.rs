use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn chirikov(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chirikov"));
    c.args(args).env_remove("CHIRIKOV_WORKERS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

#[test]
fn passing_run_exits_zero_with_manifest() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("dets");
    let o = chirikov(&["dets", "--K", "100", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "dets");
    assert_eq!(m["pass"], true);
    assert_eq!(m["config"]["K"], 100.0);
    assert!(m["version"].as_str().is_some_and(|v| !v.is_empty()));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    let report: Value = serde_json::from_slice(&fs::read(out.join("dets.json")).unwrap()).unwrap();
    for key in ["estimator", "parameters", "mean", "std_error", "samples", "wall_time_seconds"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn manifest_digests_match_files() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("c");
    let o = chirikov(&["contraction", "--K", "100", "--samples", "500", "--grid", "4", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let m = manifest(&out);
    let files = m["files"].as_array().unwrap();
    assert!(files.len() >= 2);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap(), hex(&Sha256::digest(&bytes)));
    }
}

#[test]
fn failed_assertion_exits_one() {
    // at K = 1 the derivative cocycle does not contract
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("weak");
    let o = chirikov(&["contraction", "--K", "1", "--samples", "500", "--grid", "4", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
    assert_eq!(manifest(&out)["pass"], false);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("x");
    let o = out.to_str().unwrap();
    assert_eq!(code(&chirikov(&["dets", "--K", "-3", "--out", o], &[])), 2);
    assert_eq!(code(&chirikov(&["drift", "--p", "0.7", "--out", o], &[])), 2);
    assert_eq!(code(&chirikov(&["mix", "--steps", "0", "--out", o], &[])), 2);
    assert_eq!(code(&chirikov(&["dets", "--bogus", "--out", o], &[])), 2);
    assert_eq!(code(&chirikov(&["frobnicate"], &[])), 2);
    assert_eq!(code(&chirikov(&["dets", "--model", "pierrehumbert", "--out", o], &[])), 2);
    let bad = d.path().join("bad.toml");
    fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&chirikov(&["dets", "--config", bad.to_str().unwrap(), "--out", o], &[])), 2);
    assert_eq!(code(&chirikov(&["dets", "--config", d.path().join("missing.toml").to_str().unwrap(), "--out", o], &[])), 2);
    assert_eq!(code(&chirikov(&["dets", "--out", o], &[("CHIRIKOV_WORKERS", "zero")])), 2);
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("r");
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, format!("K = 10.0\nseed = 3\nq = 2.0\nout = \"{}\"\n", out.display())).unwrap();
    let o = chirikov(&["rates", "--config", cfg.to_str().unwrap(), "--K", "100"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["K"], 100.0);
    assert_eq!(m["config"]["seed"], 3);
    assert_eq!(m["config"]["q"], 2.0);
}

#[test]
fn constants_file_is_read() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("r");
    let consts = d.path().join("c.toml");
    fs::write(&consts, "c_reach = 10.0\n").unwrap();
    let o = chirikov(&["rates", "--K", "10", "--constants-file", consts.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&fs::read(out.join("rates.json")).unwrap()).unwrap();
    assert_eq!(r["parameters"]["constants"]["c_reach"], 10.0);
    // log10(-log10 p_K) = log10 C + 264 log10 K + log10 log10 K at K = 10
    let got = r["details"]["headline"]["p_k"]["log10_neg_log10"].as_f64().unwrap();
    assert!((got - 265.0).abs() < 1e-9, "{got}");
}

#[test]
fn workers_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("w");
    let o = chirikov(&["dets", "--out", out.to_str().unwrap()], &[("CHIRIKOV_WORKERS", "3")]);
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&out)["workers"], 3);
    let o = chirikov(&["dets", "--workers", "2", "--out", out.to_str().unwrap()], &[("CHIRIKOV_WORKERS", "3")]);
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&out)["workers"], 2);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let d = tempfile::tempdir().unwrap();
    let run = |w: &str| {
        let out = d.path().join(format!("w{w}"));
        let o = chirikov(&["contraction", "--K", "50", "--samples", "3000", "--grid", "3", "--seed", "9", "--workers", w, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(code(&o), 0);
        fs::read(out.join("contraction_cells.csv")).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(one, run("1"));
}

#[test]
fn different_seeds_differ() {
    let d = tempfile::tempdir().unwrap();
    let run = |s: &str| {
        let out = d.path().join(format!("s{s}"));
        chirikov(&["contraction", "--K", "50", "--samples", "500", "--grid", "2", "--seed", s, "--out", out.to_str().unwrap()], &[]);
        fs::read_to_string(out.join("contraction_cells.csv")).unwrap()
    };
    assert_ne!(run("1").lines().nth(2), run("2").lines().nth(2));
}

#[test]
fn mix_writes_series_and_snapshot() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("mix");
    let o = chirikov(&["mix", "--grid", "64", "--steps", "6", "--realizations", "2", "--out", out.to_str().unwrap()], &[]);
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("mix.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_digest="));
    assert_eq!(lines.next().unwrap(), "realization,n,t,norm");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 7);
    assert_eq!(rows[3][..3], ["0", "3", "6"]);
    assert_eq!(rows[7][0], "1");
    let norms: Vec<f64> = rows[..7].iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(norms.iter().all(|v| v.is_finite() && *v > 0.0));
    let meta: Value = serde_json::from_slice(&fs::read(out.join("mix_final_r0.json")).unwrap()).unwrap();
    assert_eq!(meta["n"], 64);
    let bin = fs::read(out.join("mix_final_r0.bin")).unwrap();
    assert_eq!(bin.len(), 8 + 8 + 64 * 64 * 16);
    assert_eq!(u64::from_le_bytes(bin[..8].try_into().unwrap()), 64);
}

#[test]
fn control_one_point_and_phase_file() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("ctl");
    let o = chirikov(&["control", "--mode", "one-point", "--trials", "50", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let bin = fs::read(out.join("control_phases.bin")).unwrap();
    assert_eq!(u64::from_le_bytes(bin[..8].try_into().unwrap()), 50);
    // each trial: u64 length 1, then one (w1, w2) pair
    assert_eq!(bin.len(), 8 + 50 * (8 + 16));
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&chirikov(&["--help"], &[])), 0);
    assert_eq!(code(&chirikov(&["--version"], &[])), 0);
}
