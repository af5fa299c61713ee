use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rwre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwre")).args(args).env_remove("RWRE_SEED").output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn unknown_flag_is_a_config_error() {
    let o = rwre(&["walk1d", "--gird", "64"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--gird"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"grid": [64], "boundry": "zero"}"#).unwrap();
    let o = rwre(&["walk1d", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("boundry"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"command": "stable"}"#).unwrap();
    assert_eq!(rwre(&["walk1d", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bad_values_are_config_errors() {
    for args in [
        &["walk1d", "--law", "gauss:0:-1"][..],
        &["walk1d", "--grid", "0"],
        &["capacity", "--gauge", "pow:-1"],
        &["percolate", "--target", "box:2"],
        &["counterexample", "--format", "csv"],
    ] {
        let o = rwre(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("invalid `"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_seed_names_seed() {
    let o = rwre(&["stable", "--grid", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`seed`"));
    // the environment is the last resort
    let o = Command::new(env!("CARGO_BIN_EXE_rwre"))
        .args(["stable", "--grid", "5", "--episodes", "1000"])
        .env("RWRE_SEED", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn oversized_run_is_a_compute_error() {
    let o = rwre(&["rwre", "--profile", "pow:3", "--depths", "64,1024", "--environments", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("too large"), "{}", stderr(&o));
}

#[test]
fn counterexample_is_exact() {
    let o = rwre(&["counterexample"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["p_b"], "124971/125000");
    assert_eq!(v["p_b_closed_form"], "124971/125000");
    assert_eq!(v["swap_fails"], true);
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn walk1d_csv_layout() {
    let o = rwre(&["walk1d", "--grid", "16,64"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,p_lower,p_upper,sqrt_n_p,stderr");
    assert!(lines[1].starts_with("16,"));
    assert!(lines.last().unwrap().starts_with("# config_digest="));
    // P(T_0 > 16) = C(16,8)/2^16
    let p: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 12870.0 / 65536.0).abs() < 1e-15);
}

#[test]
fn thm42_check_reports_the_chain() {
    let o = rwre(&["thm42-check", "--growth", "2,2", "--target", "nonneg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    for key in ["p_b_gamma", "p_b_sgamma", "p_sb_sgamma", "cap_bound", "chain_holds", "swap_counterexample"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["p_b_gamma_exact"], "3/4");
    assert_eq!(v["chain_holds"], true);
}

fn run_to(dir: &Path, name: &str, threads: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut all = args.to_vec();
    all.extend(["--threads", threads, "--out", out.to_str().unwrap()]);
    let o = rwre(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(rwre_cli::verify_artifact(&out).unwrap());
    let manifest: Value = serde_json::from_slice(&std::fs::read(rwre_cli::manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest["threads"], threads.parse::<u64>().unwrap());
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    std::fs::read(&out).unwrap()
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["network", "--offspring", "1,1,1", "--depth", "5", "--environments", "40", "--seed", "9"];
    let a = run_to(dir.path(), "a.csv", "1", &args);
    let b = run_to(dir.path(), "b.csv", "4", &args);
    assert_eq!(a, b);
    let args = ["walk1d", "--mode", "mc", "--grid", "16,32", "--episodes", "5000", "--seed", "2", "--format", "json"];
    assert_eq!(run_to(dir.path(), "c.json", "1", &args), run_to(dir.path(), "d.json", "3", &args));
}

#[test]
fn tampered_artifact_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    run_to(dir.path(), "a.csv", "1", &["walk1d", "--grid", "16"]);
    let out = dir.path().join("a.csv");
    let text = std::fs::read_to_string(&out).unwrap();
    let manifest = rwre_cli::manifest_path(&out);
    let m = std::fs::read_to_string(&manifest).unwrap().replace("[16]", "[17]");
    std::fs::write(&out, text).unwrap();
    std::fs::write(&manifest, m).unwrap();
    assert!(!rwre_cli::verify_artifact(&out).unwrap());
}

#[test]
fn accept_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("accept.csv");
    let o = rwre(&["accept", "--only", "1,13", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("1,PASS,counterexample exactness"));
    assert!(text.contains("# failed=0"));
    let manifest: Value = serde_json::from_slice(&std::fs::read(rwre_cli::manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(rwre(&["accept", "--only", "16"]).status.code(), Some(2));
}
