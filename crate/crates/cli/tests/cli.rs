use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heston-amer"))
}

fn run(config: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("spawn")
}

/// Writes `config` into `dir/config.json` with `out` pointing at `dir/out`.
fn write_config(dir: &Path, mut config: Value) -> (PathBuf, PathBuf) {
    let out = dir.join("out");
    config["out"] = json!(out);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    (path, out)
}

/// A 41 × 21 lattice with 25 steps and a small Monte Carlo batch.
fn small(command: &str) -> Value {
    json!({
        "command": command,
        "grid": { "nx": 41, "ny": 21, "steps": 25 },
        "mc": { "paths": 4000, "dates": 10, "substeps": 2, "seed": 11 },
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn print_defaults_is_a_valid_config() {
    let out = bin().arg("--print-defaults").output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "verify");
    assert_eq!(v["model"]["kappa"], 1.5);
    assert_eq!(v["grid"]["nx"], 161);
    assert_eq!(v["mc"]["paths"], 100_000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("defaults.json");
    fs::write(&path, &out.stdout).unwrap();
    // parses back; the unwritable output directory is what stops the run
    let r = run(&path, &["--out", "/proc/forbidden"]);
    assert_ne!(r.status.code(), Some(0));
}

#[test]
fn schema_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        json!({ "command": "price", "model": { "kappa": 1.5, "theta": 0.04, "sigma": 0.3, "rho": 1.5, "r": 0.05, "delta": 0.02 } }),
        json!({ "command": "price", "instrument": { "strike": 100.0, "maturity": 0.0, "spot": 100.0, "y0": 0.04 } }),
        json!({ "command": "converge", "levels": 1 }),
        json!({ "command": "plot" }),
        json!({ "command": "price", "colour": "red" }),
    ];
    for case in cases {
        let (path, out) = write_config(dir.path(), case.clone());
        let r = run(&path, &[]);
        assert_eq!(r.status.code(), Some(2), "{case}");
        assert!(!out.exists(), "{case} wrote output");
    }
    let r = run(&dir.path().join("missing.json"), &[]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn price_writes_surfaces_and_echoes_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let (path, out) = write_config(dir.path(), small("price"));
    let before = fs::read(&path).unwrap();
    let r = run(&path, &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fs::read(&path).unwrap(), before);
    let price = read_json(&out.join("price.json"));
    let (a, e) = (price["american"].as_f64().unwrap(), price["european"].as_f64().unwrap());
    assert!(a >= e && a > 5.0 && a < 8.0, "{price}");
    let csv = fs::read_to_string(out.join("american_surface.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,y,value"));
    assert_eq!(csv.lines().count(), 1 + 26 * 41 * 21);
    let resolved = read_json(&out.join("resolved_config.json"));
    assert_eq!(resolved["model"]["sigma"], 0.3);
    assert_eq!(resolved["mc"]["seed"], 11);
    assert!(out.join("metadata.json").exists());
    assert!(!out.join(".lock").exists());
}

#[test]
fn eep_json_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = write_config(dir.path(), small("eep"));
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "2"), ("b", "2"), ("c", "1")] {
        let out = dir.path().join(name);
        let r = run(&path, &["--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push((
            fs::read(out.join("premium.json")).unwrap(),
            fs::read(out.join("resolved_config.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].0, outputs[2].0);
    let est: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    assert!(est["premium"].as_f64().unwrap() < 0.0);

    // the seed flag overrides the config and changes the estimate
    let out = dir.path().join("d");
    let r = run(&path, &["--out", out.to_str().unwrap(), "--seed", "12"]);
    assert!(r.status.success());
    assert_eq!(read_json(&out.join("resolved_config.json"))["mc"]["seed"], 12);
    assert_ne!(fs::read(out.join("premium.json")).unwrap(), outputs[0].0);
}

#[test]
fn verify_reports_every_entry_and_exit_code_follows_overall() {
    let dir = tempfile::tempdir().unwrap();
    let (path, out) = write_config(dir.path(), small("verify"));
    let r = run(&path, &[]);
    let report = read_json(&out.join("report.json"));
    let ids: Vec<&str> = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, heston_amer_ids());
    let expected = if report["overall_pass"].as_bool().unwrap() { 0 } else { 1 };
    assert_eq!(r.status.code(), Some(expected));
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.lines().last().unwrap().starts_with("overall:"));
}

fn heston_amer_ids() -> Vec<&'static str> {
    vec![
        "dominance",
        "monotone_y",
        "monotone_t",
        "convex_s",
        "strict_convexity",
        "moduli",
        "boundary_monotone",
        "boundary_range",
        "t_sections",
        "smooth_fit_s",
        "smooth_fit_y",
        "eep_identity",
        "symmetry",
        "smoothed_convergence",
    ]
}

#[test]
fn converge_tabulates_levels_with_oracle_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("converge");
    cfg["model"] = json!({ "kappa": 1.5, "theta": 0.04, "sigma": 0.0, "rho": -0.5, "r": 0.05, "delta": 0.02 });
    cfg["levels"] = json!(3);
    let (path, out) = write_config(dir.path(), cfg);
    let r = run(&path, &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("refinement.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
    assert!(rows[0][col("american_change")].is_empty());
    assert!(!rows[1][col("american_change")].is_empty());
    let err: Vec<f64> = rows
        .iter()
        .map(|r| r[col("european_oracle_error")].parse().unwrap())
        .collect();
    assert!(err[1] < err[0] && err[2] < err[1], "{err:?}");
}

#[test]
fn symmetry_and_boundary_commands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (path, out) = write_config(dir.path(), small("boundary"));
    assert!(run(&path, &[]).status.success());
    let csv = fs::read_to_string(out.join("boundary.csv")).unwrap();
    assert!(csv.lines().count() > 1);

    let (path, out) = write_config(dir.path(), small("symmetry"));
    let r = run(&path, &[]);
    let v = read_json(&out.join("symmetry.json"));
    let passed = v["entry"]["status"] == "pass";
    assert_eq!(r.status.code(), Some(if passed { 0 } else { 1 }));
    assert!(v["comparison"]["dual_put"].as_f64().unwrap() > 0.0);
}

#[test]
fn a_locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let (path, out) = write_config(dir.path(), small("boundary"));
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".lock"), "").unwrap();
    let r = run(&path, &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.join("boundary.csv").exists());
}
