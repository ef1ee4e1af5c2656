//! End-to-end runs of the `beltrami` binary: exit codes, artifact layout,
//! provenance columns, and rerun determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};

static DIR_SEQ: AtomicU64 = AtomicU64::new(0);

/// Fresh scratch directory per test so parallel tests never share output.
fn scratch() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "beltrami-cli-{}-{}",
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(sub: &str, dir: &Path, config: &str) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_beltrami"))
        .arg(sub)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

/// The single run directory under `out/`, named by the config hash.
fn hash_dir(dir: &Path) -> PathBuf {
    let out = dir.join("out");
    let mut entries: Vec<PathBuf> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(entries.len(), 1, "expected one hash dir in {}", out.display());
    entries.pop().unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(hash_dir(dir).join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn config_with_output(body: &str, dir: &Path) -> String {
    format!("{body}\n[output]\ndir = \"{}\"\n", dir.join("out").display())
}

#[test]
fn bad_config_exits_one_and_reports_every_violation() {
    let dir = scratch();
    let config = config_with_output(
        "[grid]\nn = 100\nside = 2.0\n\n[coefficient]\nid = \"power\"\n\n[params]\nk_cap = 1.5\nn_max = 0\n",
        &dir,
    );
    let out = run("solve", &dir, &config);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    for needle in ["grid.n", "grid.side", "coefficient.k", "params.k_cap", "params.n_max"] {
        assert!(stderr.contains(needle), "missing {needle} in:\n{stderr}");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn zero_coefficient_solves_to_the_identity() {
    let dir = scratch();
    let config = config_with_output(
        "[grid]\nn = 128\n\n[coefficient]\nid = \"zero\"\n",
        &dir,
    );
    let out = run("solve", &dir, &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = summary(&dir);
    assert_eq!(doc["subcommand"], "solve");
    assert_eq!(doc["results"]["closed_form_rel_l2"], 0.0);
    assert_eq!(doc["results"]["min_jacobian"], 1.0);
    assert_eq!(doc["results"]["equation_residual"], 0.0);
    for check in doc["checks"].as_array().unwrap() {
        assert_eq!(check["pass"], true, "{check}");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn power_map_solve_passes_its_closed_form_gate() {
    let dir = scratch();
    let config = config_with_output(
        "[grid]\nn = 128\n\n[coefficient]\nid = \"power\"\nk = 2.0\n\n[params]\nn_max = 25\n",
        &dir,
    );
    let out = run("solve", &dir, &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = summary(&dir);
    let checks = doc["checks"].as_array().unwrap();
    let closed = checks
        .iter()
        .find(|c| c["name"] == "closed_form_rel_l2")
        .expect("closed form check present");
    assert_eq!(closed["gated"], true);
    assert_eq!(closed["pass"], true);
    // Threshold scales with cell size off the n = 1024 calibration point.
    assert!((closed["threshold"].as_f64().unwrap() - 8e-3).abs() < 1e-12);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn reruns_overwrite_the_same_hash_dir_with_identical_bytes() {
    let dir = scratch();
    let config = config_with_output(
        "[grid]\nn = 64\n\n[coefficient]\nid = \"g_eps\"\np = 1.0\neps = 0.5\n\n[params]\np = 1.0\nn_max = 8\n",
        &dir,
    );
    let out = run("decay", &dir, &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first_dir = hash_dir(&dir);
    let first = fs::read(first_dir.join("decay.csv")).unwrap();
    let out = run("decay", &dir, &config);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(hash_dir(&dir), first_dir);
    let second = fs::read(first_dir.join("decay.csv")).unwrap();
    assert_eq!(first, second, "decay.csv changed between identical runs");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn csv_rows_carry_hash_and_tolerance_class() {
    let dir = scratch();
    let config = config_with_output(
        "[grid]\nn = 64\n\n[coefficient]\nid = \"g_eps\"\np = 1.0\neps = 0.5\n\n[params]\np = 1.0\nn_max = 8\n",
        &dir,
    );
    let out = run("decay", &dir, &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let hash_dir = hash_dir(&dir);
    let hash = hash_dir.file_name().unwrap().to_str().unwrap().to_string();
    assert_eq!(hash.len(), 12);
    let text = fs::read_to_string(hash_dir.join("decay.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.ends_with(",config_hash,tolerance_class"), "{header}");
    for line in lines {
        assert!(line.contains(&hash), "row missing hash: {line}");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn failed_expectations_exit_two() {
    let dir = scratch();
    let config = config_with_output(
        concat!(
            "[coefficient]\nid = \"g_eps\"\np = 1.0\neps = 0.5\n\n",
            "[params]\np = 1.0\nexpect = [\"convergent\"]\n\n",
            "[[params.weights]]\nkind = \"inv_log_distortion\"\nexponent = 0.5\n",
        ),
        &dir,
    );
    let out = run("radial", &dir, &config);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = summary(&dir);
    assert_eq!(doc["results"]["expectations_met"], false);
    assert_eq!(doc["results"]["weights"][0]["verdict"], "divergent");
    fs::remove_dir_all(&dir).ok();
}
