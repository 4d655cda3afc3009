use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_magfloquet"));
    c.env_remove("MAGFLOQUET_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a config into `dir` whose graph points at the shipped Z^1 file.
fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let graph = configs().join("graphs/z1.toml");
    let text = format!("graph = {:?}\n{body}", graph.display().to_string());
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const FREE_SCATTERING: &str = r#"kind = "scattering"
radius = 120
[scattering]
n_periods = 10
steps_per_period = 16
comparison = "free"
"#;

#[test]
fn validate_accepts_every_shipped_config() {
    let mut n = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let o = run(&["validate", "--config", p.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert_eq!(n, 11);
}

#[test]
fn zero_potential_scattering_passes_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_SCATTERING);
    let out = dir.path().join("out");
    let o = run(&["scattering", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["manifest.json", "summary.txt", "checks.json", "trace.csv", "scattering.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("verdict: pass"));
}

#[test]
fn outputs_are_deterministic_apart_from_the_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_SCATTERING);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["scattering", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut compared = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
        compared += 1;
    }
    assert!(compared >= 4);
}

#[test]
fn manifest_records_overrides_and_threads() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("c01_bands_z1.toml");
    let o = bin()
        .env("MAGFLOQUET_THREADS", "2")
        .args(["bands", "--config", cfg.to_str().unwrap(), "--override", "bands.n_k=32", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["bands"]["n_k"], 32);
    assert_eq!(m["threads"], 2);
    assert!(m["timings_seconds"]["total"].is_number());
    assert!(out.join("bands.csv").is_file());
}

#[test]
fn missed_tolerance_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("c11_negative_control.toml");
    let o = run(&[
        "scattering",
        "--config",
        cfg.to_str().unwrap(),
        "--override",
        "scattering.expect_converged=true",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("[FAIL]"));
}

#[test]
fn negative_radius_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "kind = \"bands\"\nradius = -3\n");
    let o = run(&["bands", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("radius"), "{}", stderr(&o));
}

#[test]
fn unknown_kind_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "kind = \"spectroscopy\"\n");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("kind"), "{}", stderr(&o));
}

#[test]
fn unknown_field_names_its_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "kind = \"bands\"\n[bands]\nnk = 3\n");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nk"), "{}", stderr(&o));
}

#[test]
fn kind_mismatch_is_rejected() {
    let cfg = configs().join("c01_bands_z1.toml");
    let o = run(&["scattering", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("declares kind"));
}

#[test]
fn bad_thread_count_is_an_error() {
    let cfg = configs().join("c01_bands_z1.toml");
    let o = bin()
        .env("MAGFLOQUET_THREADS", "many")
        .args(["validate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn time_decaying_run_converges() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("pulse.toml"),
        r#"period = 1.0
[v]
family = "separable"
amplitude = 0.5
spatial = { kind = "exponential", rate = 1.0 }
temporal = { kind = "cos", harmonic = 1 }
envelope = { kind = "gaussian", width = 2.0 }
"#,
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "td.toml",
        "kind = \"time-decaying\"\npotentials = [\"pulse.toml\"]\nradius = 200\n[time_decaying]\nn_segments = 20\nsteps_per_segment = 32\n",
    );
    let out = dir.path().join("out");
    let o = run(&["time-decaying", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("summary.txt").is_file());
}
