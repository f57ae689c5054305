//! End-to-end checks of the binary: the simulate/run/diagnose pipeline and
//! the exit-code contract (1 usage, 2 numerical, 3 I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcsmc"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rcsmc-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, dataset: Option<&Path>) -> PathBuf {
    let dataset_line = match dataset {
        Some(p) => format!("dataset = {:?}\n", p.to_str().unwrap()),
        None => String::new(),
    };
    let text = format!(
        r#"{dataset_line}
[model]
kind = "linear_gaussian"
d = 2
t_len = 10

[sampler]
n_particles = 10
n_replicas = 2
n_iterations = 50

[output]
n_runs = 2

[[output.track]]
time = 0
coord = 0

[[output.track]]
time = 9
coord = 1
"#
    );
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn simulate_run_diagnose_pipeline() {
    let dir = tmp_dir("pipeline");
    let config = write_config(&dir, None);

    let sim = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--seed", "7", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let dataset = dir.join("dataset.txt");
    assert!(dataset.exists());

    let config = write_config(&dir, Some(&dataset));
    let run = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--seed", "7", "--threads", "2", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.join("traces.csv").exists());
    assert!(dir.join("manifest.toml").exists());
    let run_report = stdout(&run);
    assert!(run_report.contains("x_t0_c0"), "{run_report}");
    assert!(run_report.contains("iact"), "{run_report}");

    // The trace file follows the run,iteration,variable,value schema.
    let traces = fs::read_to_string(dir.join("traces.csv")).unwrap();
    let mut lines = traces.lines();
    assert_eq!(lines.next().unwrap(), "run,iteration,variable,value");
    assert!(lines.next().unwrap().starts_with("0,0,x_t0_c0,"));

    let diag = bin()
        .args(["diagnose", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(diag.status.success());
    let diag_report = stdout(&diag);
    assert!(diag_report.contains("x_t9_c1"), "{diag_report}");

    // Determinism: rerunning with the same seed reproduces the trace file.
    let dir2 = tmp_dir("pipeline2");
    let run2 = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--seed", "7", "--out"])
        .arg(&dir2)
        .output()
        .unwrap();
    assert!(run2.status.success());
    assert_eq!(traces, fs::read_to_string(dir2.join("traces.csv")).unwrap());

    let _ = fs::remove_dir_all(&dir);
    let _ = fs::remove_dir_all(&dir2);
}

#[test]
fn compare_reports_both_samplers() {
    let dir = tmp_dir("compare");
    let config = write_config(&dir, None);
    let out = bin()
        .args(["compare", "--config"])
        .arg(&config)
        .args(["--seed", "3", "--baseline-particles", "20", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout(&out);
    assert!(report.contains("replica cSMC"), "{report}");
    assert!(report.contains("iterated cSMC (N=20)"), "{report}");
    assert!(report.contains("ratio"), "{report}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn variance_prints_value() {
    let out = bin()
        .args([
            "variance",
            "--mu",
            "0.5",
            "--sigma0-sq",
            "4",
            "--sigma1-sq",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!(v > 0.0 && v.is_finite());
}

#[test]
fn usage_errors_exit_1() {
    // Unknown flag.
    let out = bin().args(["run", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Config with an unknown key.
    let dir = tmp_dir("badcfg");
    let path = dir.join("bad.toml");
    fs::write(
        &path,
        "[model]\nkind = \"linear_gaussian\"\nd = 2\nt_len = 5\nbogus = 1\n\n[sampler]\nn_particles = 5\nn_replicas = 2\nn_iterations = 5\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let _ = fs::remove_dir_all(&dir);

    // --help exits 0.
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn numerical_errors_exit_2() {
    // Variance is infinite when sigma0_sq <= 2 sigma1_sq.
    let out = bin()
        .args([
            "variance",
            "--mu",
            "0",
            "--sigma0-sq",
            "1",
            "--sigma1-sq",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_errors_exit_3() {
    let dir = tmp_dir("io");
    // Missing config file.
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.join("nope.toml"))
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Malformed dataset file.
    let ds = dir.join("dataset.txt");
    fs::write(&ds, "not a dataset\n").unwrap();
    let config = write_config(&dir, Some(&ds));
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // Diagnose on a directory without traces.
    let out = bin()
        .args(["diagnose", "--out"])
        .arg(dir.join("empty"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let _ = fs::remove_dir_all(&dir);
}
