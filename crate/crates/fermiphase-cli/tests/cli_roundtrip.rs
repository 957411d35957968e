//! Drives the compiled binary end to end: run, exact, compare, selftest,
//! exit codes, and output file contracts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fermiphase"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// Small interacting run that finishes in well under a second.
fn base_config(seed: u64, coupling: f64) -> String {
    format!(
        r#"[model]
kind = "two-component"
hbar = 1.0
mass = 1.0
coupling = {coupling}
potentials = [{{ kind = "zero" }}, {{ kind = "zero" }}]

[grid]
points = 2
dx = 1.0

[scheme]
variant = "split-step-fourier"
dt = 1e-3
steps = 120
checkpoints = [60, 120]

[ensemble]
trajectories = 1024
seed = {seed}

[initial]
kind = "fock"
occupied = [[0, 0], [1, 0]]

[[observables]]
id = "pop"
kind = "position-population"
slots = [[0, 0], [1, 0]]

[[observables]]
id = "coh"
kind = "position-coherence"
bra = [[0, 0], [1, 0]]
ket = [[0, 1], [1, 1]]

[[observables]]
id = "norm"
kind = "total-population"
order = 2

[output]
dir = "out"
"#
    )
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().unwrap();
    (
        out.status.code().expect("process exited"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn run_writes_tables_and_reruns_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "exp.toml", &base_config(9, 0.4));

    let out_a = tmp.path().join("a");
    run_ok(binary().arg("run").arg("--config").arg(&config).arg("--out-dir").arg(&out_a));
    let csv = fs::read(out_a.join("results.csv")).unwrap();
    let json = fs::read(out_a.join("results.json")).unwrap();

    let header = String::from_utf8_lossy(&csv);
    assert!(
        header.starts_with("observable_id,t,re,im,stderr_re,stderr_im,n_traj,n_excluded"),
        "unexpected csv header: {}",
        header.lines().next().unwrap_or("")
    );

    let out_b = tmp.path().join("b");
    run_ok(binary().arg("run").arg("--config").arg(&config).arg("--out-dir").arg(&out_b));
    assert_eq!(csv, fs::read(out_b.join("results.csv")).unwrap());
    assert_eq!(json, fs::read(out_b.join("results.json")).unwrap());
}

#[test]
fn seed_override_changes_the_estimates() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "exp.toml", &base_config(9, 0.4));

    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    run_ok(binary().arg("run").arg("--config").arg(&config).arg("--out-dir").arg(&out_a));
    run_ok(
        binary()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--seed")
            .arg("10")
            .arg("--out-dir")
            .arg(&out_b),
    );
    assert_ne!(
        fs::read(out_a.join("results.csv")).unwrap(),
        fs::read(out_b.join("results.csv")).unwrap(),
        "a different seed must draw different noise"
    );
}

#[test]
fn exact_reference_and_comparison_agree() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "exp.toml", &base_config(9, 0.4));

    let run_dir = tmp.path().join("run");
    let exact_dir = tmp.path().join("exact");
    run_ok(binary().arg("run").arg("--config").arg(&config).arg("--out-dir").arg(&run_dir));
    run_ok(binary().arg("exact").arg("--config").arg(&config).arg("--out-dir").arg(&exact_dir));
    assert!(exact_dir.join("exact.csv").is_file());

    // Statistical gate only: the split stepper's weak bias sits far below
    // the sampling spread at this trajectory count.
    let report = tmp.path().join("report.json");
    run_ok(
        binary()
            .arg("compare")
            .arg("--stochastic")
            .arg(run_dir.join("results.json"))
            .arg("--exact")
            .arg(exact_dir.join("exact.json"))
            .arg("--threshold")
            .arg("8")
            .arg("--out")
            .arg(&report),
    );
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"max_z\""));
    assert!(text.contains("\"pass\": true"));

    let (code, _) = exit_code(
        binary()
            .arg("compare")
            .arg("--stochastic")
            .arg(run_dir.join("results.json"))
            .arg("--exact")
            .arg(exact_dir.join("exact.json"))
            .arg("--threshold")
            .arg("1e-6"),
    );
    assert_eq!(code, 3, "an impossible threshold must fail the comparison");
}

#[test]
fn comparison_refuses_mismatched_experiments_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "exp.toml", &base_config(9, 0.4));
    let other = write_config(tmp.path(), "other.toml", &base_config(9, 0.9));

    let run_dir = tmp.path().join("run");
    let exact_dir = tmp.path().join("exact");
    run_ok(binary().arg("run").arg("--config").arg(&config).arg("--out-dir").arg(&run_dir));
    run_ok(binary().arg("exact").arg("--config").arg(&other).arg("--out-dir").arg(&exact_dir));

    let (code, stderr) = exit_code(
        binary()
            .arg("compare")
            .arg("--stochastic")
            .arg(run_dir.join("results.json"))
            .arg("--exact")
            .arg(exact_dir.join("exact.json")),
    );
    assert_eq!(code, 1, "hash mismatch is a validation error: {stderr}");
    assert!(stderr.contains("hashes differ"), "stderr: {stderr}");

    // Forced comparison proceeds and then fails on the physics.
    let (code, _) = exit_code(
        binary()
            .arg("compare")
            .arg("--stochastic")
            .arg(run_dir.join("results.json"))
            .arg("--exact")
            .arg(exact_dir.join("exact.json"))
            .arg("--force"),
    );
    assert_eq!(code, 3, "different couplings must disagree statistically");
}

#[test]
fn invalid_configs_are_rejected_with_exit_one() {
    let tmp = TempDir::new().unwrap();

    let bad_field = write_config(
        tmp.path(),
        "bad_field.toml",
        &base_config(9, 0.4).replace("[grid]", "[grid]\nunknown_knob = 3"),
    );
    let (code, stderr) = exit_code(binary().arg("run").arg("--config").arg(&bad_field));
    assert_eq!(code, 1);
    assert!(!stderr.is_empty());

    let bad_checkpoint = write_config(
        tmp.path(),
        "bad_checkpoint.toml",
        &base_config(9, 0.4).replace("checkpoints = [60, 120]", "checkpoints = [0, 120]"),
    );
    let (code, stderr) = exit_code(binary().arg("run").arg("--config").arg(&bad_checkpoint));
    assert_eq!(code, 1);
    assert!(stderr.contains("checkpoint"), "stderr: {stderr}");

    let (code, _) = exit_code(
        binary()
            .arg("run")
            .arg("--config")
            .arg(tmp.path().join("missing.toml")),
    );
    assert_eq!(code, 1);
}

#[test]
fn divergent_ensemble_aborts_with_exit_two_and_marker() {
    let tmp = TempDir::new().unwrap();
    // A step far beyond the stability limit overflows every trajectory.
    let body = base_config(9, 50.0)
        .replace("dt = 1e-3", "dt = 10.0")
        .replace("steps = 120", "steps = 200")
        .replace("checkpoints = [60, 120]", "checkpoints = [200]")
        .replace("trajectories = 1024", "trajectories = 256");
    let config = write_config(tmp.path(), "diverge.toml", &body);

    let out = tmp.path().join("out");
    let (code, stderr) = exit_code(
        binary().arg("run").arg("--config").arg(&config).arg("--out-dir").arg(&out),
    );
    assert_eq!(code, 2, "stderr: {stderr}");
    let marker = fs::read_to_string(out.join("aborted.json")).unwrap();
    assert!(marker.contains("\"aborted\": true"), "marker: {marker}");
}

#[test]
fn plot_flag_emits_svg() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "exp.toml", &base_config(9, 0.4));
    let out = tmp.path().join("out");
    run_ok(
        binary()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .arg("--plot"),
    );
    let svg = fs::read_to_string(out.join("results.svg")).unwrap();
    assert!(svg.contains("<svg"), "not an svg: {}", &svg[..svg.len().min(120)]);
}

#[test]
fn selftest_passes() {
    run_ok(binary().arg("selftest"));
}
