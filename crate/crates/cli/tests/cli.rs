//! End-to-end runs of the binary: exit codes, determinism, report shape.
//! Everything runs at a deliberately small scale; the physics gets its
//! scrutiny elsewhere.

use std::path::Path;
use std::process::{Command, Output};

fn cel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cel"))
        .args(args)
        .current_dir(dir)
        .env_remove("CEL_THREADS")
        .output()
        .expect("binary runs")
}

fn small(extra: &[&str], dir: &Path) -> Output {
    let mut args = vec![
        "run", "--preset", "dipole", "--n", "64", "--L", "6.28318", "--dt", "2e-3", "--T",
        "0.05", "--checkpoints", "6",
    ];
    args.extend_from_slice(extra);
    cel(&args, dir)
}

#[test]
fn run_writes_reports_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small(&["--output", "a"], tmp.path());
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let base = tmp.path().join("a");
    for file in ["config.toml", "norms.csv", "ledger.csv", "summary.txt"] {
        assert!(base.join(file).is_file(), "{file} missing");
    }
    assert!(base.join("fields/checkpoint_0005.bin").is_file());
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("[pass] lp_conservation"), "{summary}");
    assert!(summary.contains("fitted constant"), "{summary}");

    // identical config and seed, byte-identical reports
    let out2 = small(&["--output", "b"], tmp.path());
    assert!(out2.status.success());
    for file in ["norms.csv", "ledger.csv", "summary.txt"] {
        let a = std::fs::read(base.join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn cfl_violation_refuses_with_a_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small(&["--dt", "0.9", "--output", "c"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("use dt <="), "{err}");
}

#[test]
fn unknown_check_lists_the_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cel(&["verify", "--checks", "no_such_check"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown check `no_such_check`"), "{err}");
    assert!(err.contains("lemma28"), "{err}");

    let out = cel(&["verify", "--checks", ""], tmp.path());
    assert_eq!(out.status.code(), Some(1), "empty list is usage error");
}

#[test]
fn verify_prints_the_requested_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cel(
        &[
            "verify", "--checks", "lemma28,lp_conservation", "--preset", "zero", "--n", "64",
            "--L", "6.28318", "--dt", "2e-3", "--T", "0.05", "--checkpoints", "3",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fitted constant"), "{text}");
    assert!(text.contains("[pass] lp_conservation"), "{text}");
}

#[test]
fn norms_subcommand_reads_a_snapshot_back() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small(&["--output", "d"], tmp.path());
    assert!(out.status.success());
    let snap = tmp.path().join("d/fields/checkpoint_0000.bin");
    let out = cel(&["norms", snap.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,l1,l2,linf"), "{text}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn oracle_compare_reports_both_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cel(
        &["oracle-compare", "--preset", "dipole", "--n", "64", "--L", "6.28318"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("whole box, raw"), "{text}");
    assert!(text.contains("mean-adjusted"), "{text}");
}

#[test]
fn emit_config_round_trips_through_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small(&["--seed", "9", "--emit-config"], tmp.path());
    assert!(out.status.success());
    let path = tmp.path().join("exp.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    let out2 = cel(
        &["run", "--config", "exp.toml", "--emit-config"],
        tmp.path(),
    );
    assert!(out2.status.success());
    assert_eq!(out.stdout, out2.stdout, "emitted config is a fixed point");
}
