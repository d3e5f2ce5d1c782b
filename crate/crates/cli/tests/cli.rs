use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/five_city")
}

fn stylecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stylecast")).args(args).output().unwrap()
}

fn run_fixture(out: &Path) -> Output {
    let conf = fixture().join("run.conf");
    stylecast(&["run", "--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn fixture_run_succeeds_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let first = run_fixture(&out);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let a = std::fs::read(out.join("manifest.json")).unwrap();
    std::fs::remove_dir_all(&out).unwrap();
    assert!(run_fixture(&out).status.success());
    assert_eq!(a, std::fs::read(out.join("manifest.json")).unwrap());
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let conf = fixture().join("run.conf");
    for stage in ["styles", "panel", "influence", "rank"] {
        let o = stylecast(&[stage, "--config", conf.to_str().unwrap(), "--out", out]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("ranking.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn missing_records_exits_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = stylecast(&[
        "run",
        "--seed",
        "1",
        "--records",
        "/definitely/not/here.csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here.csv"));
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(stylecast(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(stylecast(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = stylecast(&["run", "--records", "x.csv", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generate_writes_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let o = stylecast(&["generate", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("records.csv").exists());
    assert!(dir.path().join("metadata.csv").exists());
}
