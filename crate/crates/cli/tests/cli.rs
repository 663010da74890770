use std::fs;
use std::path::Path;
use std::process::Command;

fn hypflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypflow"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn flow_check_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypflow().args(["flow-check", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("flow-check/flow_check.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("flow-check/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2024);
    assert_eq!(manifest["config"]["c"], "1.2");
}

#[test]
fn rejects_c_above_three_halves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# too steep\nc = 1.6\n").unwrap();
    let out = hypflow().arg("equidistribution").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("c < 3/2"), "{err}");
    assert!(!dir.path().join("equidistribution").exists());
}

#[test]
fn rejects_unknown_keys_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "seed = 3\nbogus = 1\n").unwrap();
    let out = hypflow().arg("surface-info").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn identical_seeds_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = hypflow()
            .args(["equidistribution", "--quick", "--seed", "11", "--threads", threads, "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fa = files(&a.path().join("equidistribution"));
    assert!(!fa.is_empty());
    assert_eq!(fa, files(&b.path().join("equidistribution")));
}
