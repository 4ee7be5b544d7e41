use std::path::Path;
use std::process::{Command, Output};

fn bec_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bec-lab"))
        .current_dir(dir)
        .env_remove("BECLAB_CACHE")
        .args(args)
        .output()
        .expect("bec-lab starts")
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("a JSON error record");
    serde_json::from_str(line).expect("valid JSON")
}

fn write_config(dir: &Path, text: &str) {
    std::fs::write(dir.join("run.ini"), text).unwrap();
}

fn cache_entries(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn usage_and_config_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bec_lab(dir.path(), &["--bogus", "solve-nls"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "config");

    let out = bec_lab(dir.path(), &["--config", "missing.ini", "solve-nls"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = error_record(&out);
    assert_eq!(rec["code"], 1);
    assert!(rec["message"].as_str().unwrap().contains("missing.ini"));

    write_config(dir.path(), "[model]\npionts = 33\n");
    let out = bec_lab(dir.path(), &["--config", "run.ini", "solve-nls"]);
    assert_eq!(out.status.code(), Some(1));

    let out = bec_lab(dir.path(), &["--workers", "0", "solve-nls"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = bec_lab(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}

#[test]
fn solver_and_budget_failures_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[solver]\nmax_iterations = 2\n");
    let out = bec_lab(dir.path(), &["--config", "run.ini", "--no-cache", "solve-nls"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "solver");

    write_config(dir.path(), "[solver]\nbudget = 1000\n");
    let out = bec_lab(dir.path(), &["--config", "run.ini", "--no-cache", "solve-nbody", "--particles", "3"]);
    assert_eq!(out.status.code(), Some(4));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "budget");
    assert!(rec["message"].as_str().unwrap().contains("budget"));
}

#[test]
fn outputs_use_crlf_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = bec_lab(dir.path(), &["--out", "o", "--no-cache", "solve-nls"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/solve-nls.csv")).unwrap();
    assert!(csv.starts_with("model,energy,kinetic,trap,interaction,chemicalPotential,residual"));
    assert_eq!(csv.matches("\r\n").count(), csv.lines().count());
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/solve-nls.json")).unwrap()).unwrap();
    assert!(json.is_array() || json.is_object());
    assert!(!dir.path().join("o/cache").exists());
}

#[test]
fn cache_hits_repairs_and_rejects_versions() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--out", "o", "--cache", "c", "solve-nls"];
    let first = bec_lab(dir.path(), &args);
    assert!(first.status.success());
    let csv = std::fs::read(dir.path().join("o/solve-nls.csv")).unwrap();
    let entries = cache_entries(&dir.path().join("c"));
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|p| p.extension().unwrap() == "becg"));

    let hit = bec_lab(dir.path(), &args);
    assert!(hit.status.success());
    assert!(String::from_utf8_lossy(&hit.stdout).contains("hit"));
    assert_eq!(std::fs::read(dir.path().join("o/solve-nls.csv")).unwrap(), csv);

    // Truncation: reported, deleted and recomputed to the same result.
    let bytes = std::fs::read(&entries[0]).unwrap();
    std::fs::write(&entries[0], &bytes[..bytes.len() / 2]).unwrap();
    let repaired = bec_lab(dir.path(), &args);
    assert!(repaired.status.success());
    assert!(String::from_utf8_lossy(&repaired.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&repaired.stdout).contains("repaired"));
    assert_eq!(std::fs::read(&entries[0]).unwrap(), bytes);
    assert_eq!(std::fs::read(dir.path().join("o/solve-nls.csv")).unwrap(), csv);

    // A different format version is refused rather than guessed at.
    let mut stale = bytes.clone();
    stale[4..8].copy_from_slice(&99u32.to_le_bytes());
    std::fs::write(&entries[0], &stale).unwrap();
    let refused = bec_lab(dir.path(), &args);
    assert_eq!(refused.status.code(), Some(1));
    assert_eq!(error_record(&refused)["error"], "cache");
    assert_eq!(std::fs::read(&entries[0]).unwrap(), stale);
}

#[test]
fn cache_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bec-lab"))
        .current_dir(dir.path())
        .env("BECLAB_CACHE", "envcache")
        .args(["--out", "o", "solve-nls"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(!cache_entries(&dir.path().join("envcache")).is_empty());
    assert!(!dir.path().join("o/cache").exists());
}
