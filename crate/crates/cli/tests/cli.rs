//! The `usecert` binary: exit codes, artifacts and subcommand composition.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn usecert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usecert"))
        .args(args)
        .env_remove("USECERT_SERVER_URL")
        .env_remove("USECERT_VARIANT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("usecert-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_the_bundled_model() {
    let o = usecert(&["validate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("8 states, 40 arcs"));
}

#[test]
fn invalid_and_missing_models() {
    let dir = scratch("invalid");
    let bad = dir.join("bad.tml");
    std::fs::write(&bad, "model M\nsource [a]\n \"x/r\" [nowhere]\n").unwrap();
    assert_eq!(code(&usecert(&["validate", "--model", s(&bad)])), 4);
    assert_eq!(code(&usecert(&["validate", "--model", s(&dir.join("absent.tml"))])), 2);
}

#[test]
fn a_model_without_a_canonical_table_cannot_be_run() {
    let dir = scratch("nocanon");
    let m = dir.join("m.tml");
    std::fs::write(&m, "model M\nsource [a]\n \"x/r\" [Exit]\n").unwrap();
    assert_eq!(code(&usecert(&["analyze", "--model", s(&m)])), 0);
    let o = usecert(&[
        "certify",
        "--model",
        s(&m),
        "--random",
        "1",
        "--weighted",
        "0",
        "--out",
        s(&dir),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(code(&usecert(&["certify", "--bug", "receive_ignores_flag"])), 2);
    assert_eq!(
        code(&usecert(&["certify", "--variant", "custom", "--bug", "no_such_bug"])),
        2
    );
    assert_eq!(code(&usecert(&["certify", "--threshold", "1.0"])), 2);
    assert_eq!(
        code(&usecert(&["certify", "--server-url", "http://x", "--variant", "new"])),
        2
    );
    assert_eq!(code(&usecert(&["frobnicate"])), 2);
}

#[test]
fn unreachable_server_exits_3() {
    let dir = scratch("unreachable");
    let o = usecert(&[
        "certify",
        "--server-url",
        "http://127.0.0.1:1",
        "--random",
        "2",
        "--out",
        s(&dir),
    ]);
    assert_eq!(code(&o), 3);
    assert!(!dir.join("verdict.json").exists());
}

#[test]
fn generation_is_deterministic_and_composable() {
    let dir = scratch("gen");
    let args = |out: &Path| {
        vec![
            "generate".to_string(),
            "--random".into(),
            "40".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let (a, b) = (dir.join("a"), dir.join("b"));
    for d in [&a, &b] {
        let v = args(d);
        assert_eq!(code(&usecert(&v.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    }
    let read = |d: &Path| std::fs::read_to_string(d.join("suite.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    // header + 4 + 200 + 40
    assert_eq!(read(&a).lines().count(), 245);

    let o = usecert(&[
        "generate",
        "--min-coverage",
        "false",
        "--weighted",
        "0",
        "--random",
        "3",
        "--out",
        s(&a),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&a).lines().count(), 4);
}

#[test]
fn generate_run_report_equals_certify() {
    let dir = scratch("compose");
    let (split, whole) = (dir.join("split"), dir.join("whole"));
    let small = ["--random", "60", "--weighted", "10", "--seed", "3"];
    let mut g = vec!["generate", "--out", s(&split)];
    g.extend(small);
    assert_eq!(code(&usecert(&g)), 0);
    let suite = split.join("suite.jsonl");
    assert_eq!(
        code(&usecert(&[
            "run",
            "--suite",
            s(&suite),
            "--variant",
            "new",
            "--out",
            s(&split)
        ])),
        0
    );
    let record = split.join("record.json");
    let report = code(&usecert(&["report", "--record", s(&record), "--out", s(&split)]));

    let mut c = vec!["certify", "--variant", "new", "--out", s(&whole)];
    c.extend(small);
    let certify = code(&usecert(&c));
    assert_eq!(report, certify);
    assert_eq!(certify, 1);
    for f in ["suite.jsonl", "record.json", "report.json", "verdict.json"] {
        assert_eq!(
            std::fs::read_to_string(split.join(f)).unwrap(),
            std::fs::read_to_string(whole.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let v = json(&whole.join("verdict.json"));
    assert_eq!(v["certified"], false);
    assert_eq!(v["reason"], "failed_tests");
}

#[test]
fn verdict_follows_the_threshold() {
    let dir = scratch("threshold");
    let base = ["certify", "--random", "30", "--weighted", "5", "--out", s(&dir)];
    let strict = usecert(&base);
    assert_eq!(code(&strict), 1);
    let v = json(&dir.join("verdict.json"));
    assert_eq!(v["reason"], "below_threshold");
    assert_eq!(v["failed_tests"], 0);
    let sur = v["single_use_reliability"].as_f64().unwrap();

    let threshold = format!("{}", sur - 1e-6);
    let mut lax = base.to_vec();
    lax.extend(["--threshold", &threshold]);
    assert_eq!(code(&usecert(&lax)), 0);
    assert_eq!(json(&dir.join("verdict.json"))["reason"], "certified");
    for f in [
        "analysis.txt",
        "analysis.json",
        "suite.jsonl",
        "record.json",
        "report.txt",
        "report.json",
    ] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn empty_evidence_is_not_certified() {
    let dir = scratch("empty");
    let o = usecert(&[
        "certify",
        "--min-coverage",
        "false",
        "--weighted",
        "0",
        "--random",
        "0",
        "--out",
        s(&dir),
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&dir.join("verdict.json"))["reason"], "no_evidence");
}
