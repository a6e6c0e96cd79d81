use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reprospec"))
        .args(args)
        .env("REPROSPEC_STORE", store)
        .env("REPROSPEC_FORBID_NETWORK", "1")
        .output()
        .unwrap()
}

fn offline(store: &Path, args: &[&str]) -> Output {
    let fx = fixtures().display().to_string();
    let mut all = vec!["--offline", "--fixtures", fx.as_str()];
    all.extend_from_slice(args);
    run(store, &all)
}

#[test]
fn exit_codes_for_source_failures() {
    let store = tempfile::tempdir().unwrap();
    let out_dir = store.path().join("out").display().to_string();
    for (purl, code) in [
        ("pkg:maven/org.nowhere/ghost@1.0", 2),
        ("pkg:maven/org.sample/untagged@9.9", 3),
        ("pkg:maven/org.webjars/jquery@3.7.1", 6),
        ("pkg:npm/left-pad@1.3.0", 64),
    ] {
        let out = offline(
            store.path(),
            &["gen-buildspec", purl, "--out-dir", &out_dir],
        );
        assert_eq!(
            out.status.code(),
            Some(code),
            "{purl}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn json_errors_name_the_failure() {
    let store = tempfile::tempdir().unwrap();
    let out = offline(
        store.path(),
        &[
            "--output",
            "json",
            "find-source",
            "pkg:maven/org.sample/untagged@9.9",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"], "NO_MATCHING_TAG");
    assert_eq!(v["exit_code"], 3);
}

#[test]
fn gradle_fixture_buildspec_and_store() {
    let store = tempfile::tempdir().unwrap();
    let out_dir = store.path().join("out");
    let out = offline(
        store.path(),
        &[
            "gen-buildspec",
            "pkg:maven/io.github.sample/release-demo@2.3.0",
            "--out-dir",
            &out_dir.display().to_string(),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("release-demo-2.3.0.buildspec")).unwrap();
    assert!(text.contains("\ntool=gradle\n"), "{text}");
    assert!(text.contains("\njdk=17\n"), "{text}");
    assert!(text.contains("\ngitTag=v2.3.0\n"), "{text}");
    assert!(
        text.contains("\ncommand=\"./gradlew build -x test --no-daemon\"\n"),
        "{text}"
    );
    let stored: Vec<_> = walk(store.path())
        .into_iter()
        .filter(|p| !p.starts_with(&out_dir))
        .collect();
    assert!(
        stored
            .iter()
            .any(|p| p.extension().is_some_and(|e| e == "jsonl")),
        "nothing stored: {stored:?}"
    );
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).into_iter().flatten().flatten() {
        let p = entry.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn batch_reports_each_package() {
    let store = tempfile::tempdir().unwrap();
    let list = store.path().join("list.txt");
    fs::write(
        &list,
        "# packages\npkg:maven/io.github.sample/release-demo@2.3.0\npkg:maven/org.sample/untagged@9.9\n\npkg:maven/org.sample/plain-lib@3.1.0\n",
    )
    .unwrap();
    let out_dir = store.path().join("out");
    let out = offline(
        store.path(),
        &[
            "--output",
            "json",
            "gen-buildspec",
            "--batch",
            &list.display().to_string(),
            "--jobs",
            "3",
            "--out-dir",
            &out_dir.display().to_string(),
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let codes: Vec<_> = rows
        .iter()
        .map(|r| r["exit_code"].as_u64().unwrap())
        .collect();
    assert_eq!(codes, [0, 3, 0]);
    assert!(out_dir.join("plain-lib-3.1.0.buildspec").is_file());
    assert!(out_dir.join("release-demo-2.3.0.buildspec").is_file());
}

#[test]
fn offline_without_fixtures_never_reaches_the_network() {
    let store = tempfile::tempdir().unwrap();
    let out = run(
        store.path(),
        &[
            "--offline",
            "find-source",
            "pkg:maven/org.sample/plain-lib@3.1.0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!err.contains("network access attempted"), "{err}");
}

#[test]
fn forbidden_network_fails_live_runs() {
    let store = tempfile::tempdir().unwrap();
    let out = run(
        store.path(),
        &["find-source", "pkg:maven/org.sample/plain-lib@3.1.0"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("network access attempted"));
}

#[test]
fn analyze_exit_codes_and_stability() {
    let store = tempfile::tempdir().unwrap();
    let empty = tempfile::tempdir().unwrap();
    let out = run(
        store.path(),
        &["analyze", &empty.path().display().to_string()],
    );
    assert_eq!(out.status.code(), Some(4));

    let repo = fixtures()
        .join("repos/github.com/sample-org/release-demo")
        .display()
        .to_string();
    let a = run(store.path(), &["analyze", &repo]);
    let b = run(store.path(), &["analyze", &repo]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(
        text.starts_with("1 workflow(s), 3 candidate(s)\n"),
        "{text}"
    );
    assert!(text.contains("triggers: RELEASE[published]"));
    assert!(text.contains("jdk: {17, 21} (graalvm)"));
}

#[test]
fn rebuild_exit_codes() {
    let store = tempfile::tempdir().unwrap();
    let rb = fixtures().join("rebuild");
    let spec = rb.join("plain-lib-3.1.0.buildspec").display().to_string();
    let script = rb.join("jdk-mismatch.json").display().to_string();

    let out = run(
        store.path(),
        &[
            "rebuild",
            &spec,
            "--executor",
            "scripted",
            "--script",
            &script,
        ],
    );
    assert_eq!(out.status.code(), Some(11), "no fix without --auto-fix");
    let out = run(
        store.path(),
        &[
            "--jdk",
            "17",
            "rebuild",
            &spec,
            "--executor",
            "scripted",
            "--script",
            &script,
        ],
    );
    assert_eq!(out.status.code(), Some(0), "--jdk overrides the spec");
    let out = run(store.path(), &["rebuild", &spec]);
    assert_eq!(out.status.code(), Some(0), "dry run");
    assert!(String::from_utf8_lossy(&out.stdout).contains("result: SUCCESS"));
    let out = run(store.path(), &["rebuild", &spec, "--executor", "container"]);
    assert_eq!(out.status.code(), Some(8));
    let out = run(store.path(), &["rebuild", &spec, "--executor", "scripted"]);
    assert_eq!(out.status.code(), Some(64), "scripted needs --script");
}

#[test]
fn classify_log_from_stdin() {
    let store = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_reprospec"))
        .args(["--output", "json", "classify-log", "-"])
        .env("REPROSPEC_STORE", store.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"[ERROR] Source option 5 is no longer supported. Use 7 or later.\nerror: invalid target release: 1.5\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["category"], "JDK_MISMATCH");
    assert_eq!(v["suggested_major"], 6);
}

#[test]
fn usage_errors_exit_64() {
    let store = tempfile::tempdir().unwrap();
    assert_eq!(
        run(store.path(), &["no-such-command"]).status.code(),
        Some(64)
    );
    assert_eq!(run(store.path(), &["find-source"]).status.code(), Some(64));
    assert_eq!(run(store.path(), &["--help"]).status.code(), Some(0));
    let help = String::from_utf8(run(store.path(), &["--help"]).stdout).unwrap();
    assert!(help.contains("Exit codes:"));
}
