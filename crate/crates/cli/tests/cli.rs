use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptive-restore"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn cli")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), &["--bogus"]).status.code(), Some(1));
    assert_eq!(cli(dir.path(), &["--theta", "2", "run"]).status.code(), Some(1));
    assert_eq!(cli(dir.path(), &["--help"]).status.code(), Some(0));
    let missing = cli(dir.path(), &["--model", "absent.bin", "--source", "synth:n=1", "--out", "o", "run"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.bin"));
}

#[test]
fn degrade_split_train_eval_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["--out", "corpus", "--seed", "5", "degrade", "--scenes", "12", "--per-kind", "12", "--clean-count", "12", "--size", "64"]);
    let manifest = std::fs::read_to_string(d.join("corpus/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 96);

    let split: serde_json::Value = serde_json::from_str(&ok(d, &["split", "--manifest", "corpus/manifest.jsonl"])).unwrap();
    assert_eq!(split["train"].as_u64().unwrap() + split["test"].as_u64().unwrap(), 96);

    ok(d, &["--model", "m.bin", "train", "--manifest", "corpus/train.jsonl", "--epochs", "5"]);
    let history = std::fs::read_to_string(d.join("m.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 6);

    let eval = ok(d, &["--model", "m.bin", "eval", "--manifest", "corpus/test.jsonl", "--no-quality"]);
    assert_eq!(eval.lines().count(), 9);
    assert!(eval.lines().last().unwrap().starts_with("overall,"));

    let summary: serde_json::Value = serde_json::from_str(&ok(
        d,
        &["--model", "m.bin", "--source", "corpus/images", "--out", "restored", "--jobs", "2", "run"],
    ))
    .unwrap();
    assert_eq!(summary["frames"], 96);
    assert_eq!(summary["errors"], 0);
    let log = std::fs::read_to_string(d.join("restored/log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 96);

    let features = ok(d, &["--source", "synth:n=3,size=64", "classify", "--dump-features"]);
    let rows: Vec<&str> = features.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 17));
}

#[test]
fn dotted_overrides_reach_the_config() {
    let d = tempfile::tempdir().unwrap();
    let out = cli(d.path(), &["--blend.mode=diagonal", "--source", "synth:n=1", "classify", "--dump-features"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    ok(d.path(), &["--blend.mode", "sequential", "--source", "synth:n=1,size=32", "classify", "--dump-features"]);
}
