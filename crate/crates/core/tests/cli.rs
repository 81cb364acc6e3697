mod common;

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_depsearch")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_split(dir: &Path, name: &str, pairs: &[depsearch::ingest::CorpusPair]) {
    let lines: Vec<String> = pairs
        .iter()
        .map(|p| serde_json::json!({"id": p.id, "code": p.code, "docstring": p.description}).to_string())
        .collect();
    std::fs::write(dir.join(name), lines.join("\n")).unwrap();
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pairs = common::toy_pairs(24);
    write_split(d, "train.jsonl", &pairs[..16]);
    write_split(d, "valid.jsonl", &pairs[16..20]);
    write_split(d, "test.jsonl", &pairs[16..]);

    let prep = ["preprocess", "--train", "train.jsonl", "--valid", "valid.jsonl", "--test", "test.jsonl", "--out", "data"];
    let first = stdout(&run(d, &prep));
    assert!(first.contains("train") && first.contains("16") && !first.contains("reused"), "{first}");
    assert!(stdout(&run(d, &prep)).contains("reused"));

    let tiny = ["--embed-dim", "6", "--dep-dim", "6", "--hidden", "4", "--max-epochs", "2", "--valid-distractors", "3"];
    let mut train = vec!["train", "--data", "data", "--out", "m.ckpt"];
    train.extend(tiny);
    assert!(stdout(&run(d, &train)).contains("best epoch"));
    assert!(d.join("m.history.json").exists());

    run(d, &["index", "--data", "data", "--checkpoint", "m.ckpt", "--out", "idx.bin"]);
    let hits = stdout(&run(d, &["search", "--data", "data", "--checkpoint", "m.ckpt", "--index", "idx.bin", "--query", "sort the names", "-k", "3"]));
    assert_eq!(hits.lines().count(), 3, "{hits}");

    let eval = stdout(&run(d, &["eval", "--data", "data", "--checkpoint", "m.ckpt", "--seed", "3", "--json", "r.json"]));
    assert!(eval.contains("MRR"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["queries"], 8);
    assert_eq!(report["pool_size"], 8);
    assert_eq!(report["seed"], 3);
}

#[test]
fn pdg_and_segment_commands() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.py"), common::BINARY_SEARCH).unwrap();
    let json: serde_json::Value = serde_json::from_str(&stdout(&run(dir.path(), &["pdg", "f.py", "--format", "json"]))).unwrap();
    assert_eq!(json["size"], 20);
    assert_eq!(json["l"], 12);
    let dot = stdout(&run(dir.path(), &["pdg", "f.py", "--mode", "control_only"]));
    assert!(dot.starts_with("digraph") && !dot.contains("class=data"));
    let tree: serde_json::Value = serde_json::from_str(&stdout(&run(dir.path(), &["segment", "f.py"]))).unwrap();
    assert!(tree.to_string().contains("FuncName"));
}

#[test]
fn stale_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_split(d, "train.jsonl", &common::toy_pairs(8));
    run(d, &["preprocess", "--train", "train.jsonl", "--out", "data"]);
    let tiny = ["--data", "data", "--embed-dim", "4", "--dep-dim", "4", "--hidden", "2", "--max-epochs", "1", "--valid-distractors", "3"];
    run(d, &[&["train", "--out", "a.ckpt"][..], &tiny].concat());
    run(d, &[&["train", "--out", "b.ckpt", "--seed", "7"][..], &tiny].concat());
    run(d, &["index", "--data", "data", "--checkpoint", "a.ckpt", "--split", "train", "--out", "a.idx"]);
    let out = Command::new(env!("CARGO_BIN_EXE_depsearch"))
        .current_dir(d)
        .args(["search", "--data", "data", "--checkpoint", "b.ckpt", "--index", "a.idx", "--query", "add"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("index was built by checkpoint"));
}
