//! End-to-end runs of the binary on a miniature configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &str = r#"
seed = 7

[paths]
target_labeled = "data/target_train_labeled.conll"

[synthetic]
general_sentences = 240
source_sentences = 160
target_sentences = 160

[vocab]
size = 300

[encoder]
num_layers = 1
hidden_dim = 16
num_heads = 2
ffn_dim = 32
max_len = 32

[pretrain]
epochs = 1

[domain]
epochs = 1
max_steps = 30

[task]
epochs = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqadapt"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(["--config", "exp.toml"]).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = run(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

fn prepared() -> tempfile::TempDir {
    let dir = setup(TINY);
    ok(dir.path(), &["generate-synthetic"]);
    ok(dir.path(), &["build-vocab"]);
    dir
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn generation_is_reproducible_and_seed_changes_only_words() {
    let a = prepared();
    let b = prepared();
    assert_eq!(files(a.path()), files(b.path()));

    let out = ok(a.path(), &["generate-synthetic", "--seed", "8", "--out", "ignored"]);
    assert!(out.contains("shift seed"));
    let read = |d: &Path, seed: &str| {
        let cfg = format!("{TINY}\n").replace("seed = 7", &format!("seed = {seed}"));
        std::fs::write(d.join("exp.toml"), cfg).unwrap();
        ok(d, &["generate-synthetic"]);
        std::fs::read_to_string(d.join("data/target_test.conll")).unwrap()
    };
    let t7 = read(a.path(), "7");
    let t8 = read(b.path(), "8");
    assert_ne!(t7, t8);
    let tags = |t: &str| t.lines().map(|l| l.split('\t').nth(1).map(String::from)).collect::<Vec<_>>();
    assert_eq!(tags(&t7), tags(&t8));
}

#[test]
fn adaptabert_pipeline_and_evaluation() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["pretrain"]);
    assert!(d.join("out/pretrained.ckpt").exists());
    assert!(d.join("out/pretrained.provenance.json").exists());

    let out = ok(d, &["run", "adaptabert"]);
    assert_eq!(out.lines().count(), 3);
    for stage in ["pretrained", "domain-tuned", "task-tuned"] {
        assert!(d.join(format!("out/adaptabert/{stage}.ckpt")).exists(), "{stage}");
    }
    let prov: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/adaptabert/task-tuned.provenance.json")).unwrap())
            .unwrap();
    let stages: Vec<&str> = prov.iter().map(|r| r["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["pretrained", "domain-tuned", "task-tuned"]);

    let cks = [
        "out/adaptabert/domain-tuned.ckpt",
        "out/adaptabert/task-tuned.ckpt",
    ];
    // The domain-tuned checkpoint has no tag head yet.
    let o = run(d, &["evaluate", cks[0]]);
    assert_eq!(o.status.code(), Some(2));

    ok(d, &["evaluate", "--label", "fine", "--emit-confusion", cks[1]]);
    let first = std::fs::read(d.join("out/reports/fine.jsonl")).unwrap();
    ok(d, &["evaluate", "--label", "fine", "--emit-confusion", cks[1]]);
    assert_eq!(std::fs::read(d.join("out/reports/fine.jsonl")).unwrap(), first);
    assert!(d.join("out/reports/fine.confusion.txt").exists());
    ok(d, &["evaluate", "--label", "coarse", "--coarse", cks[1]]);

    let fine = records(&d.join("out/reports/fine.jsonl"));
    let coarse = records(&d.join("out/reports/coarse.jsonl"));
    let tagging = |rs: &[Value]| -> Vec<f64> {
        rs.iter()
            .filter(|r| r["record"] == "tagging")
            .map(|r| r["overall"].as_f64().unwrap())
            .collect()
    };
    let (f, c) = (tagging(&fine), tagging(&coarse));
    assert_eq!(f.len(), 2);
    for (f, c) in f.iter().zip(&c) {
        assert!(c >= f, "coarse {c} < fine {f}");
    }
    assert!(fine.iter().any(|r| r["record"] == "confusion"));

    ok(d, &["run", "task_tuned"]);
    ok(d, &[
        "evaluate",
        "--label",
        "forget",
        "out/task_tuned/task-tuned.ckpt",
        "out/adaptabert/task-tuned.ckpt",
    ]);
    let forget: Vec<Value> = records(&d.join("out/reports/forget.jsonl"))
        .into_iter()
        .filter(|r| r["record"] == "forgetting")
        .collect();
    assert_eq!(forget.len(), 2);
    assert_eq!(forget[0]["checkpoint"], "task_tuned/task-tuned");

    let preview = ok(d, &["mask-preview", "--limit", "3"]);
    assert!(preview.contains("masked instances"));
    assert_eq!(preview.matches("\ninstance ").count(), 3);
}

#[test]
fn provenance_hash_follows_input_data() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["pretrain"]);
    let cfg = TINY.to_string().replace("[paths]", "[paths]\npretrained = \"out/pretrained.ckpt\"");
    std::fs::write(d.join("exp.toml"), &cfg).unwrap();
    ok(d, &["run", "frozen", "--out", "a"]);
    let hash = |p: &str| -> String {
        let v: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(d.join(p)).unwrap()).unwrap();
        v.last().unwrap()["datasets"][0]["sha256"].as_str().unwrap().to_string()
    };
    let before = hash("a/frozen/task-tuned.provenance.json");
    let path = d.join("data/source_train.conll");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\t", "x\t", 1)).unwrap();
    ok(d, &["run", "frozen", "--out", "b"]);
    assert_ne!(hash("b/frozen/task-tuned.provenance.json"), before);
}

#[test]
fn config_errors_exit_one_without_writing() {
    let dir = setup(TINY);
    let d = dir.path();
    // No data generated yet: missing inputs.
    for args in [&["build-vocab"][..], &["pretrain"], &["run", "frozen"], &["evaluate", "x.ckpt"]] {
        let o = run(d, args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    assert!(!d.join("out").exists());
    assert!(!d.join("data").exists());

    std::fs::write(d.join("exp.toml"), format!("{TINY}\n[vocab]\nsize = 0\n").replace("[vocab]\nsize = 300\n", "")).unwrap();
    assert_eq!(run(d, &["build-vocab"]).status.code(), Some(1));

    let bad = setup(&TINY.replace("epochs = 1\nmax_steps = 30", "epochs = 0"));
    let o = run(bad.path(), &["generate-synthetic"]);
    assert!(o.status.success());
    ok(bad.path(), &["build-vocab"]);
    assert_eq!(run(bad.path(), &["run", "adaptabert"]).status.code(), Some(1));
    assert!(!bad.path().join("out").exists());

    let o = bin().args(["run", "not-a-variant"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn supervised_needs_labeled_target_path() {
    let dir = prepared();
    let d = dir.path();
    let cfg = TINY.replace("target_labeled = \"data/target_train_labeled.conll\"", "");
    std::fs::write(d.join("exp.toml"), cfg).unwrap();
    let o = run(d, &["run", "supervised"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target_labeled"));
}

#[test]
fn segmentation_mode_decodes_bio_spans() {
    let dir = prepared();
    let d = dir.path();
    // Relabel the data with a BIO scheme: proper nouns are entities.
    for f in ["source_train", "source_test", "target_test"] {
        let p = d.join(format!("data/{f}.conll"));
        let text = std::fs::read_to_string(&p).unwrap();
        let bio: String = text
            .lines()
            .map(|l| match l.split_once('\t') {
                Some((w, "NNP")) => format!("{w}\tB-PER\n"),
                Some((w, _)) => format!("{w}\tO\n"),
                None => format!("{l}\n"),
            })
            .collect();
        std::fs::write(&p, bio).unwrap();
    }
    std::fs::write(d.join("data/tags.txt"), "B-PER\nO\n").unwrap();
    ok(d, &["pretrain"]);
    let cfg = TINY.replace("[paths]", "[paths]\npretrained = \"out/pretrained.ckpt\"");
    std::fs::write(d.join("exp.toml"), cfg).unwrap();
    ok(d, &["run", "task_tuned"]);
    let out = ok(d, &["evaluate", "--mode", "segmentation", "--label", "seg", "out/task_tuned/task-tuned.ckpt"]);
    assert!(out.contains("f1"));
    let seg: Vec<Value> = records(&d.join("out/reports/seg.jsonl"));
    assert_eq!(seg.len(), 2);
    assert!(seg.iter().all(|r| r["record"] == "segmentation"));
    assert_eq!(
        run(d, &["evaluate", "--mode", "segmentation", "--coarse", "out/task_tuned/task-tuned.ckpt"]).status.code(),
        Some(1)
    );
}
