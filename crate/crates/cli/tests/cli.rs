use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn relnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relnet"))
        .args(args)
        .env_remove("RELNET_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = relnet(args);
    assert!(
        out.status.success(),
        "relnet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn extract(dir: &Path) -> PathBuf {
    let f = fixtures();
    let out = dir.join("corpus.jsonl");
    ok(&[
        "extract",
        "--conllu",
        s(&f.join("conllu")),
        "--aliases",
        s(&f.join("aliases.tsv")),
        "--antonyms",
        s(&f.join("antonyms.tsv")),
        "--out",
        s(&out),
    ]);
    out
}

fn train(dir: &Path, corpus: &Path, extra: &[&str]) -> PathBuf {
    let ckpt = dir.join("model.json");
    let emb = fixtures().join("embeddings.txt");
    let mut args = vec![
        "train",
        "--corpus",
        s(corpus),
        "--embeddings",
        s(&emb),
        "--out",
        s(&ckpt),
        "--relations",
        "3",
        "--entity-dim",
        "4",
        "--final-dim",
        "6",
        "--batch-size",
        "2",
        "--negatives",
        "2",
        "--epochs",
        "1",
        "--seed",
        "7",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    ckpt
}

#[test]
fn extract_matches_golden() {
    let dir = TempDir::new().unwrap();
    let corpus = extract(dir.path());
    assert_eq!(
        fs::read_to_string(corpus).unwrap(),
        fs::read_to_string(fixtures().join("golden_corpus.jsonl")).unwrap()
    );
    assert!(dir.path().join("corpus.jsonl.manifest.json").exists());
}

#[test]
fn empty_conllu_dir_is_input_error() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let f = fixtures();
    let out = relnet(&[
        "extract",
        "--conllu",
        s(&empty),
        "--aliases",
        s(&f.join("aliases.tsv")),
        "--antonyms",
        s(&f.join("antonyms.tsv")),
        "--out",
        s(&dir.path().join("c.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no sentences"));
}

#[test]
fn missing_alias_file_is_input_error() {
    let dir = TempDir::new().unwrap();
    let f = fixtures();
    let out = relnet(&[
        "extract",
        "--conllu",
        s(&f.join("conllu")),
        "--aliases",
        s(&dir.path().join("nope.tsv")),
        "--antonyms",
        s(&f.join("antonyms.tsv")),
        "--out",
        s(&dir.path().join("c.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let corpus = extract(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    let ca = train(&a, &corpus, &[]);
    let cb = train(&b, &corpus, &[]);
    assert_eq!(fs::read(ca).unwrap(), fs::read(cb).unwrap());
    assert_eq!(
        fs::read(a.join("model.json.log.jsonl")).unwrap(),
        fs::read(b.join("model.json.log.jsonl")).unwrap()
    );
}

#[test]
fn zero_lambda_still_logs_penalty() {
    let dir = TempDir::new().unwrap();
    let corpus = extract(dir.path());
    let ckpt = train(dir.path(), &corpus, &["--lambda", "0"]);
    let log = fs::read_to_string(format!("{}.log.jsonl", ckpt.display())).unwrap();
    let line: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    let x = line["X"].as_f64().unwrap();
    let j = line["J"].as_f64().unwrap();
    assert!(x > 0.0);
    assert_eq!(line["total"].as_f64().unwrap(), j);
}

#[test]
fn missing_checkpoint_exits_4() {
    let dir = TempDir::new().unwrap();
    let corpus = extract(dir.path());
    let out = relnet(&[
        "analyze",
        "trend",
        "--checkpoint",
        s(&dir.path().join("absent.json")),
        "--corpus",
        s(&corpus),
        "--embeddings",
        s(&fixtures().join("embeddings.txt")),
        "--pair",
        "US,Russia",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_pair_is_input_error() {
    let dir = TempDir::new().unwrap();
    let corpus = extract(dir.path());
    let ckpt = train(dir.path(), &corpus, &[]);
    let out = relnet(&[
        "analyze",
        "trend",
        "--checkpoint",
        s(&ckpt),
        "--corpus",
        s(&corpus),
        "--embeddings",
        s(&fixtures().join("embeddings.txt")),
        "--pair",
        "Japan,Canada",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trend_and_change_rate_tables() {
    let dir = TempDir::new().unwrap();
    let corpus = extract(dir.path());
    let ckpt = train(dir.path(), &corpus, &[]);
    let emb = fixtures().join("embeddings.txt");
    let trend_csv = dir.path().join("trend.csv");
    ok(&[
        "analyze",
        "trend",
        "--checkpoint",
        s(&ckpt),
        "--corpus",
        s(&corpus),
        "--embeddings",
        s(&emb),
        "--pair",
        "US,Russia",
        "--events",
        s(&fixtures().join("key_events.tsv")),
        "--out",
        s(&trend_csv),
    ]);
    let text = fs::read_to_string(&trend_csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest_sha256="));
    assert_eq!(
        lines.next().unwrap(),
        "pair,relation_id,descriptor_head,month,mean_weight,n_articles,is_key_event"
    );
    // three relations over three months
    assert_eq!(lines.count(), 9);

    let cr_csv = dir.path().join("change.csv");
    let report = dir.path().join("change.json");
    ok(&[
        "analyze",
        "change-rate",
        "--checkpoint",
        s(&ckpt),
        "--corpus",
        s(&corpus),
        "--embeddings",
        s(&emb),
        "--pair",
        "US,Russia",
        "--window",
        "1",
        "--out",
        s(&cr_csv),
        "--report",
        s(&report),
    ]);
    let text = fs::read_to_string(&cr_csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows[0], "pair,month,delta,is_key_event");
    assert_eq!(rows.len(), 4);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(json.is_object() || json.is_array());
}

#[test]
fn synth_writes_corpus_embeddings_and_truth() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"clusters": 2, "dim": 8, "fillers": 4, "months": 4, "articles_per_month": 3,
            "pairs": [{"entities": ["US", "China"], "segments": [{"start": 0, "mixture": [0.5, 0.5]}]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["synth", "--spec", s(&spec), "--out-dir", s(&out), "--seed", "3"]);
    let corpus = fs::read_to_string(out.join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 12);
    assert!(out.join("embeddings.txt").exists());
    assert!(out.join("truth.json").exists());
}
