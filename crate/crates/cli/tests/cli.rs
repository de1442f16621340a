use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use probe_core::corpus::write_corpus;
use probe_core::embed::write_embedding_set;
use probe_core::{synthetic, CorpusFormat, EmbeddingSet};

fn probe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probe"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn reference_files(dir: &Path) -> (String, String) {
    let corpus = synthetic::reference_corpus();
    let corpus_path = dir.join("corpus.tsv");
    write_corpus(&corpus, &corpus_path, CorpusFormat::Tsv).unwrap();
    let vectors_path = dir.join("vectors.jsonl");
    write_embedding_set(&synthetic::blob_set(&corpus, 6, 1.0, 1), &vectors_path).unwrap();
    (
        corpus_path.display().to_string(),
        vectors_path.display().to_string(),
    )
}

#[test]
fn validate_reports_conformance_through_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = reference_files(dir.path());
    let ok = probe(&["validate", "--corpus", &corpus]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("1205 sentences loaded"));

    let toy = dir.path().join("toy.jsonl");
    write_corpus(&synthetic::toy_corpus(3, 4), &toy, CorpusFormat::Jsonl).unwrap();
    let bad = probe(&["validate", "--corpus", toy.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("MISMATCH"));
}

#[test]
fn malformed_corpus_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.tsv");
    fs::write(&path, "not a header\n").unwrap();
    assert_eq!(
        probe(&["validate", "--corpus", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn split_prints_the_fixed_and_resampled_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = reference_files(dir.path());
    let fixed: serde_json::Value = serde_json::from_str(&stdout(&probe(&[
        "split", "--corpus", &corpus, "--mode", "fixed",
    ])))
    .unwrap();
    assert_eq!(fixed["train_ids"].as_array().unwrap().len(), 814);
    assert_eq!(fixed["test_ids"].as_array().unwrap().len(), 391);
    let a = stdout(&probe(&[
        "split",
        "--corpus",
        &corpus,
        "--mode",
        "resampled",
        "--seed",
        "4",
    ]));
    let b = stdout(&probe(&[
        "split",
        "--corpus",
        &corpus,
        "--mode",
        "resampled",
        "--seed",
        "4",
    ]));
    assert_eq!(a, b);
    let resampled: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(resampled["seed"], 4);
}

#[test]
fn embed_ranges_and_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = reference_files(dir.path());
    let words = dir.path().join("words.txt");
    fs::write(
        &words,
        "they 1 0 0\nthe 0 1 0\nin 0 0 1\nsentence 1 1 1\nunused 9 9 9\n",
    )
    .unwrap();
    let out = dir.path().join("static.jsonl");
    let args = [
        "embed",
        "--corpus",
        &corpus,
        "--vectors",
        words.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(probe(&args).status.code(), Some(0));
    let first = fs::read(&out).unwrap();
    assert_eq!(probe(&args).status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), first);

    let ranges: serde_json::Value = serde_json::from_str(&stdout(&probe(&[
        "ranges",
        "--embeddings",
        out.to_str().unwrap(),
    ])))
    .unwrap();
    assert!(ranges["l2_min"].as_f64().unwrap() <= ranges["l2_max"].as_f64().unwrap());
    assert!(ranges["dim_min"].as_f64().unwrap() >= 0.0 && ranges["dim_max"].as_f64().unwrap() <= 9.0);

    let plain = probe(&[
        "correlate",
        "--embeddings",
        out.to_str().unwrap(),
        "--corpus",
        &corpus,
    ]);
    assert_eq!(plain.status.code(), Some(0));
    assert!(stdout(&plain).contains("vanilla") && !stdout(&plain).contains("abl. N"));
    let ablated = probe(&[
        "correlate",
        "--embeddings",
        out.to_str().unwrap(),
        "--corpus",
        &corpus,
        "--ablate-norm",
    ]);
    assert!(stdout(&ablated).contains("abl. N"));
}

#[test]
fn coverage_gap_is_an_integrity_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = reference_files(dir.path());
    let partial =
        EmbeddingSet::from_vectors("partial", 2, vec![("see_star_000".to_string(), vec![1.0, 2.0])]).unwrap();
    let path = dir.path().join("partial.jsonl");
    write_embedding_set(&partial, &path).unwrap();
    let out = probe(&[
        "correlate",
        "--embeddings",
        path.to_str().unwrap(),
        "--corpus",
        &corpus,
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_reports_and_report_rerenders_them() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = reference_files(dir.path());
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{
            "corpus_path": "corpus.tsv",
            "embedding_source": {"external_set": {"path": "vectors.jsonl"}},
            "conditions": ["rand_pred", "vanilla", "del_1h"],
            "n_runs": 2,
            "output_dir": "out"
        }"#,
    )
    .unwrap();
    let out = probe(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("vanilla"));
    for name in [
        "summary.json",
        "summary.txt",
        "summary.tsv",
        "series.json",
        "manifest.json",
    ] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }

    let json = dir.path().join("out/summary.json");
    let tsv = dir.path().join("out/summary.tsv");
    let from_json = stdout(&probe(&[
        "report",
        "--summaries",
        json.to_str().unwrap(),
        "--format",
        "tsv",
    ]));
    assert_eq!(from_json, fs::read_to_string(&tsv).unwrap());
    let from_tsv = stdout(&probe(&[
        "report",
        "--summaries",
        tsv.to_str().unwrap(),
        "--format",
        "json",
    ]));
    assert_eq!(from_tsv, fs::read_to_string(&json).unwrap());
    let text = stdout(&probe(&["report", "--summaries", json.to_str().unwrap()]));
    assert_eq!(
        text,
        fs::read_to_string(dir.path().join("out/summary.txt")).unwrap()
    );
}

#[test]
fn bad_config_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = reference_files(dir.path());
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"corpus_path": "corpus.tsv", "embedding_source": {"external_set": {"path": "vectors.jsonl"}},
            "conditions": [], "output_dir": "out"}"#,
    )
    .unwrap();
    assert_eq!(
        probe(&["run", "--config", config.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    fs::write(&config, "{").unwrap();
    assert_eq!(
        probe(&["run", "--config", config.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn workers_can_be_capped_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = reference_files(dir.path());
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"corpus_path": "corpus.tsv", "embedding_source": {"external_set": {"path": "vectors.jsonl"}},
            "conditions": ["rand_pred"], "n_runs": 3, "output_dir": "out"}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_probe"))
        .args(["run", "--config", config.to_str().unwrap()])
        .env("PROBE_WORKERS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
