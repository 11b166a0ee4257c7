use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qbek::corpus::write_dataset;
use qbek::synthetic::{generate_corpus, SyntheticConfig};

const TINY: &str = "num_layers = 1\nhidden_size = 16\nnum_heads = 2\nffn_size = 32\nmax_input_size = 64\n\
                    max_steps = 20\neval_interval_steps = 10\nbatch_size = 4\nlog_level = error\n";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self { dir: tempfile::tempdir().unwrap() };
        let docs = generate_corpus(&SyntheticConfig { num_docs: 6, ..SyntheticConfig::overfit(5) });
        write_dataset(ws.path("data.jsonl"), &docs, None).unwrap();
        ws.write("run.cfg", TINY);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, content: &str) {
        std::fs::write(self.path(name), content).unwrap();
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    fn train(&self, out: &str) {
        let o = qbek(&["train", "--config", &self.arg("run.cfg"), "--dataset", &self.arg("data.jsonl"), "--out", &self.arg(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
}

fn qbek(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbek")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn eval(ws: &Workspace, dataset: &str, predictions: &str) -> Output {
    qbek(&["eval", "--dataset", &ws.arg(dataset), "--predictions", &ws.arg(predictions), "--out", &ws.arg("eval")])
}

fn prediction_line(id: &str, keyphrases: &[&str]) -> String {
    let kps: Vec<String> = keyphrases
        .iter()
        .enumerate()
        .map(|(i, k)| format!(r#"{{"text":"{k}","normalized":"{k}","score":{}}}"#, 1.0 - i as f64 * 0.1))
        .collect();
    format!("{{\"id\":\"{id}\",\"keyphrases\":[{}]}}\n", kps.join(","))
}

#[test]
fn missing_input_file_is_usage_error() {
    let ws = Workspace::new();
    let o = qbek(&["annotate", "--dataset", &ws.arg("nope.jsonl"), "--out", &ws.arg("out")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope.jsonl"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    assert_eq!(code(&qbek(&["frobnicate"])), 2);
    assert_eq!(code(&qbek(&["eval", "--bogus"])), 2);
    assert_eq!(code(&qbek(&["--help"])), 0);
}

#[test]
fn malformed_dataset_line_is_data_error() {
    let ws = Workspace::new();
    ws.write("bad.jsonl", "{\"id\":\"a\",\"body\":\"Fine.\"}\n{\"id\":\"b\"\n");
    let o = qbek(&["annotate", "--dataset", &ws.arg("bad.jsonl"), "--out", &ws.arg("out")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn duplicate_id_is_data_error() {
    let ws = Workspace::new();
    ws.write("dup.jsonl", "{\"id\":\"a\",\"body\":\"x\"}\n{\"id\":\"a\",\"body\":\"y\"}\n");
    let o = qbek(&["stats", "--dataset", &ws.arg("dup.jsonl")]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_config_key_names_the_key() {
    let ws = Workspace::new();
    ws.write("bad.cfg", "window_sentences = 2\nwindow_sentence = 3\n");
    let o = qbek(&["stats", "--config", &ws.arg("bad.cfg"), "--dataset", &ws.arg("data.jsonl")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("window_sentence"), "{}", stderr(&o));

    ws.write("range.cfg", "window_sentences = 0\n");
    let o = qbek(&["stats", "--config", &ws.arg("range.cfg"), "--dataset", &ws.arg("data.jsonl")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_fixture_and_self_as_gold() {
    let ws = Workspace::new();
    ws.write("gold.jsonl", "{\"id\":\"d\",\"body\":\"b\",\"keyphrases\":[\"a\",\"b\",\"c\",\"d\"]}\n");
    ws.write("preds.jsonl", &prediction_line("d", &["a", "b", "x", "y", "z"]));
    let o = eval(&ws, "gold.jsonl", "preds.jsonl");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("F1@5: 0.4444"), "{}", stdout(&o));
    let csv = ws.read("eval/report.csv");
    assert!(csv.starts_with("k,matched,predicted,gold,precision,recall,f1\n5,2,5,4,"), "{csv}");
    assert!(ws.path("eval/config.txt").is_file());

    ws.write("self.jsonl", &prediction_line("d", &["a", "b", "c", "d"]));
    let o = eval(&ws, "gold.jsonl", "self.jsonl");
    assert!(stdout(&o).contains("F1@5: 1.0000"), "{}", stdout(&o));
}

#[test]
fn eval_errors() {
    let ws = Workspace::new();
    ws.write("gold.jsonl", "{\"id\":\"d\",\"body\":\"b\",\"keyphrases\":[\"a\"]}\n");
    ws.write("other.jsonl", &prediction_line("e", &["a"]));
    assert_eq!(code(&eval(&ws, "gold.jsonl", "other.jsonl")), 1);

    ws.write("broken.jsonl", &format!("{}not json\n", prediction_line("d", &["a"])));
    let o = eval(&ws, "gold.jsonl", "broken.jsonl");
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn extract_on_empty_dataset_writes_empty_file() {
    let ws = Workspace::new();
    ws.train("train");
    ws.write("empty.jsonl", "");
    let o = qbek(&[
        "extract",
        "--config",
        &ws.arg("run.cfg"),
        "--dataset",
        &ws.arg("empty.jsonl"),
        "--checkpoint",
        &ws.arg("train/model.ckpt"),
        "--out",
        &ws.arg("extract"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(ws.read("extract/predictions.jsonl"), "");
}

#[test]
fn train_extract_eval_round() {
    let ws = Workspace::new();
    ws.train("train");
    for f in ["model.ckpt", "vocab.txt", "train_log.csv", "config.txt"] {
        assert!(ws.path("train").join(f).is_file(), "{f}");
    }
    let o = qbek(&[
        "extract",
        "--config",
        &ws.arg("run.cfg"),
        "--dataset",
        &ws.arg("data.jsonl"),
        "--checkpoint",
        &ws.arg("train/model.ckpt"),
        "--top-k",
        "5",
        "--out",
        &ws.arg("extract"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let preds = ws.read("extract/predictions.jsonl");
    assert_eq!(preds.lines().count(), 6);
    let o = eval(&ws, "data.jsonl", "extract/predictions.jsonl");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn extract_rejects_input_longer_than_checkpoint() {
    let ws = Workspace::new();
    ws.train("train");
    let o = qbek(&[
        "extract",
        "--dataset",
        &ws.arg("data.jsonl"),
        "--checkpoint",
        &ws.arg("train/model.ckpt"),
        "--max-input-size",
        "128",
        "--out",
        &ws.arg("extract"),
    ]);
    assert_eq!(code(&o), 2);
}

fn log_steps(path: &Path) -> Vec<u64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn resume_continues_step_counter() {
    let ws = Workspace::new();
    ws.write("resume.cfg", &TINY.replace("max_steps = 20", "max_steps = 40"));
    ws.write("first.cfg", &TINY.replace("eval_interval_steps = 10", "eval_interval_steps = 20"));
    let o = qbek(&["train", "--config", &ws.arg("first.cfg"), "--dataset", &ws.arg("data.jsonl"), "--out", &ws.arg("a")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(log_steps(&ws.path("a/train_log.csv")), vec![20]);
    let o = qbek(&[
        "train",
        "--config",
        &ws.arg("resume.cfg"),
        "--dataset",
        &ws.arg("data.jsonl"),
        "--checkpoint",
        &ws.arg("a/model.ckpt"),
        "--vocab",
        &ws.arg("a/vocab.txt"),
        "--out",
        &ws.arg("b"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(log_steps(&ws.path("b/train_log.csv")), vec![30, 40]);
}

#[test]
fn sweep_grid_rows() {
    let ws = Workspace::new();
    ws.write("sweep.cfg", &format!("{TINY}sweep_windows = 1,2\nsweep_queries = false,true\nsweep_seeds = 0\n"));
    let o = qbek(&["sweep", "--config", &ws.arg("sweep.cfg"), "--dataset", &ws.arg("data.jsonl"), "--out", &ws.arg("sweep")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(ws.read("sweep/sweep.csv").lines().count(), 5);
    assert_eq!(ws.read("sweep/summary.csv").lines().count(), 5);
    assert_eq!(ws.read("sweep/failures.csv").lines().count(), 1);
    assert_eq!(ws.read("sweep/saturation.csv").lines().count(), 5);
    assert!(ws.path("sweep/cells/w2-q1-s0/predictions.jsonl").is_file());
}

#[test]
fn annotate_writes_gold_spans() {
    let ws = Workspace::new();
    let o = qbek(&["annotate", "--dataset", &ws.arg("data.jsonl"), "--out", &ws.arg("ann")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = ws.read("ann/annotated.jsonl");
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.contains("\"gold_spans\":[[")));
    assert!(ws.read("ann/stats.txt").contains("documents: 6"));
}
