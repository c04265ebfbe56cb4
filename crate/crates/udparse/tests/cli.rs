//! The `udparse` binary: exit codes and output formats.

mod common;

use std::process::{Command, Output};

use common::{Scratch, OVERFIT};
use udparse_core::conllu::parse_conllu;

fn udparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_udparse")).args(args).env("RUST_LOG", "warn").output().expect("run udparse")
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Trains a 2-epoch model on the overfit fixture through a config file.
fn train(s: &Scratch) -> String {
    let cfg = s.write(
        "run.json",
        r#"{"profile":"desk","model":{"trainable_word_dim":8,"word_dim":8,"lstm_hidden":8,"arc_dim":8,"label_dim":8},"training":{"max_epochs":2}}"#,
    );
    let train = s.write("train.conllu", OVERFIT);
    let model = s.path("m.model").display().to_string();
    let log = s.path("log.jsonl");
    let o = udparse(&[
        "--config", cfg.to_str().unwrap(), "--model", &model, "train", "--train", train.to_str().unwrap(), "--log",
        log.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(log).unwrap();
    assert_eq!(lines.lines().count(), 2);
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["loss"].is_f64());
    }
    model
}

#[test]
fn missing_training_data_exits_2() {
    let s = Scratch::new();
    let model = s.path("m.model");
    let o = udparse(&["--model", model.to_str().unwrap(), "train"]);
    assert_eq!(o.status.code(), Some(2));
    let o = udparse(&["--model", model.to_str().unwrap(), "train", "--train", "/nonexistent.conllu"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = s.write("bad.json", r#"{"training": {"bogus": 1}}"#);
    let o = udparse(&["--config", bad.to_str().unwrap(), "train"]);
    assert_eq!(o.status.code(), Some(2));
    let malformed = s.write("bad.conllu", "1\tx\n\n");
    let o = udparse(&["--model", model.to_str().unwrap(), "train", "--train", malformed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn predict_evaluate_pipeline() {
    let s = Scratch::new();
    let model = train(&s);

    let raw = s.write("raw.txt", "the car\n");
    let o = udparse(&["--model", &model, "predict", raw.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pred = parse_conllu(&text(&o)).unwrap();
    assert_eq!(pred.len(), 1);
    assert_eq!(pred.sentences[0].len(), 2);
    assert_eq!(pred.sentences[0].heads().unwrap().iter().filter(|&&h| h == 0).count(), 1);

    let gold = s.path("train.conllu");
    let out = s.path("pred.conllu");
    let o = udparse(&["--model", &model, "predict", gold.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let o = udparse(&["--model", &model, "evaluate", gold.to_str().unwrap(), out.to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = text(&o);
    let json: serde_json::Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    for (label, key) in [("UAS", "uas"), ("LAS", "las"), ("UPOS", "upos_acc"), ("Lemmas", "lemma_acc"), ("Cycles", "cycle_rate")] {
        let row = stdout.lines().find(|l| l.split_whitespace().next() == Some(label)).unwrap();
        let shown: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((shown - 100.0 * json[key].as_f64().unwrap()).abs() < 0.006, "{}: {}", label, row);
    }
    assert_eq!(json["tokens"], 143);
    assert_eq!(json["sentences"], 8);

    let short = s.write("short.conllu", "1\tThe\t_\t_\t_\t_\t0\troot\t_\t_\n\n");
    let o = udparse(&["evaluate", gold.to_str().unwrap(), short.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn gradcheck_reports_injected_faults() {
    let o = udparse(&["gradcheck", "--instances", "2"]);
    assert!(o.status.success());
    assert!(text(&o).contains("trace_powers"));
    let o = udparse(&["gradcheck", "--instances", "2", "--inject-fault", "matmul"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("FAIL"));
    let o = udparse(&["gradcheck", "--inject-fault", "no_such_op"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_subcommands() {
    let o = udparse(&["--help"]);
    let t = text(&o);
    for cmd in ["train", "predict", "evaluate", "selftrain", "gradcheck"] {
        assert!(t.contains(cmd), "{}", t);
    }
    assert!(t.contains("--no-cycle-loss") && t.contains("--K"));
}
