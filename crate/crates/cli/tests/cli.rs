use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use wscadl::io::{read_json, read_jsonl, write_jsonl, DatasetRecord, PredictionRecord, TraceFile, TruthRecord};

fn tmp(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wscadl-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wscadl")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["datagen", "gabor", "--n", "x", "--out", "a"]).status.code(), Some(2));
    let d = tmp("usage");
    let data = d.join("d.jsonl");
    ok(&["datagen", "binary", "--n", "4", "--len", "20", "--out", s(&data)]);
    let out = run(&["split", "--data", s(&data), "--train-frac", "1.5", "--out-prefix", s(&d.join("p"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["train", "--data", s(&data), "--out", s(&d.join("m.json")), "--backend", "fast"]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn impossible_evidence_exits_1_with_the_signal_id() {
    let d = tmp("impossible");
    let data = d.join("d.jsonl");
    let rec = DatasetRecord {
        id: "tiny".into(),
        freq_bins: 1,
        len: 1,
        signal: vec![vec![0.0]],
        labels: vec![1, 2],
        cap: None,
    };
    write_jsonl(&data, &[rec]).unwrap();
    let out = run(&["train", "--data", s(&data), "--out", s(&d.join("m.json")), "--tw", "1", "--iters", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tiny"));
    assert_eq!(run(&["predict", "--model", s(&d.join("missing.json")), "--data", s(&data), "--out", s(&d.join("p"))]).status.code(), Some(1));
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn binary_datagen_and_zero_iteration_training() {
    let d = tmp("zero");
    let data = d.join("bin.jsonl");
    ok(&["datagen", "binary", "--seed", "1", "--out", s(&data)]);
    let records: Vec<DatasetRecord> = read_jsonl(&data).unwrap();
    assert_eq!(records.len(), 200);
    let t: serde_json::Value = read_json(d.join("bin.templates.json")).unwrap();
    assert_eq!(t["templates"].as_array().unwrap().len(), 3);
    assert!(d.join("bin.jsonl.manifest.json").exists());

    let m0 = d.join("m0.json");
    ok(&["train", "--data", s(&data), "--out", s(&m0), "--tw", "5", "--iters", "0", "--seed", "3"]);
    let want = wscadl::em::init_params(3, 5, 3, 3).unwrap();
    assert_eq!(wscadl::io::read_model(&m0).unwrap(), want);
    let trace: TraceFile = read_json(d.join("m0.trace.json")).unwrap();
    assert_eq!((trace.iteration, trace.loglik_trace.len()), (0, 1));
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn chain_and_tree_training_traces_agree() {
    let d = tmp("backends");
    let data = d.join("bin.jsonl");
    ok(&["datagen", "binary", "--n", "20", "--len", "80", "--seed", "2", "--out", s(&data)]);
    let mut traces = vec![];
    for backend in ["chain", "tree"] {
        let m = d.join(format!("{backend}.json"));
        ok(&[
            "train", "--data", s(&data), "--out", s(&m), "--tw", "5", "--nbar", "3", "--lambda-r", "1e-2", "--gamma", "1e-2",
            "--iters", "10", "--backend", backend,
        ]);
        let t: TraceFile = read_json(d.join(format!("{backend}.trace.json"))).unwrap();
        traces.push(t.loglik_trace);
    }
    for (a, b) in traces[0].iter().zip(&traces[1]) {
        assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
    }
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn perfect_predictions_score_perfectly() {
    let d = tmp("perfect");
    let truth = vec![
        TruthRecord { id: "a".into(), y: vec![0, 1, 0, 0] },
        TruthRecord { id: "b".into(), y: vec![2, 0, 0, 1] },
        TruthRecord { id: "c".into(), y: vec![0, 0, 0, 0] },
    ];
    let preds: Vec<PredictionRecord> = truth
        .iter()
        .map(|t| {
            let has = |c| t.y.contains(&c);
            PredictionRecord {
                id: t.id.clone(),
                instance_labels: t.y.clone(),
                union: (1..=2).filter(|&c| has(c)).collect(),
                map: (1..=2).filter(|&c| has(c)).collect(),
                scores: (1..=2).map(|c| if has(c) { 1.0 } else { 0.0 }).collect(),
                instance_probs: Some(t.y.iter().map(|&y| (1..=2).map(|c| f64::from(u8::from(y == c))).collect()).collect()),
                instance_offset: Some(0),
            }
        })
        .collect();
    let (p, tp) = (d.join("p.jsonl"), d.join("t.jsonl"));
    write_jsonl(&p, &preds).unwrap();
    write_jsonl(&tp, &truth).unwrap();
    let out = ok(&["eval", "--pred", s(&p), "--truth", s(&tp)]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let all = csv.lines().find(|l| l.starts_with("all,")).unwrap();
    // instance AUC, signal AUC, lag, hamming, rank loss, AP, one error, coverage
    assert_eq!(all, "all,1,1,,0,0,1,0,0.5");
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn quick_bench_emits_every_cell() {
    let d = tmp("bench");
    let out = d.join("b.csv");
    ok(&["bench", "--grid", "quick", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("backend,T_prime,labels,ratio,median_seconds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), wscadl::bench::BenchGrid::quick().cells.len());
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
    let fig: serde_json::Value = read_json(d.join("b.fig7.json")).unwrap();
    assert!(fig["length"]["series"]["chain"].is_array());
    fs::remove_dir_all(d).unwrap();
}
