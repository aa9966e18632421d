use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nlts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlts")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = nlts(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_forecast_recovers_the_holdout() {
    let v = ok_json(&["forecast", "--data", "builtin:air_passengers", "--samples", "3"]);
    assert_eq!(v["horizon"], 29);
    assert_eq!(v["history_len"], 115);
    assert_eq!(v["valid_samples"], 3);
    assert!(v["metrics"]["mse"].as_f64().unwrap() <= 2.5e-7);
    assert!(v["metrics"]["mae"].as_f64().unwrap() <= 5e-4);
    assert_eq!(v["metrics"]["normalization"]["mode"], "minmax_full");
    assert!(v["manifest"].get("started_unix").map_or(true, Value::is_null));
}

#[test]
fn noisy_forecast_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let status = nlts(&[
        "forecast",
        "--data",
        "builtin:air_passengers",
        "--noise",
        "laplace",
        "--alpha",
        "0.02",
        "--samples",
        "5",
        "--out",
        path(&out),
    ]);
    assert!(status.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 5);
    assert!(v["forecast"]["variance"].as_array().unwrap().iter().all(|x| x.as_f64().unwrap() > 0.0));
}

#[test]
fn replayed_forecast_is_byte_identical() {
    use nlts::backend::{EchoTailBackend, RecordingBackend};
    use nlts::bench::{load_dataset, DatasetFormat, BUILTIN_AIR_PASSENGERS};
    use nlts::noise::NoiseSpec;
    use nlts::pipeline::{run_nlts, ForecastJob, JobSettings};

    let dir = tempfile::tempdir().unwrap();
    let cassette = dir.path().join("c.jsonl");
    let d = load_dataset(Path::new(BUILTIN_AIR_PASSENGERS), &DatasetFormat::default()).unwrap();
    let (history, target) = d.split(None).unwrap();
    let settings = JobSettings { noise: NoiseSpec::gaussian(0.02, 5), samples: 4, seed: 5, ..JobSettings::default() };
    let job = ForecastJob::new(history, target.len(), settings);
    let live = EchoTailBackend::new(2, job.horizon, ", ");
    run_nlts(&job, &RecordingBackend::new(live, &cassette).unwrap()).unwrap();

    let args = [
        "forecast",
        "--data",
        "builtin:air_passengers",
        "--noise",
        "gaussian",
        "--alpha",
        "0.02",
        "--samples",
        "4",
        "--seed",
        "5",
        "--replay",
        path(&cassette),
    ];
    let a = nlts(&args);
    let b = nlts(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let mut bytes = std::fs::read(&cassette).unwrap();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x01;
    std::fs::write(&cassette, bytes).unwrap();
    let broken = nlts(&args);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("no cassette record"));
}

#[test]
fn cost_reads_inline_usage() {
    let v = ok_json(&[
        "cost",
        "--usage",
        r#"{"prompt_tokens":2000,"completion_tokens":500}"#,
        "--model",
        "GPT-3.5-Turbo-Instruct",
    ]);
    assert!((v["cost"].as_f64().unwrap() - 0.004).abs() < 1e-12);
}

#[test]
fn cost_reads_a_forecast_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.json");
    assert!(nlts(&["forecast", "--data", "builtin:air_passengers", "--samples", "2", "--out", path(&f)])
        .status
        .success());
    let v = ok_json(&["cost", "--usage", path(&f)]);
    assert_eq!(v["model"], "gpt-3.5-turbo-instruct");
    assert!(v["cost"].as_f64().unwrap() > 0.0);
    assert_eq!(v["usage"]["requests"], 2);
}

#[test]
fn unknown_model_fails() {
    let out = nlts(&["cost", "--usage", r#"{"prompt_tokens":1}"#, "--model", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: no price for model `nope`"));
}

#[test]
fn synth_then_forecast_a_generated_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlts(&[
        "synth",
        "--kernels",
        "rbf,linear",
        "--count",
        "2",
        "--length",
        "50",
        "--holdout",
        "7",
        "--seed",
        "4",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 4);
    let v = ok_json(&["forecast", "--data", path(&dir.path().join("rbf_0000.csv")), "--samples", "1"]);
    assert_eq!(v["horizon"], 7);
    assert_eq!(v["history_len"], 43);
}

#[test]
fn bench_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(&config, r#"{"noise_levels":[0.01],"kinds":["uniform"],"settings":{"samples":2}}"#).unwrap();
    let report = dir.path().join("report");
    let out = nlts(&["bench", "--config", path(&config), "--out", path(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "results.json", "summary.md"] {
        assert!(report.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(report.join("results.csv")).unwrap();
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["Original", "0.01"]);
}

#[test]
fn theory_check_reports_the_gap() {
    let v = ok_json(&["theory-check", "--dim", "4", "--sigma", "0.2", "--draws", "20000"]);
    assert!((v["predicted_gap"].as_f64().unwrap() + 0.08).abs() < 1e-12);
    assert_eq!(v["gap_nonpositive"], true);
}

#[test]
fn bad_inputs_exit_with_one() {
    let cases: &[&[&str]] = &[
        &["forecast", "--data", "/nonexistent.csv"],
        &["forecast", "--data", "builtin:air_passengers", "--noise", "cauchy"],
        &["forecast", "--data", "builtin:air_passengers", "--backend", "replay"],
        &["synth", "--kernels", "wavelet", "--out", "/tmp/unused"],
        &["cost", "--usage", "{not json"],
    ];
    for args in cases {
        let out = nlts(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "), "{args:?}");
    }
    assert_eq!(nlts(&["forecast"]).status.code(), Some(2));
}
