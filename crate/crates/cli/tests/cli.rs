use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ttforecast::forecast::recursive_forecast;
use ttforecast::model::FittedModel;

fn ttf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttforecast")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "seed = 3\n[model]\nhidden = 4\n[train]\nepochs = 15\n";

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ttf(&["--help"])), 0);
    assert_eq!(code(&ttf(&["bench-all", "--bogus"])), 2);
    assert_eq!(code(&ttf(&["train", "--model", "ar", "--synthetic", "sine", "--lr", "0"])), 2);
    assert_eq!(code(&ttf(&["train", "--model", "ar", "--synthetic", "sine", "--lr", "1.5"])), 2);
    assert_eq!(code(&ttf(&["train", "--model", "ar"])), 2);
    assert_eq!(code(&ttf(&["train", "--model", "svm", "--synthetic", "sine"])), 2);
    assert_eq!(code(&ttf(&["train", "--synthetic", "wave:n=3", "--model", "ar"])), 2);
    assert_eq!(code(&ttf(&["train", "--data", "a.csv", "--synthetic", "sine", "--model", "ar"])), 2);
}

#[test]
fn missing_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = ttf(&["ingest", "--data", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn ingest_summarizes_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tt.csv");
    fs::write(
        &csv,
        "tmc_code,measurement_tstamp,travel_time_seconds,speed\n\
         118P04452,2021-03-01 00:10:00,30,55\n\
         118P04452,2021-03-01 00:00:00,31,54\n\
         118P04452,2021-03-01 00:05:00,,\n\
         118N05123,2021-03-01 00:00:00,12,60\n\
         118P04452,garbage,1,1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ttf(&["ingest", "--data", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["segments"], 2);
    assert_eq!(v["malformed"], 1);
    assert!(v["series"].is_null());

    let o = ttf(&[
        "ingest",
        "--data",
        csv.to_str().unwrap(),
        "--tmc",
        "118P04452",
        "--gap-policy",
        "interpolate",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["series"]["points"], 3);
    assert_eq!(v["series"]["gaps"], 1);
    assert_eq!(v["series"]["interval_seconds"], 300.0);
    let text = fs::read_to_string(out.join("series_118P04452.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,timestamp,value");
    assert!(lines[2].ends_with(",3.0500000000000000e1"), "{}", lines[2]);

    let o = ttf(&["ingest", "--data", csv.to_str().unwrap(), "--tmc", "XYZ", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("118N05123"));
}

#[test]
fn train_then_forecast_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let spec = "sine:n=300,period=16,noise=0.05";
    for model in ["ar", "arima", "gru"] {
        let o = ttf(&["train", "--config", &cfg, "--synthetic", spec, "--model", model, "--out", out_s]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let ext = if model == "gru" { "bin" } else { "json" };
        let file = out.join(format!("model_{model}.{ext}"));
        let o = ttf(&[
            "forecast",
            "--synthetic",
            spec,
            "--seed",
            "3",
            "--model-file",
            file.to_str().unwrap(),
            "--horizon",
            "4",
            "--origin",
            "200",
            "--out",
            out_s,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let printed: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();

        let loaded = FittedModel::load(&file).unwrap();
        let series = spec.parse::<ttforecast::SyntheticSpec>().unwrap().generate(3).unwrap();
        let need = ttforecast::Forecaster::window_len(&loaded);
        let expect = recursive_forecast(&loaded, &series.values()[201 - need..201], 4).unwrap();
        assert_eq!(printed, expect, "{model}");
    }
    assert!(out.join("losses_gru.csv").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("train_gru.json")).unwrap()).unwrap();
    assert_eq!(report["epochs_run"], 15);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let o = ttf(&[
        "train",
        "--config",
        &cfg,
        "--synthetic",
        "sine:n=200",
        "--model",
        "rnn",
        "--epochs",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["epochs_run"], 4);
    assert_eq!(v["seed"], 3);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[train]\nepoch = 4\n").unwrap();
    assert_eq!(code(&ttf(&["train", "--config", bad.to_str().unwrap(), "--synthetic", "sine", "--model", "ar"])), 2);
}

#[test]
fn bench_all_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut reports = Vec::new();
    for (run, mode) in [("a", "--parallel"), ("b", "--sequential")] {
        let out = dir.path().join(run);
        let o = ttf(&[
            "bench-all",
            "--config",
            &cfg,
            "--synthetic",
            "ar:phi=0.6/0.2,intercept=1,noise=0.5,n=400",
            mode,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 11);
        for m in ["ar", "arima", "rnn", "lstm", "gru"] {
            for h in [1, 5] {
                assert!(out.join(format!("forecasts_{m}_h{h}.csv")).exists());
            }
        }
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        for m in v["models"].as_array_mut().unwrap() {
            m["train_seconds"] = 0.into();
        }
        reports.push(v);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn partial_failure_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 3\n[model]\nhidden = 4\nar_order = 500\n[train]\nepochs = 15\n").unwrap();
    let out = dir.path().join("o");
    let o = ttf(&[
        "bench-all",
        "--config",
        cfg.to_str().unwrap(),
        "--synthetic",
        "sine:n=300,noise=0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["models"][0]["status"], "failed");
    assert_eq!(v["models"][1]["status"], "ok");
}

#[test]
fn sweep_rows_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("s");
    let o = ttf(&[
        "sweep-lr",
        "--config",
        &cfg,
        "--model",
        "lstm",
        "--synthetic",
        "sine:n=200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("sweep_lstm.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(stdout(&o).matches("best").count(), 1);

    let o = ttf(&[
        "sweep-lr",
        "--config",
        &cfg,
        "--model",
        "rnn",
        "--synthetic",
        "sine:n=200,amplitude=1e200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o).matches("diverged").count(), 3);

    assert_eq!(code(&ttf(&["sweep-lr", "--model", "ar", "--synthetic", "sine"])), 2);
}
