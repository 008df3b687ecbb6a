//! `ttforecast` command line.
//!
//! Settings come from three layers, later ones winning: built-in defaults,
//! the TOML file given with `--config`, then command-line flags.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O or data error, 4 training
//! diverged, 5 some benchmark models failed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use ttforecast::bench::{self, BenchConfig, RunStatus, SyntheticSpec, DEFAULT_SWEEP_RATES};
use ttforecast::forecast::{recursive_forecast, rolling_multi_step_eval, Forecaster};
use ttforecast::ingest::{self, ColumnMapping, GapPolicy, ValueField};
use ttforecast::model::{fit_model, fmt_real, FittedModel, ModelKind, ModelSettings};
use ttforecast::{Error, SplitSpec, TimeSeries};

pub mod config;

pub use config::FileConfig;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::Diverged { .. } => EXIT_DIVERGED,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ttforecast", version, about = "Travel-time forecasting with AR, ARIMA, RNN, LSTM and GRU models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a TMC CSV file, summarize it and optionally export one segment
    Ingest(CommonArgs),
    /// Fit one model, save it and write its loss curve and scores
    Train(CommonArgs),
    /// Fit all five models and write the comparison tables
    BenchAll(CommonArgs),
    /// Train one network at several learning rates
    SweepLr(SweepArgs),
    /// Load a saved model and forecast k steps ahead
    Forecast(ForecastArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML settings file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// TMC travel-time CSV file
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generated series, e.g. `sine:n=500,period=20,noise=0.1`
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Segment code to extract from --data
    #[arg(long)]
    pub tmc: Option<String>,
    /// Column overrides as key=column (tmc, timestamp, travel_time, speed)
    #[arg(long, value_delimiter = ',')]
    pub schema: Vec<String>,
    /// Value column to model: travel_time or speed
    #[arg(long)]
    pub field: Option<String>,
    /// forward_fill, drop or interpolate
    #[arg(long)]
    pub gap_policy: Option<String>,
    /// ar, arima, rnn, lstm or gru
    #[arg(long)]
    pub model: Option<String>,
    /// Input window length T
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate in (0, 1]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Longest forecast horizon scored
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, overrides_with = "sequential")]
    pub parallel: bool,
    #[arg(long, overrides_with = "parallel")]
    pub sequential: bool,
    /// Z-score inputs with training statistics
    #[arg(long)]
    pub scale: bool,
    /// Training fraction of the chronological split
    #[arg(long)]
    pub split: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Learning rates to try (default 0.0001,0.001,0.01)
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    /// Training loss whose first crossing is reported per rate
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Saved model file
    #[arg(long)]
    pub model_file: PathBuf,
    /// Index of the last observed value used as the seed window (default: last)
    #[arg(long)]
    pub origin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

/// All settings after merging defaults, the config file and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub source: Option<DataSource>,
    pub tmc: Option<String>,
    pub schema: ColumnMapping,
    /// `key=column` overrides from the config file.
    pub schema_pairs: Vec<String>,
    pub field: ValueField,
    pub gap_policy: GapPolicy,
    pub model: Option<ModelKind>,
    pub bench: BenchConfig,
    pub horizon: usize,
    pub out: PathBuf,
    pub rates: Vec<f64>,
    pub target: Option<f64>,
}

impl Resolved {
    pub fn seed(&self) -> u64 {
        self.bench.settings.train.seed
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.bench.settings
    }
}

fn parse_with<T: std::str::FromStr<Err = Error>>(value: &str) -> CliResult<T> {
    value.parse().map_err(CliError::from)
}

pub fn resolve(args: &CommonArgs) -> CliResult<Resolved> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut r = Resolved {
        source: None,
        tmc: None,
        schema: ColumnMapping::default(),
        schema_pairs: Vec::new(),
        field: ValueField::TravelTime,
        gap_policy: GapPolicy::default(),
        model: None,
        bench: BenchConfig::default(),
        horizon: 5,
        out: PathBuf::from("out"),
        rates: DEFAULT_SWEEP_RATES.to_vec(),
        target: None,
    };
    file.apply(&mut r)?;

    if let Some(p) = &args.data {
        r.source = Some(DataSource::File(p.clone()));
    }
    if let Some(s) = &args.synthetic {
        r.source = Some(DataSource::Synthetic(parse_with(s)?));
    }
    if let Some(t) = &args.tmc {
        r.tmc = Some(t.clone());
    }
    // Config-file pairs come first so flag pairs override them.
    let pairs: Vec<&str> = r.schema_pairs.iter().chain(&args.schema).map(String::as_str).collect();
    r.schema = ColumnMapping::from_pairs(pairs).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(f) = &args.field {
        r.field = parse_with(f)?;
    }
    if let Some(g) = &args.gap_policy {
        r.gap_policy = parse_with(g)?;
    }
    if let Some(m) = &args.model {
        r.model = Some(parse_with(m)?);
    }
    let s = &mut r.bench.settings;
    if let Some(w) = args.window {
        s.window = w;
    }
    if let Some(e) = args.epochs {
        s.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        s.train.learning_rate = lr;
    }
    if let Some(seed) = args.seed {
        s.train.seed = seed;
    }
    if args.scale {
        s.scale = true;
    }
    if let Some(h) = args.horizon {
        r.horizon = h;
    }
    if let Some(o) = &args.out {
        r.out = o.clone();
    }
    if args.parallel {
        r.bench.parallel = true;
    }
    if args.sequential {
        r.bench.parallel = false;
    }
    if let Some(f) = args.split {
        r.bench.split = SplitSpec::new(f).map_err(|e| CliError::usage(e.to_string()))?;
    }
    validate(&r)?;
    Ok(r)
}

fn validate(r: &Resolved) -> CliResult<()> {
    let s = &r.bench.settings;
    let lr = s.train.learning_rate;
    if !(lr > 0.0 && lr <= 1.0) {
        return Err(CliError::usage(format!("--lr must be in (0, 1], got {lr}")));
    }
    if s.window == 0 {
        return Err(CliError::usage("--window must be at least 1"));
    }
    if s.train.epochs == 0 {
        return Err(CliError::usage("--epochs must be at least 1"));
    }
    if r.horizon == 0 {
        return Err(CliError::usage("--horizon must be at least 1"));
    }
    if r.rates.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return Err(CliError::usage("learning rates must be in (0, 1]"));
    }
    Ok(())
}

/// Loads the configured series, cleaning gaps in file data.
pub fn load_series(r: &Resolved) -> CliResult<TimeSeries> {
    match &r.source {
        None => Err(CliError::usage("no input: pass --data or --synthetic")),
        Some(DataSource::Synthetic(spec)) => Ok(spec.generate(r.seed())?),
        Some(DataSource::File(path)) => {
            let loaded = ingest::load_records(path, &r.schema)?;
            let code = pick_code(r, &loaded)?;
            let raw = ingest::extract_series(&loaded.records, &code, r.field, 1)?;
            Ok(ingest::clean_gaps(&raw, r.gap_policy)?)
        }
    }
}

fn pick_code(r: &Resolved, loaded: &ingest::LoadedRecords) -> CliResult<String> {
    if let Some(c) = &r.tmc {
        return Ok(c.clone());
    }
    let codes = loaded.codes();
    match codes.len() {
        1 => Ok(codes.into_iter().next().unwrap_or_default().to_string()),
        0 => Err(CliError::data("the file holds no valid records")),
        n => Err(CliError::usage(format!(
            "the file holds {n} segments; choose one with --tmc (e.g. {})",
            codes.iter().take(5).copied().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::data(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::data(e.to_string())
}

pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&resolve(&a)?),
        Command::Train(a) => cmd_train(&resolve(&a)?),
        Command::BenchAll(a) => cmd_bench_all(&resolve(&a)?),
        Command::SweepLr(a) => {
            let mut r = resolve(&a.common)?;
            if !a.rates.is_empty() {
                r.rates = a.rates.clone();
            }
            if a.target.is_some() {
                r.target = a.target;
            }
            validate(&r)?;
            cmd_sweep_lr(&r)
        }
        Command::Forecast(a) => cmd_forecast(&resolve(&a.common)?, &a.model_file, a.origin),
    }
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    rows: usize,
    records: usize,
    malformed: usize,
    segments: usize,
    codes: Vec<String>,
    mapped: BTreeMap<String, String>,
    passthrough: Vec<String>,
    series: Option<SeriesSummary>,
}

#[derive(Debug, Serialize)]
struct SeriesSummary {
    tmc: String,
    field: ValueField,
    points: usize,
    gaps: usize,
    gap_policy: String,
    cleaned_points: usize,
    interval_seconds: Option<f64>,
    file: PathBuf,
}

pub fn cmd_ingest(r: &Resolved) -> CliResult<i32> {
    let path = match &r.source {
        Some(DataSource::File(p)) => p,
        _ => return Err(CliError::usage("ingest needs --data")),
    };
    let loaded = ingest::load_records(path, &r.schema)?;
    let codes = loaded.codes();
    let mut summary = IngestSummary {
        rows: loaded.rows,
        records: loaded.records.len(),
        malformed: loaded.malformed,
        segments: codes.len(),
        codes: codes.iter().take(20).map(|c| c.to_string()).collect(),
        mapped: loaded.mapped.iter().cloned().collect(),
        passthrough: loaded.passthrough.clone(),
        series: None,
    };

    if r.tmc.is_some() || codes.len() == 1 {
        let code = pick_code(r, &loaded)?;
        let ex = ingest::extract_series_with_times(&loaded.records, &code, r.field, 1)?;
        let cleaned = ingest::clean_gaps(&ex.series, r.gap_policy)?;
        let times: Vec<String> = if r.gap_policy == GapPolicy::Drop {
            ex.timestamps
                .iter()
                .zip(ex.series.values())
                .filter(|(_, v)| !v.is_nan())
                .map(|(t, _)| t.to_string())
                .collect()
        } else {
            ex.timestamps.iter().map(|t| t.to_string()).collect()
        };
        let file = r.out.join(format!("series_{}.csv", sanitize(&code)));
        fs::create_dir_all(&r.out).map_err(|e| io_err(&r.out, e))?;
        let mut w = csv::Writer::from_path(&file).map_err(csv_err)?;
        w.write_record(["index", "timestamp", "value"]).map_err(csv_err)?;
        for (i, (t, v)) in times.iter().zip(cleaned.values()).enumerate() {
            w.write_record([i.to_string(), t.clone(), fmt_real(*v)]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(&file, e))?;
        summary.series = Some(SeriesSummary {
            tmc: code,
            field: r.field,
            points: ex.series.len(),
            gaps: ex.series.gap_count(),
            gap_policy: r.gap_policy.to_string(),
            cleaned_points: cleaned.len(),
            interval_seconds: ex.series.sample_interval.map(|d| d.as_secs_f64()),
            file,
        });
    }
    print!("{}", to_json(&summary)?);
    Ok(0)
}

fn sanitize(code: &str) -> String {
    code.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '+' { c } else { '_' }).collect()
}

/// File name a trained model is saved under.
pub fn model_file_name(kind: ModelKind) -> String {
    if kind.is_neural() {
        format!("model_{}.bin", kind.slug())
    } else {
        format!("model_{}.json", kind.slug())
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    model: ModelKind,
    seed: u64,
    model_file: PathBuf,
    train_seconds: f64,
    epochs_run: Option<usize>,
    final_train_loss: Option<f64>,
    final_val_loss: Option<f64>,
    scores: Vec<ScoreLine>,
}

#[derive(Debug, Serialize)]
struct ScoreLine {
    horizon: usize,
    mae: f64,
    rmse: f64,
}

pub fn cmd_train(r: &Resolved) -> CliResult<i32> {
    let kind = r.model.ok_or_else(|| CliError::usage("train needs --model"))?;
    let series = load_series(r)?;
    let (train, val) = ttforecast::chronological_split(&series, r.bench.split)?;
    let settings = r.bench.settings_for(kind);
    let (model, report) = fit_model(kind, &train, &val, &settings)?;

    fs::create_dir_all(&r.out).map_err(|e| io_err(&r.out, e))?;
    let model_file = r.out.join(model_file_name(kind));
    model.save(&model_file)?;
    if let Some(t) = &report.training {
        bench::write_loss_csv(t, &r.out.join(format!("losses_{}.csv", kind.slug())))?;
    }
    let mut horizons = vec![1];
    if r.horizon > 1 {
        horizons.push(r.horizon);
    }
    let mut scores = Vec::new();
    for k in horizons {
        let e = rolling_multi_step_eval(&model, &val, settings.window, k)?;
        bench::write_forecast_csv(&e, &r.out.join(format!("forecasts_{}_h{k}.csv", kind.slug())))?;
        scores.push(ScoreLine {
            horizon: k,
            mae: e.mae,
            rmse: e.rmse,
        });
    }
    let t = report.training.as_ref();
    let summary = TrainSummary {
        model: kind,
        seed: r.seed(),
        model_file,
        train_seconds: report.wall_time.as_secs_f64(),
        epochs_run: t.map(|t| t.epochs_run()),
        final_train_loss: t.and_then(|t| t.train_loss_curve.last().copied()),
        final_val_loss: t.map(|t| t.final_val_loss()),
        scores,
    };
    let text = to_json(&summary)?;
    write_text(&r.out.join(format!("train_{}.json", kind.slug())), &text)?;
    print!("{text}");
    Ok(0)
}

/// Plain-text metric table, best first within each horizon.
pub fn format_metric_table(report: &bench::BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:>3} {:>14} {:>14} {:>4} {:>4} {:>10}", "model", "h", "mae", "rmse", "#mae", "#rmse", "seconds");
    for &h in &report.horizons {
        let mut rows: Vec<_> = report.models.iter().filter_map(|m| Some((m, m.horizons.iter().find(|x| x.horizon == h)?))).collect();
        rows.sort_by_key(|(_, x)| x.rank_mae.unwrap_or(usize::MAX));
        for (m, x) in rows {
            match (x.mae, x.rmse) {
                (Some(a), Some(b)) => {
                    let _ = writeln!(
                        s,
                        "{:<6} {:>3} {:>14.6} {:>14.6} {:>4} {:>4} {:>10.2}",
                        m.model.name(),
                        h,
                        a,
                        b,
                        x.rank_mae.unwrap_or(0),
                        x.rank_rmse.unwrap_or(0),
                        m.train_seconds
                    );
                }
                _ => {
                    let _ = writeln!(
                        s,
                        "{:<6} {:>3} {:>14} {:>14} {:>4} {:>4} {:>10.2}",
                        m.model.name(),
                        h,
                        "failed",
                        "-",
                        "-",
                        "-",
                        m.train_seconds
                    );
                }
            }
        }
    }
    s
}

pub fn cmd_bench_all(r: &Resolved) -> CliResult<i32> {
    let series = load_series(r)?;
    let mut cfg = r.bench.clone();
    let mut horizons = vec![1];
    if r.horizon > 1 {
        horizons.push(r.horizon);
    }
    cfg.horizons = horizons;
    let report = bench::run_bench(&series, &cfg)?;
    bench::write_bench_outputs(&report, &r.out)?;
    print!("{}", format_metric_table(&report));
    for m in report.models.iter().filter(|m| m.status != RunStatus::Ok) {
        eprintln!("{} {:?}: {}", m.model, m.status, m.error.as_deref().unwrap_or(""));
    }
    Ok(match report.failures() {
        0 => 0,
        n if n == report.models.len() && report.models.iter().all(|m| m.status == RunStatus::Diverged) => EXIT_DIVERGED,
        _ => EXIT_PARTIAL,
    })
}

pub fn cmd_sweep_lr(r: &Resolved) -> CliResult<i32> {
    let kind = r.model.unwrap_or(ModelKind::Lstm);
    if !kind.is_neural() {
        return Err(CliError::usage(format!("sweep-lr needs a network model, got {kind}")));
    }
    let series = load_series(r)?;
    let report = bench::sweep_lr(
        kind,
        &series,
        r.bench.split,
        &r.bench.settings,
        &r.rates,
        r.target,
        r.bench.parallel,
    )?;
    fs::create_dir_all(&r.out).map_err(|e| io_err(&r.out, e))?;
    report.write_csv(&r.out.join(format!("sweep_{}.csv", kind.slug())))?;
    write_text(&r.out.join(format!("sweep_{}.json", kind.slug())), &to_json(&report)?)?;
    println!("{:>10} {:>9} {:>7} {:>14} {:>8} {:>9}", "lr", "status", "epochs", "val_loss", "to_target", "seconds");
    for row in &report.rows {
        println!(
            "{:>10} {:>9} {:>7} {:>14} {:>8} {:>9.2}{}",
            row.learning_rate,
            format!("{:?}", row.status).to_lowercase(),
            row.epochs_run,
            row.final_val_loss.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into()),
            row.epochs_to_target.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            row.wall_seconds,
            if row.best { "  best" } else { "" }
        );
    }
    Ok(if report.all_failed() { EXIT_DIVERGED } else { 0 })
}

pub fn cmd_forecast(r: &Resolved, model_file: &Path, origin: Option<usize>) -> CliResult<i32> {
    let model = FittedModel::load(model_file)?;
    let series = load_series(r)?;
    let v = series.values();
    let need = model.window_len();
    let origin = origin.unwrap_or(v.len() - 1);
    if origin >= v.len() || origin + 1 < need {
        return Err(CliError::usage(format!(
            "origin {origin} needs {need} values at or before it in a series of {}",
            v.len()
        )));
    }
    let seed = &v[origin + 1 - need..=origin];
    let preds = recursive_forecast(&model, seed, r.horizon)?;

    let file = r.out.join(format!("forecast_{}.csv", model.kind.slug()));
    fs::create_dir_all(&r.out).map_err(|e| io_err(&r.out, e))?;
    let mut w = csv::Writer::from_path(&file).map_err(csv_err)?;
    w.write_record(["origin_index", "horizon", "prediction", "actual"]).map_err(csv_err)?;
    println!("step,prediction");
    for (i, p) in preds.iter().enumerate() {
        let actual = v.get(origin + 1 + i).map(|a| fmt_real(*a)).unwrap_or_default();
        w.write_record([origin.to_string(), (i + 1).to_string(), fmt_real(*p), actual]).map_err(csv_err)?;
        println!("{},{}", i + 1, fmt_real(*p));
    }
    w.flush().map_err(|e| io_err(&file, e))?;
    Ok(0)
}
