//! Five-model benchmark and learning-rate sweep, with their JSON and CSV
//! outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{rolling_multi_step_eval, ForecastEval};
use crate::metrics::ErrorScores;
use crate::model::{fit_model, fmt_real, FittedModel, ModelKind, ModelSettings};
use crate::neural::{fit_network, TrainReport};
use crate::series::{self, chronological_split, make_windows, SplitSpec, TimeSeries};

/// Learning rates tried by [`sweep_lr`] unless told otherwise.
pub const DEFAULT_SWEEP_RATES: [f64; 3] = [0.0001, 0.001, 0.01];

/// A generated benchmark signal, written as `kind:key=value,...`.
///
/// ```
/// use ttforecast::bench::SyntheticSpec;
/// let s: SyntheticSpec = "sine:n=500,period=20,noise=0.1".parse().unwrap();
/// assert_eq!(s.generate(0).unwrap().len(), 500);
/// let a: SyntheticSpec = "ar:phi=0.6/0.2,intercept=1,noise=0.5,n=300".parse().unwrap();
/// assert_eq!(a.generate(0).unwrap().len(), 300);
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticSpec {
    Sine {
        n: usize,
        period: f64,
        amplitude: f64,
        noise: f64,
    },
    Ar {
        n: usize,
        phi: Vec<f64>,
        intercept: f64,
        noise: f64,
    },
    Arma {
        n: usize,
        phi: Vec<f64>,
        theta: Vec<f64>,
        intercept: f64,
        noise: f64,
        burn_in: usize,
    },
}

impl SyntheticSpec {
    pub fn generate(&self, seed: u64) -> Result<TimeSeries> {
        match self {
            SyntheticSpec::Sine {
                n,
                period,
                amplitude,
                noise,
            } => series::gen_sine_plus_noise(*amplitude, *period, *noise, *n, seed),
            SyntheticSpec::Ar {
                n,
                phi,
                intercept,
                noise,
            } => series::gen_ar_process(phi, *intercept, *noise, *n, seed),
            SyntheticSpec::Arma {
                n,
                phi,
                theta,
                intercept,
                noise,
                burn_in,
            } => series::gen_arma_process(phi, theta, *intercept, *noise, *n, *burn_in, seed),
        }
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("synthetic spec `{s}`: {msg}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = BTreeMap::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let num = |kv: &mut BTreeMap<String, String>, key: &str, default: f64| -> Result<f64> {
            match kv.remove(key) {
                Some(v) => v.parse().map_err(|_| bad(format!("`{key}` is not a number: `{v}`"))),
                None => Ok(default),
            }
        };
        let count = |kv: &mut BTreeMap<String, String>, key: &str, default: usize| -> Result<usize> {
            match kv.remove(key) {
                Some(v) => v.parse().map_err(|_| bad(format!("`{key}` is not a count: `{v}`"))),
                None => Ok(default),
            }
        };
        let list = |kv: &mut BTreeMap<String, String>, key: &str| -> Result<Vec<f64>> {
            match kv.remove(key) {
                Some(v) if v.is_empty() => Ok(Vec::new()),
                Some(v) => v
                    .split('/')
                    .map(|x| x.trim().parse().map_err(|_| bad(format!("bad `{key}` entry `{x}`"))))
                    .collect(),
                None => Ok(Vec::new()),
            }
        };

        let spec = match kind.trim().to_ascii_lowercase().as_str() {
            "sine" => SyntheticSpec::Sine {
                n: count(&mut kv, "n", 500)?,
                period: num(&mut kv, "period", 20.0)?,
                amplitude: num(&mut kv, "amplitude", 1.0)?,
                noise: num(&mut kv, "noise", 0.0)?,
            },
            "ar" => SyntheticSpec::Ar {
                n: count(&mut kv, "n", 2000)?,
                phi: list(&mut kv, "phi")?,
                intercept: num(&mut kv, "intercept", 0.0)?,
                noise: num(&mut kv, "noise", 1.0)?,
            },
            "arma" => SyntheticSpec::Arma {
                n: count(&mut kv, "n", 2000)?,
                phi: list(&mut kv, "phi")?,
                theta: list(&mut kv, "theta")?,
                intercept: num(&mut kv, "intercept", 0.0)?,
                noise: num(&mut kv, "noise", 1.0)?,
                burn_in: count(&mut kv, "burn_in", 200)?,
            },
            other => return Err(bad(format!("unknown generator `{other}` (sine, ar, arma)"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(bad(format!("unknown key `{k}`")));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub settings: ModelSettings,
    pub split: SplitSpec,
    /// Horizon 1 is scored teacher-forced; longer horizons by rolling
    /// recursive forecasts.
    pub horizons: Vec<usize>,
    pub models: Vec<ModelKind>,
    /// Train the models on separate threads.
    pub parallel: bool,
    /// Per-model learning rates for the networks.
    #[serde(default)]
    pub lr_overrides: BTreeMap<ModelKind, f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            settings: ModelSettings::default(),
            split: SplitSpec::default(),
            horizons: vec![1, 5],
            models: ModelKind::ALL.to_vec(),
            parallel: true,
            lr_overrides: BTreeMap::new(),
        }
    }
}

impl BenchConfig {
    pub fn settings_for(&self, kind: ModelKind) -> ModelSettings {
        let mut s = self.settings.clone();
        if let Some(&lr) = self.lr_overrides.get(&kind) {
            s.train.learning_rate = lr;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

impl RunStatus {
    fn of(e: &Error) -> Self {
        match e {
            Error::Diverged { .. } => RunStatus::Diverged,
            _ => RunStatus::Failed,
        }
    }
}

/// One cell group of the metric table. Scores are `None` when the model
/// failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonScores {
    pub horizon: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub rank_mae: Option<usize>,
    pub rank_rmse: Option<usize>,
    pub per_step: Vec<ErrorScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub status: RunStatus,
    pub error: Option<String>,
    pub train_seconds: f64,
    pub epochs_run: Option<usize>,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub horizons: Vec<HorizonScores>,
    #[serde(skip)]
    pub evals: Vec<ForecastEval>,
    #[serde(skip)]
    pub training: Option<TrainReport>,
    #[serde(skip)]
    pub fitted: Option<FittedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: String,
    pub seed: u64,
    pub series_len: usize,
    pub train_len: usize,
    pub val_len: usize,
    pub window: usize,
    pub horizons: Vec<usize>,
    pub models: Vec<ModelResult>,
}

impl BenchReport {
    pub fn result(&self, kind: ModelKind) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.model == kind)
    }

    pub fn scores(&self, kind: ModelKind, horizon: usize) -> Option<&HorizonScores> {
        self.result(kind)?.horizons.iter().find(|h| h.horizon == horizon)
    }

    /// Number of (model, horizon, metric) cells, filled or not.
    pub fn score_count(&self) -> usize {
        self.models.iter().map(|m| m.horizons.len() * 2).sum()
    }

    pub fn failures(&self) -> usize {
        self.models.iter().filter(|m| m.status != RunStatus::Ok).count()
    }

    /// The report with wall-time fields zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for m in &mut r.models {
            m.train_seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn run_one(kind: ModelKind, train: &TimeSeries, val: &TimeSeries, cfg: &BenchConfig) -> ModelResult {
    let settings = cfg.settings_for(kind);
    let started = Instant::now();
    let fitted = fit_model(kind, train, val, &settings).and_then(|(model, report)| {
        let evals = cfg
            .horizons
            .iter()
            .map(|&k| rolling_multi_step_eval(&model, val, settings.window, k))
            .collect::<Result<Vec<_>>>()?;
        Ok((model, report, evals))
    });
    let train_seconds = started.elapsed().as_secs_f64();
    match fitted {
        Ok((model, report, evals)) => {
            let training = report.training;
            ModelResult {
                model: kind,
                status: RunStatus::Ok,
                error: None,
                train_seconds,
                epochs_run: training.as_ref().map(TrainReport::epochs_run),
                final_train_loss: training.as_ref().and_then(|t| t.train_loss_curve.last().copied()),
                final_val_loss: training.as_ref().map(TrainReport::final_val_loss),
                horizons: evals
                    .iter()
                    .map(|e| HorizonScores {
                        horizon: e.horizon,
                        mae: Some(e.mae),
                        rmse: Some(e.rmse),
                        rank_mae: None,
                        rank_rmse: None,
                        per_step: e.per_step.clone(),
                    })
                    .collect(),
                evals,
                training,
                fitted: Some(model),
            }
        }
        Err(e) => ModelResult {
            model: kind,
            status: RunStatus::of(&e),
            error: Some(e.to_string()),
            train_seconds,
            epochs_run: None,
            final_train_loss: None,
            final_val_loss: None,
            horizons: cfg
                .horizons
                .iter()
                .map(|&h| HorizonScores {
                    horizon: h,
                    mae: None,
                    rmse: None,
                    rank_mae: None,
                    rank_rmse: None,
                    per_step: Vec::new(),
                })
                .collect(),
            evals: Vec::new(),
            training: None,
            fitted: None,
        },
    }
}

/// Competition ranks (1 = lowest); ties share the smaller rank.
fn ranks(values: &[Option<f64>]) -> Vec<Option<usize>> {
    values
        .iter()
        .map(|v| v.map(|x| 1 + values.iter().flatten().filter(|&&y| y < x).count()))
        .collect()
}

/// Trains every configured model on the chronological training segment and
/// scores each horizon on the validation segment. A failing model is
/// recorded and does not affect the others.
pub fn run_bench(series: &TimeSeries, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.horizons.is_empty() || cfg.horizons.contains(&0) {
        return Err(Error::InvalidArgument("horizons must be non-empty and positive".into()));
    }
    if cfg.models.is_empty() {
        return Err(Error::InvalidArgument("no models selected".into()));
    }
    let (train, val) = chronological_split(series, cfg.split)?;

    let mut models: Vec<ModelResult> = if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .models
                .iter()
                .map(|&kind| {
                    let (train, val) = (&train, &val);
                    scope.spawn(move || run_one(kind, train, val, cfg))
                })
                .collect();
            handles
                .into_iter()
                .zip(&cfg.models)
                .map(|(h, &kind)| {
                    h.join().unwrap_or_else(|_| ModelResult {
                        model: kind,
                        status: RunStatus::Failed,
                        error: Some("training thread panicked".into()),
                        train_seconds: 0.0,
                        epochs_run: None,
                        final_train_loss: None,
                        final_val_loss: None,
                        horizons: Vec::new(),
                        evals: Vec::new(),
                        training: None,
                        fitted: None,
                    })
                })
                .collect()
        })
    } else {
        cfg.models.iter().map(|&kind| run_one(kind, &train, &val, cfg)).collect()
    };

    for (i, _) in cfg.horizons.iter().enumerate() {
        let maes: Vec<Option<f64>> = models.iter().map(|m| m.horizons.get(i).and_then(|h| h.mae)).collect();
        let rmses: Vec<Option<f64>> = models.iter().map(|m| m.horizons.get(i).and_then(|h| h.rmse)).collect();
        for ((m, rm), rr) in models.iter_mut().zip(ranks(&maes)).zip(ranks(&rmses)) {
            if let Some(h) = m.horizons.get_mut(i) {
                h.rank_mae = rm;
                h.rank_rmse = rr;
            }
        }
    }

    Ok(BenchReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.settings.train.seed,
        series_len: series.len(),
        train_len: train.len(),
        val_len: val.len(),
        window: cfg.settings.window,
        horizons: cfg.horizons.clone(),
        models,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    })
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn opt_count(v: Option<usize>) -> String {
    v.map(|r| r.to_string()).unwrap_or_default()
}

/// Writes `report.json`, `metrics.csv`, `forecasts_<model>_h<k>.csv` and
/// `losses_<model>.csv` into `dir`, creating it if needed.
pub fn write_bench_outputs(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    fs::write(&json_path, report.to_json()? + "\n").map_err(|e| Error::io(&json_path, e))?;

    let mut w = csv_writer(&dir.join("metrics.csv"))?;
    w.write_record(["model", "horizon", "mae", "rmse", "rank_mae", "rank_rmse", "train_seconds"])?;
    for m in &report.models {
        for h in &m.horizons {
            w.write_record([
                m.model.name().to_string(),
                h.horizon.to_string(),
                opt_real(h.mae),
                opt_real(h.rmse),
                opt_count(h.rank_mae),
                opt_count(h.rank_rmse),
                fmt_real(m.train_seconds),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    for m in &report.models {
        for e in &m.evals {
            write_forecast_csv(e, &dir.join(format!("forecasts_{}_h{}.csv", m.model.slug(), e.horizon)))?;
        }
        if let Some(t) = &m.training {
            write_loss_csv(t, &dir.join(format!("losses_{}.csv", m.model.slug())))?;
        }
    }
    Ok(())
}

/// `origin_index, horizon, prediction, actual`, one row per pair.
pub fn write_forecast_csv(eval: &ForecastEval, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["origin_index", "horizon", "prediction", "actual"])?;
    for i in 0..eval.predictions.len() {
        w.write_record([
            eval.origins[i].to_string(),
            eval.steps[i].to_string(),
            fmt_real(eval.predictions[i]),
            fmt_real(eval.actuals[i]),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `epoch, train_loss, val_loss`, epochs counted from 1.
pub fn write_loss_csv(report: &TrainReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for (i, (t, v)) in report.train_loss_curve.iter().zip(&report.val_loss_curve).enumerate() {
        w.write_record([(i + 1).to_string(), fmt_real(*t), fmt_real(*v)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub learning_rate: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub epochs_run: usize,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    /// First epoch (from 1) whose training loss is at or below the sweep's
    /// target.
    pub epochs_to_target: Option<usize>,
    pub wall_seconds: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model: ModelKind,
    pub train_loss_target: Option<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.best)
    }

    pub fn row(&self, lr: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.learning_rate == lr)
    }

    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.status != RunStatus::Ok)
    }

    /// `learning_rate, status, epochs_run, final_train_loss, final_val_loss,
    /// epochs_to_target, wall_seconds, best`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record([
            "learning_rate",
            "status",
            "epochs_run",
            "final_train_loss",
            "final_val_loss",
            "epochs_to_target",
            "wall_seconds",
            "best",
        ])?;
        for r in &self.rows {
            w.write_record([
                fmt_real(r.learning_rate),
                format!("{:?}", r.status).to_lowercase(),
                r.epochs_run.to_string(),
                opt_real(r.final_train_loss),
                opt_real(r.final_val_loss),
                opt_count(r.epochs_to_target),
                fmt_real(r.wall_seconds),
                r.best.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Trains one network per learning rate from the same initialization and
/// flags the rate with the lowest final validation loss. Rates run on
/// separate threads when `parallel` is set.
pub fn sweep_lr(
    kind: ModelKind,
    series: &TimeSeries,
    split: SplitSpec,
    settings: &ModelSettings,
    rates: &[f64],
    train_loss_target: Option<f64>,
    parallel: bool,
) -> Result<SweepReport> {
    let cell = kind
        .cell_kind()
        .ok_or_else(|| Error::InvalidArgument(format!("learning-rate sweep needs a network, got {kind}")))?;
    if rates.is_empty() {
        return Err(Error::InvalidArgument("no learning rates given".into()));
    }
    let (train, val) = chronological_split(series, split)?;
    let scaler = if settings.scale { Some(series::fit_scaler(&train)?) } else { None };
    let (train, val) = match scaler {
        Some(s) => (s.apply_series(&train), s.apply_series(&val)),
        None => (train, val),
    };
    let train_w = make_windows(&train, settings.window)?;
    let val_w = make_windows(&val, settings.window)?;
    let net = settings.network(cell);

    let run = |lr: f64| -> SweepRow {
        let mut tc = settings.train;
        tc.learning_rate = lr;
        let started = Instant::now();
        let out = fit_network(net, &train_w, &val_w, &tc);
        let wall_seconds = started.elapsed().as_secs_f64();
        match out {
            Ok(r) => SweepRow {
                learning_rate: lr,
                status: RunStatus::Ok,
                error: None,
                epochs_run: r.epochs_run(),
                final_train_loss: r.train_loss_curve.last().copied(),
                final_val_loss: Some(r.final_val_loss()),
                epochs_to_target: train_loss_target
                    .and_then(|t| r.train_loss_curve.iter().position(|&l| l <= t).map(|i| i + 1)),
                wall_seconds,
                best: false,
            },
            Err(e) => SweepRow {
                learning_rate: lr,
                status: RunStatus::of(&e),
                error: Some(e.to_string()),
                epochs_run: match e {
                    Error::Diverged { epoch, .. } => epoch,
                    _ => 0,
                },
                final_train_loss: None,
                final_val_loss: None,
                epochs_to_target: None,
                wall_seconds,
                best: false,
            },
        }
    };

    let mut rows: Vec<SweepRow> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = rates.iter().map(|&lr| scope.spawn(move || run(lr))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
        })
    } else {
        rates.iter().map(|&lr| run(lr)).collect()
    };

    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.final_val_loss.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    if let Some(i) = best {
        rows[i].best = true;
    }
    Ok(SweepReport {
        model: kind,
        train_loss_target,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::TrainConfig;

    fn quick() -> BenchConfig {
        let mut cfg = BenchConfig::default();
        cfg.settings.n_hidden = 4;
        cfg.settings.train = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        cfg
    }

    fn signal() -> TimeSeries {
        "ar:phi=0.6/0.2,intercept=1,noise=0.5,n=300".parse::<SyntheticSpec>().unwrap().generate(2).unwrap()
    }

    #[test]
    fn parse_specs() {
        let s: SyntheticSpec = "sine:n=100,period=12.5,amplitude=2,noise=0.1".parse().unwrap();
        assert_eq!(
            s,
            SyntheticSpec::Sine {
                n: 100,
                period: 12.5,
                amplitude: 2.0,
                noise: 0.1
            }
        );
        let a: SyntheticSpec = "arma:phi=0.5,theta=0.3/-0.1,n=50".parse().unwrap();
        assert!(matches!(a, SyntheticSpec::Arma { ref theta, .. } if theta == &[0.3, -0.1]));
        assert!("walk:n=5".parse::<SyntheticSpec>().is_err());
        assert!("sine:n=ten".parse::<SyntheticSpec>().is_err());
        assert!("sine:colour=red".parse::<SyntheticSpec>().is_err());
        assert!("sine:n".parse::<SyntheticSpec>().is_err());
    }

    #[test]
    fn ranks_handle_ties_and_gaps() {
        assert_eq!(
            ranks(&[Some(2.0), None, Some(1.0), Some(2.0)]),
            vec![Some(2), None, Some(1), Some(2)]
        );
    }

    #[test]
    fn report_has_twenty_scores() {
        let r = run_bench(&signal(), &quick()).unwrap();
        assert_eq!(r.models.len(), 5);
        assert_eq!(r.score_count(), 20);
        assert_eq!(r.failures(), 0);
        for h in [1, 5] {
            let mut seen: Vec<usize> = ModelKind::ALL.iter().map(|&k| r.scores(k, h).unwrap().rank_mae.unwrap()).collect();
            seen.sort();
            assert_eq!(seen[0], 1);
        }
    }

    #[test]
    fn failure_is_isolated() {
        let mut cfg = quick();
        cfg.parallel = false;
        let clean = run_bench(&signal(), &cfg).unwrap();
        cfg.settings.ar_order = 400;
        let broken = run_bench(&signal(), &cfg).unwrap();
        assert_eq!(broken.result(ModelKind::Ar).unwrap().status, RunStatus::Failed);
        assert_eq!(broken.score_count(), 20);
        for k in &ModelKind::ALL[1..] {
            assert_eq!(broken.scores(*k, 1).unwrap().mae, clean.scores(*k, 1).unwrap().mae);
        }
    }

    #[test]
    fn outputs_written() {
        let r = run_bench(&signal(), &quick()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bench_outputs(&r, dir.path()).unwrap();
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(metrics.starts_with("model,horizon,mae,rmse,rank_mae,rank_rmse,train_seconds\n"));
        assert_eq!(metrics.lines().count(), 11);
        assert!(dir.path().join("forecasts_gru_h5.csv").exists());
        assert!(dir.path().join("losses_lstm.csv").exists());
        assert!(!dir.path().join("losses_ar.csv").exists());
        let back: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back["models"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn sweep_rows_and_best() {
        let settings = quick().settings;
        let s = signal();
        let r = sweep_lr(ModelKind::Gru, &s, SplitSpec::default(), &settings, &DEFAULT_SWEEP_RATES, Some(1e9), true).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows.iter().filter(|x| x.best).count(), 1);
        assert!(r.rows.iter().all(|x| x.epochs_to_target == Some(1)));
        assert!(sweep_lr(ModelKind::Ar, &s, SplitSpec::default(), &settings, &[0.1], None, false).is_err());
    }
}
