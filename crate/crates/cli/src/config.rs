//! TOML settings file.
//!
//! ```toml
//! seed = 0
//! out = "results"
//! horizon = 5
//!
//! [data]
//! path = "segments.csv"        # or: synthetic = "sine:n=500,period=20"
//! tmc = "118P04452"
//! field = "travel_time"
//! gap_policy = "interpolate"
//! split = 0.8
//!
//! [data.schema]
//! timestamp = "tstamp"
//!
//! [model]
//! kind = "lstm"
//! window = 10
//! hidden = 25
//! layers = 2
//! ar_order = 10
//! arma = { p = 10, q = 5, d = 0, long_ar_order = 20 }
//! scale = false
//! ridge_fallback = false
//!
//! [train]
//! epochs = 5000
//! lr = 0.001
//! optimizer = "adam"
//! clip_norm = 5.0
//!
//! [bench]
//! parallel = true
//! models = ["ar", "arima", "rnn", "lstm", "gru"]
//! lr = { gru = 0.01 }
//!
//! [sweep]
//! rates = [0.0001, 0.001, 0.01]
//! target = 0.005
//! ```
//!
//! Every key is optional. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use ttforecast::model::ModelKind;
use ttforecast::neural::Optimizer;
use ttforecast::{ArmaSpec, SplitSpec};

use crate::{CliError, DataSource, Resolved};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub synthetic: Option<String>,
    pub tmc: Option<String>,
    pub field: Option<String>,
    pub gap_policy: Option<String>,
    pub split: Option<f64>,
    #[serde(default)]
    pub schema: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<String>,
    pub window: Option<usize>,
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub ar_order: Option<usize>,
    pub arma: Option<ArmaSection>,
    pub scale: Option<bool>,
    pub ridge_fallback: Option<bool>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmaSection {
    pub p: usize,
    pub q: usize,
    #[serde(default)]
    pub d: usize,
    pub long_ar_order: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub optimizer: Option<String>,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub parallel: Option<bool>,
    pub models: Option<Vec<String>>,
    #[serde(default)]
    pub lr: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub rates: Option<Vec<f64>>,
    pub target: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(e.to_string()))
    }

    pub(crate) fn apply(&self, r: &mut Resolved) -> Result<(), CliError> {
        let usage = |e: ttforecast::Error| CliError::usage(e.to_string());
        let d = &self.data;
        if d.path.is_some() && d.synthetic.is_some() {
            return Err(CliError::usage("config sets both data.path and data.synthetic"));
        }
        if let Some(p) = &d.path {
            r.source = Some(DataSource::File(p.clone()));
        }
        if let Some(s) = &d.synthetic {
            r.source = Some(DataSource::Synthetic(s.parse().map_err(usage)?));
        }
        r.tmc = d.tmc.clone().or(r.tmc.take());
        if let Some(f) = &d.field {
            r.field = f.parse().map_err(usage)?;
        }
        if let Some(g) = &d.gap_policy {
            r.gap_policy = g.parse().map_err(usage)?;
        }
        if let Some(f) = d.split {
            r.bench.split = SplitSpec::new(f).map_err(usage)?;
        }
        r.schema_pairs = d.schema.iter().map(|(k, v)| format!("{k}={v}")).collect();

        if let Some(o) = &self.out {
            r.out = o.clone();
        }
        if let Some(h) = self.horizon {
            r.horizon = h;
        }

        let m = &self.model;
        if let Some(k) = &m.kind {
            r.model = Some(k.parse().map_err(usage)?);
        }
        let s = &mut r.bench.settings;
        if let Some(w) = m.window {
            s.window = w;
        }
        if let Some(h) = m.hidden {
            s.n_hidden = h;
        }
        if let Some(l) = m.layers {
            s.n_layers = l;
        }
        if let Some(p) = m.ar_order {
            s.ar_order = p;
        }
        if let Some(a) = m.arma {
            let spec = ArmaSpec::new(a.p, a.q, a.d);
            s.arma = match a.long_ar_order {
                Some(l) => spec.with_long_ar_order(l),
                None => spec,
            };
        }
        if let Some(b) = m.scale {
            s.scale = b;
        }
        if let Some(b) = m.ridge_fallback {
            s.fit.ridge_fallback = b;
        }

        let t = &self.train;
        if let Some(e) = t.epochs {
            s.train.epochs = e;
        }
        if let Some(lr) = t.lr {
            s.train.learning_rate = lr;
        }
        if let Some(o) = &t.optimizer {
            s.train.optimizer = match o.to_ascii_lowercase().as_str() {
                "adam" => Optimizer::Adam,
                "sgd" => Optimizer::Sgd,
                other => return Err(CliError::usage(format!("unknown optimizer `{other}`"))),
            };
        }
        if t.clip_norm.is_some() {
            s.train.clip_norm = t.clip_norm;
        }
        if let Some(seed) = self.seed {
            s.train.seed = seed;
        }

        let b = &self.bench;
        if let Some(p) = b.parallel {
            r.bench.parallel = p;
        }
        if let Some(models) = &b.models {
            r.bench.models = models.iter().map(|m| m.parse::<ModelKind>()).collect::<Result<_, _>>().map_err(usage)?;
        }
        for (k, lr) in &b.lr {
            r.bench.lr_overrides.insert(k.parse().map_err(usage)?, *lr);
        }

        if let Some(rates) = &self.sweep.rates {
            r.rates = rates.clone();
        }
        if self.sweep.target.is_some() {
            r.target = self.sweep.target;
        }
        Ok(())
    }
}
