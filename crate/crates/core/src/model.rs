//! The five benchmark model kinds behind one fitted-model type, plus their
//! on-disk formats.
//!
//! Linear models are stored as a single-line JSON document with a fixed
//! field order:
//!
//! ```text
//! {"kind":"ar","p":10,"q":0,"d":0,"phi":[...],"theta":[],"intercept":...,"scaler":null,"long_ar_order":0}
//! ```
//!
//! Reals are written with 17 significant digits. Networks are stored as a
//! JSON header line (config, window, seed, scaler, parameter count)
//! terminated by `\n`, followed by the parameters as little-endian `f64`
//! in the layout documented in [`crate::neural`].

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::Forecaster;
use crate::linear::{fit_ar, fit_arma, ArModel, ArmaModel, ArmaSpec, FitOptions};
use crate::neural::{fit_network, CellKind, NetworkConfig, NetworkParams, NeuralModel, TrainConfig, TrainReport};
use crate::series::{fit_scaler, make_windows, ScalerParams, TimeSeries};

const NETWORK_FORMAT: &str = "ttforecast-network-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "ARIMA")]
    Arima,
    #[serde(rename = "RNN")]
    Rnn,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "GRU")]
    Gru,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Ar, ModelKind::Arima, ModelKind::Rnn, ModelKind::Lstm, ModelKind::Gru];

    /// Upper-case report name.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ar => "AR",
            ModelKind::Arima => "ARIMA",
            ModelKind::Rnn => "RNN",
            ModelKind::Lstm => "LSTM",
            ModelKind::Gru => "GRU",
        }
    }

    /// Lower-case name used in file names and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Ar => "ar",
            ModelKind::Arima => "arima",
            ModelKind::Rnn => "rnn",
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
        }
    }

    pub fn cell_kind(self) -> Option<CellKind> {
        match self {
            ModelKind::Rnn => Some(CellKind::Elman),
            ModelKind::Lstm => Some(CellKind::Lstm),
            ModelKind::Gru => Some(CellKind::Gru),
            _ => None,
        }
    }

    pub fn is_neural(self) -> bool {
        self.cell_kind().is_some()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ar" => Ok(ModelKind::Ar),
            "arima" | "arma" => Ok(ModelKind::Arima),
            "rnn" | "elman" => Ok(ModelKind::Rnn),
            "lstm" => Ok(ModelKind::Lstm),
            "gru" => Ok(ModelKind::Gru),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

/// Everything needed to fit any of the five kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    /// Past steps per input window (`T`).
    pub window: usize,
    pub ar_order: usize,
    pub arma: ArmaSpec,
    pub n_hidden: usize,
    pub n_layers: usize,
    pub train: TrainConfig,
    /// Z-score inputs using training statistics. Predictions are always
    /// returned in original units.
    pub scale: bool,
    pub fit: FitOptions,
}

impl Default for ModelSettings {
    /// `T = 10`, AR(10), ARMA(10, 0, 5), two layers of 25 hidden units,
    /// 5000 epochs at learning rate 0.001.
    fn default() -> Self {
        Self {
            window: 10,
            ar_order: 10,
            arma: ArmaSpec::new(10, 5, 0),
            n_hidden: 25,
            n_layers: 2,
            train: TrainConfig::default(),
            scale: false,
            fit: FitOptions::default(),
        }
    }
}

impl ModelSettings {
    pub fn network(&self, cell_kind: CellKind) -> NetworkConfig {
        NetworkConfig {
            cell_kind,
            n_inputs: 1,
            n_hidden: self.n_hidden,
            n_layers: self.n_layers,
            n_outputs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Ar(ArModel),
    Arma(ArmaModel),
    Neural(NeuralModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub body: ModelBody,
    pub scaler: Option<ScalerParams>,
    /// Initialization seed for networks; zero for linear models.
    pub seed: u64,
}

impl Forecaster for FittedModel {
    fn window_len(&self) -> usize {
        match &self.body {
            ModelBody::Ar(m) => m.window_len(),
            ModelBody::Arma(m) => Forecaster::window_len(m),
            ModelBody::Neural(m) => m.window_len(),
        }
    }

    fn residual_order(&self) -> usize {
        match &self.body {
            ModelBody::Arma(m) => m.q,
            _ => 0,
        }
    }

    fn one_step(&self, window: &[f64], residuals: &[f64]) -> Result<f64> {
        let Some(s) = self.scaler else {
            return self.body_one_step(window, residuals);
        };
        let w = s.apply(window);
        let r: Vec<f64> = residuals.iter().map(|e| e / s.std).collect();
        Ok(s.unscale(self.body_one_step(&w, &r)?))
    }
}

impl FittedModel {
    fn body_one_step(&self, window: &[f64], residuals: &[f64]) -> Result<f64> {
        match &self.body {
            ModelBody::Ar(m) => m.one_step(window, residuals),
            ModelBody::Arma(m) => m.one_step(window, residuals),
            ModelBody::Neural(m) => m.one_step(window, residuals),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match &self.body {
            ModelBody::Ar(m) => Ok(linear_doc(self.kind, m.p, 0, 0, &m.phi, &[], m.intercept, self.scaler, 0).into_bytes()),
            ModelBody::Arma(m) => Ok(linear_doc(
                self.kind,
                m.p,
                m.q,
                m.d,
                &m.phi,
                &m.theta,
                m.intercept,
                self.scaler,
                m.long_ar_order,
            )
            .into_bytes()),
            ModelBody::Neural(m) => {
                let header = NetworkHeader {
                    format: NETWORK_FORMAT.into(),
                    kind: self.kind,
                    config: *m.config(),
                    window: m.window,
                    seed: self.seed,
                    scaler: self.scaler,
                    param_count: m.params.len(),
                };
                let mut out = serde_json::to_vec(&header)?;
                out.push(b'\n');
                for v in m.params.as_slice() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                Ok(out)
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
        let head = &bytes[..split];
        let value: serde_json::Value = serde_json::from_slice(head)?;
        if value.get("format").is_some() {
            let header: NetworkHeader = serde_json::from_value(value)?;
            if header.format != NETWORK_FORMAT {
                return Err(Error::Format(format!("unsupported network format `{}`", header.format)));
            }
            let payload = bytes.get(split + 1..).unwrap_or(&[]);
            if payload.len() != header.param_count * 8 {
                return Err(Error::Format(format!(
                    "expected {} parameter bytes, found {}",
                    header.param_count * 8,
                    payload.len()
                )));
            }
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let params = NetworkParams::from_flat(header.config, data)?;
            if header.kind.cell_kind() != Some(header.config.cell_kind) {
                return Err(Error::Format(format!(
                    "model kind {} does not match cell kind {}",
                    header.kind, header.config.cell_kind
                )));
            }
            return Ok(Self {
                kind: header.kind,
                body: ModelBody::Neural(NeuralModel {
                    params,
                    window: header.window,
                }),
                scaler: header.scaler,
                seed: header.seed,
            });
        }

        let doc: LinearDoc = serde_json::from_value(value)?;
        let kind: ModelKind = doc.kind.parse()?;
        if doc.phi.len() != doc.p || doc.theta.len() != doc.q {
            return Err(Error::Format("coefficient counts disagree with orders".into()));
        }
        let body = match kind {
            ModelKind::Ar => ModelBody::Ar(ArModel::new(doc.phi, doc.intercept)?),
            ModelKind::Arima => {
                let mut m = ArmaModel::new(doc.phi, doc.theta, doc.d, doc.intercept)?;
                m.long_ar_order = doc.long_ar_order;
                ModelBody::Arma(m)
            }
            other => return Err(Error::Format(format!("{other} is not a linear model"))),
        };
        Ok(Self {
            kind,
            body,
            scaler: doc.scaler,
            seed: 0,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkHeader {
    format: String,
    kind: ModelKind,
    config: NetworkConfig,
    window: usize,
    seed: u64,
    scaler: Option<ScalerParams>,
    param_count: usize,
}

#[derive(Debug, Deserialize)]
struct LinearDoc {
    kind: String,
    p: usize,
    q: usize,
    d: usize,
    phi: Vec<f64>,
    theta: Vec<f64>,
    intercept: f64,
    scaler: Option<ScalerParams>,
    #[serde(default)]
    long_ar_order: usize,
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_reals(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_real(v)).collect::<Vec<_>>().join(",")
}

#[allow(clippy::too_many_arguments)]
fn linear_doc(
    kind: ModelKind,
    p: usize,
    q: usize,
    d: usize,
    phi: &[f64],
    theta: &[f64],
    intercept: f64,
    scaler: Option<ScalerParams>,
    long_ar_order: usize,
) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{{\"kind\":\"{}\",\"p\":{p},\"q\":{q},\"d\":{d},\"phi\":[{}],\"theta\":[{}],\"intercept\":{},\"scaler\":",
        kind.slug(),
        fmt_reals(phi),
        fmt_reals(theta),
        fmt_real(intercept)
    );
    match scaler {
        Some(sc) => {
            let _ = write!(s, "{{\"mean\":{},\"std\":{}}}", fmt_real(sc.mean), fmt_real(sc.std));
        }
        None => s.push_str("null"),
    }
    let _ = writeln!(s, ",\"long_ar_order\":{long_ar_order}}}");
    s
}

/// Training-side output of [`fit_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub wall_time: Duration,
    /// Present for networks only.
    pub training: Option<TrainReport>,
}

/// Fits one model kind on a training segment. Networks also track loss on
/// the validation segment every epoch.
pub fn fit_model(kind: ModelKind, train: &TimeSeries, val: &TimeSeries, settings: &ModelSettings) -> Result<(FittedModel, FitReport)> {
    let started = Instant::now();
    let scaler = if settings.scale { Some(fit_scaler(train)?) } else { None };
    let (train_s, val_s) = match scaler {
        Some(s) => (s.apply_series(train), s.apply_series(val)),
        None => (train.clone(), val.clone()),
    };
    let (body, training) = match kind {
        ModelKind::Ar => (ModelBody::Ar(fit_ar(&train_s, settings.ar_order, settings.fit)?), None),
        ModelKind::Arima => (ModelBody::Arma(fit_arma(&train_s, settings.arma, settings.fit)?), None),
        _ => {
            let cell = kind.cell_kind().expect("neural kind");
            let train_w = make_windows(&train_s, settings.window)?;
            let val_w = make_windows(&val_s, settings.window)?;
            let report = fit_network(settings.network(cell), &train_w, &val_w, &settings.train)?;
            let body = ModelBody::Neural(NeuralModel {
                params: report.final_params.clone(),
                window: settings.window,
            });
            (body, Some(report))
        }
    };
    let model = FittedModel {
        kind,
        body,
        scaler,
        seed: if kind.is_neural() { settings.train.seed } else { 0 },
    };
    Ok((
        model,
        FitReport {
            wall_time: started.elapsed(),
            training,
        },
    ))
}
