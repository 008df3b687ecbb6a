//! Series representation, windowing, chronological splitting, scaling and
//! synthetic generators.
//!
//! Windows are stored oldest to newest. A dataset built with window length
//! `T` from a series of length `L` has `N = L - T` rows; row `i` holds
//! `values[i..i + T]` and its target is `values[i + T]`.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered observations for one road segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    pub origin_label: Option<String>,
    pub sample_interval: Option<Duration>,
}

impl TimeSeries {
    /// Builds a clean series. Every value must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData {
                what: "time series",
                required: 1,
                actual: 0,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series value at index {i}")));
        }
        Ok(Self {
            values,
            origin_label: None,
            sample_interval: None,
        })
    }

    /// Builds a series that may still contain `NaN` gaps (but no infinities).
    /// Use [`crate::ingest::clean_gaps`] before handing it to a model.
    pub fn with_gaps(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData {
                what: "time series",
                required: 1,
                actual: 0,
            });
        }
        if let Some(i) = values.iter().position(|v| v.is_infinite()) {
            return Err(Error::NonFinite(format!("series value at index {i}")));
        }
        Ok(Self {
            values,
            origin_label: None,
            sample_interval: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.origin_label = Some(label.into());
        self
    }

    pub fn with_interval(mut self, interval: Duration) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub(crate) fn ensure_clean(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!(
                "series value at index {i}; clean gaps first"
            ))),
            None => Ok(()),
        }
    }

    fn derived(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            origin_label: self.origin_label.clone(),
            sample_interval: self.sample_interval,
        }
    }
}

/// An `N x T x D` block of input windows with aligned `N x 1` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    x: Vec<f64>,
    y: Vec<f64>,
    window: usize,
    features: usize,
}

impl WindowedDataset {
    /// Assembles a dataset from row-major parts. `x.len()` must equal
    /// `y.len() * window * features`.
    pub fn from_parts(x: Vec<f64>, y: Vec<f64>, window: usize, features: usize) -> Result<Self> {
        if window == 0 || features == 0 {
            return Err(Error::InvalidArgument(
                "window length and feature count must be positive".into(),
            ));
        }
        if x.len() != y.len() * window * features {
            return Err(Error::shape(
                "windowed dataset",
                format!("{} inputs", y.len() * window * features),
                x.len(),
            ));
        }
        Ok(Self {
            x,
            y,
            window,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// `[N, T, D]`
    pub fn x_shape(&self) -> [usize; 3] {
        [self.len(), self.window, self.features]
    }

    /// `[N, 1]`
    pub fn y_shape(&self) -> [usize; 2] {
        [self.len(), 1]
    }

    /// Flat row-major inputs.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row `i` as `T * D` values, oldest step first.
    pub fn row(&self, i: usize) -> &[f64] {
        let stride = self.window * self.features;
        &self.x[i * stride..(i + 1) * stride]
    }

    /// Copies rows `start..end` into a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let stride = self.window * self.features;
        Self {
            x: self.x[start * stride..end * stride].to_vec(),
            y: self.y[start..end].to_vec(),
            window: self.window,
            features: self.features,
        }
    }

    /// Stacks two datasets with identical window and feature dimensions.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.window != other.window || self.features != other.features {
            return Err(Error::shape(
                "dataset concat",
                format!("T={} D={}", self.window, self.features),
                format!("T={} D={}", other.window, other.features),
            ));
        }
        let mut x = self.x.clone();
        x.extend_from_slice(&other.x);
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        Ok(Self { x, y, ..*self })
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            x: self.x.iter().map(|&v| f(v)).collect(),
            y: self.y.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }
}

/// Stride-1, horizon-1 windows over a univariate series (`D = 1`).
pub fn make_windows(series: &TimeSeries, window: usize) -> Result<WindowedDataset> {
    if window == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    series.ensure_clean()?;
    let values = series.values();
    if values.len() < window + 1 {
        return Err(Error::InsufficientData {
            what: "windowing",
            required: window + 1,
            actual: values.len(),
        });
    }
    let n = values.len() - window;
    let mut x = Vec::with_capacity(n * window);
    for i in 0..n {
        x.extend_from_slice(&values[i..i + window]);
    }
    let y = values[window..].to_vec();
    WindowedDataset::from_parts(x, y, window, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction })
    }

    /// Number of leading observations assigned to training.
    pub fn train_len(&self, total: usize) -> usize {
        (total as f64 * self.train_fraction).round() as usize
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
        }
    }
}

/// Splits without shuffling: the training part is a prefix, validation the
/// remaining suffix.
pub fn chronological_split(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    SplitSpec::new(spec.train_fraction)?;
    let total = series.len();
    let cut = spec.train_len(total);
    if cut == 0 || cut >= total {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} on {total} values leaves an empty segment",
            spec.train_fraction
        )));
    }
    let values = series.values();
    Ok((
        series.derived(values[..cut].to_vec()),
        series.derived(values[cut..].to_vec()),
    ))
}

/// Z-score parameters using the population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: f64,
    pub std: f64,
}

pub fn fit_scaler(train: &TimeSeries) -> Result<ScalerParams> {
    train.ensure_clean()?;
    let v = train.values();
    if v.len() < 2 {
        return Err(Error::InsufficientData {
            what: "scaler fit",
            required: 2,
            actual: v.len(),
        });
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok(ScalerParams { mean, std })
}

impl ScalerParams {
    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&x| self.scale(x)).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&z| self.unscale(z)).collect()
    }

    pub fn apply_series(&self, series: &TimeSeries) -> TimeSeries {
        series.derived(self.apply(series.values()))
    }

    pub fn invert_series(&self, series: &TimeSeries) -> TimeSeries {
        series.derived(self.invert(series.values()))
    }
}

/// Linear autoregressive generator:
/// `y_t = intercept + sum_i phi[i] * y_{t-1-i} + noise_std * e_t`.
///
/// The first `phi.len()` outputs are the `initial` values verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct ArProcess {
    pub phi: Vec<f64>,
    pub intercept: f64,
    pub noise_std: f64,
    pub initial: Vec<f64>,
}

impl ArProcess {
    /// Pre-sample values default to 1.0.
    pub fn new(phi: Vec<f64>, intercept: f64, noise_std: f64) -> Self {
        let initial = vec![1.0; phi.len()];
        Self {
            phi,
            intercept,
            noise_std,
            initial,
        }
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Self {
        self.initial = initial;
        self
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<TimeSeries> {
        let p = self.phi.len();
        if n <= p {
            return Err(Error::InsufficientData {
                what: "AR generator length",
                required: p + 1,
                actual: n,
            });
        }
        if self.initial.len() != p {
            return Err(Error::shape("AR generator initial values", p, self.initial.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::with_capacity(n);
        y.extend_from_slice(&self.initial);
        for t in p..n {
            let mut v = self.intercept;
            for (i, phi) in self.phi.iter().enumerate() {
                v += phi * y[t - 1 - i];
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(v + self.noise_std * e);
        }
        TimeSeries::new(y)
    }
}

/// Convenience wrapper over [`ArProcess`] with unit pre-sample values.
pub fn gen_ar_process(phi: &[f64], intercept: f64, noise_std: f64, n: usize, seed: u64) -> Result<TimeSeries> {
    ArProcess::new(phi.to_vec(), intercept, noise_std).generate(n, seed)
}

/// ARMA generator with zero pre-sample state and a discarded burn-in:
/// `y_t = intercept + sum phi_i y_{t-i} + e_t + sum theta_j e_{t-j}`.
pub fn gen_arma_process(
    phi: &[f64],
    theta: &[f64],
    intercept: f64,
    noise_std: f64,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::InsufficientData {
            what: "ARMA generator length",
            required: 1,
            actual: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + burn_in;
    let mut y = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        let shock: f64 = StandardNormal.sample(&mut rng);
        e[t] = noise_std * shock;
        let mut v = intercept + e[t];
        for (i, a) in phi.iter().enumerate() {
            if t > i {
                v += a * y[t - 1 - i];
            }
        }
        for (j, b) in theta.iter().enumerate() {
            if t > j {
                v += b * e[t - 1 - j];
            }
        }
        y[t] = v;
    }
    TimeSeries::new(y.split_off(burn_in))
}

/// `amplitude * sin(2 pi t / period) + noise_std * e_t`.
pub fn gen_sine_plus_noise(amplitude: f64, period: f64, noise_std: f64, n: usize, seed: u64) -> Result<TimeSeries> {
    if !(period >= 2.0) {
        return Err(Error::InvalidArgument(format!("sine period must be >= 2, got {period}")));
    }
    if n == 0 {
        return Err(Error::InsufficientData {
            what: "sine generator length",
            required: 1,
            actual: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|t| {
            let e: f64 = StandardNormal.sample(&mut rng);
            amplitude * (std::f64::consts::TAU * t as f64 / period).sin() + noise_std * e
        })
        .collect();
    TimeSeries::new(values)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64
}
