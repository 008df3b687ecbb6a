//! Teacher-forced one-step evaluation and recursive multi-step forecasting
//! over any fitted model.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{ArModel, ArmaModel};
use crate::metrics::{mae, rmse, ErrorScores};
use crate::series::TimeSeries;

/// A model that predicts the next value from a trailing window.
///
/// Models with moving-average terms also consume the last
/// [`residual_order`](Forecaster::residual_order) one-step errors; the
/// evaluation routines own and update that history.
pub trait Forecaster {
    /// Number of trailing observations a prediction needs.
    fn window_len(&self) -> usize;

    fn residual_order(&self) -> usize {
        0
    }

    /// `window` holds exactly `window_len()` values and `residuals` exactly
    /// `residual_order()` values, both oldest first.
    fn one_step(&self, window: &[f64], residuals: &[f64]) -> Result<f64>;
}

impl<F: Forecaster + ?Sized> Forecaster for &F {
    fn window_len(&self) -> usize {
        (**self).window_len()
    }

    fn residual_order(&self) -> usize {
        (**self).residual_order()
    }

    fn one_step(&self, window: &[f64], residuals: &[f64]) -> Result<f64> {
        (**self).one_step(window, residuals)
    }
}

impl Forecaster for ArModel {
    fn window_len(&self) -> usize {
        self.p
    }

    fn one_step(&self, window: &[f64], _residuals: &[f64]) -> Result<f64> {
        self.predict_one_step(window)
    }
}

impl Forecaster for ArmaModel {
    fn window_len(&self) -> usize {
        ArmaModel::window_len(self)
    }

    fn residual_order(&self) -> usize {
        self.q
    }

    fn one_step(&self, window: &[f64], residuals: &[f64]) -> Result<f64> {
        self.predict_one_step(window, residuals)
    }
}

/// Predicts the last observed value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl Forecaster for Persistence {
    fn window_len(&self) -> usize {
        1
    }

    fn one_step(&self, window: &[f64], _residuals: &[f64]) -> Result<f64> {
        window
            .last()
            .copied()
            .ok_or_else(|| Error::shape("persistence window", 1, 0))
    }
}

/// Scores for one evaluation run plus the underlying pairs.
///
/// Pairs are ordered origin-major, then by step. `origins[i]` is the index
/// of the last true value in the seed window, so the target of pair `i` sits
/// at `origins[i] + steps[i]` in the evaluated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEval {
    pub horizon: usize,
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
    pub origins: Vec<usize>,
    pub steps: Vec<usize>,
    pub mae: f64,
    pub rmse: f64,
    /// Scores restricted to each step `1..=horizon`.
    pub per_step: Vec<ErrorScores>,
}

impl ForecastEval {
    fn from_pairs(horizon: usize, predictions: Vec<f64>, actuals: Vec<f64>, origins: Vec<usize>, steps: Vec<usize>) -> Result<Self> {
        let mae = mae(&predictions, &actuals)?;
        let rmse = rmse(&predictions, &actuals)?;
        let mut per_step = Vec::with_capacity(horizon);
        for h in 1..=horizon {
            let (p, a): (Vec<f64>, Vec<f64>) = steps
                .iter()
                .zip(predictions.iter().zip(&actuals))
                .filter(|(s, _)| **s == h)
                .map(|(_, (p, a))| (*p, *a))
                .unzip();
            per_step.push(ErrorScores::compute(&p, &a)?);
        }
        Ok(Self {
            horizon,
            predictions,
            actuals,
            origins,
            steps,
            mae,
            rmse,
            per_step,
        })
    }

    pub fn scores(&self) -> ErrorScores {
        ErrorScores {
            mae: self.mae,
            rmse: self.rmse,
            n: self.predictions.len(),
        }
    }
}

fn check_window(model: &dyn Forecaster, window: usize) -> Result<()> {
    if model.window_len() > window {
        return Err(Error::InvalidArgument(format!(
            "model needs {} past values but the evaluation window is {window}",
            model.window_len()
        )));
    }
    if window == 0 {
        return Err(Error::InvalidArgument("evaluation window must be positive".into()));
    }
    Ok(())
}

struct ResidualCarrier {
    history: VecDeque<f64>,
}

impl ResidualCarrier {
    fn new(order: usize) -> Self {
        Self {
            history: std::iter::repeat_n(0.0, order).collect(),
        }
    }

    fn push(&mut self, residual: f64) {
        if self.history.is_empty() {
            return;
        }
        self.history.pop_front();
        self.history.push_back(residual);
    }

    fn as_vec(&self) -> Vec<f64> {
        self.history.iter().copied().collect()
    }
}

/// Teacher-forced evaluation: each prediction conditions on the true
/// preceding `window` values.
pub fn one_step_eval(model: &dyn Forecaster, val: &TimeSeries, window: usize) -> Result<ForecastEval> {
    rolling_multi_step_eval(model, val, window, 1)
}

/// Iterated forecast of `k` steps from a seed window. Future residuals are
/// taken as zero.
pub fn recursive_forecast(model: &dyn Forecaster, seed_window: &[f64], k: usize) -> Result<Vec<f64>> {
    let zeros = vec![0.0; model.residual_order()];
    recursive_forecast_with_residuals(model, seed_window, &zeros, k)
}

/// Like [`recursive_forecast`], starting from a known residual history.
/// Only the trailing `window_len()` values of `seed_window` are used.
pub fn recursive_forecast_with_residuals(
    model: &dyn Forecaster,
    seed_window: &[f64],
    residuals: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
    }
    let need = model.window_len();
    if seed_window.len() < need {
        return Err(Error::shape("seed window", need, seed_window.len()));
    }
    if residuals.len() != model.residual_order() {
        return Err(Error::shape("residual history", model.residual_order(), residuals.len()));
    }
    let mut window: Vec<f64> = seed_window[seed_window.len() - need..].to_vec();
    let mut resid = residuals.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let pred = model.one_step(&window, &resid)?;
        if !pred.is_finite() {
            return Err(Error::NonFinite("forecast".into()));
        }
        out.push(pred);
        if need > 0 {
            window.remove(0);
            window.push(pred);
        }
        if !resid.is_empty() {
            resid.remove(0);
            resid.push(0.0);
        }
    }
    Ok(out)
}

/// Rolling-origin evaluation pooling every (prediction, actual) pair over
/// all origins and steps `1..=k`.
///
/// The residual history seen at each origin is built from true one-step
/// errors at earlier origins; inside a rollout it is extended with zeros.
pub fn rolling_multi_step_eval(model: &dyn Forecaster, val: &TimeSeries, window: usize, k: usize) -> Result<ForecastEval> {
    check_window(model, window)?;
    if k < 1 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
    }
    val.ensure_clean()?;
    let y = val.values();
    if y.len() < window + k {
        return Err(Error::InsufficientData {
            what: "rolling evaluation",
            required: window + k,
            actual: y.len(),
        });
    }
    let need = model.window_len();
    let origins_total = y.len() - window - k + 1;
    let mut carrier = ResidualCarrier::new(model.residual_order());
    let cap = origins_total * k;
    let (mut preds, mut acts) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
    let (mut origins, mut steps) = (Vec::with_capacity(cap), Vec::with_capacity(cap));

    for first_target in window..window + origins_total {
        let seed = &y[first_target - need..first_target];
        let resid = carrier.as_vec();
        let path = recursive_forecast_with_residuals(model, seed, &resid, k)?;
        carrier.push(y[first_target] - path[0]);
        for (h, p) in path.into_iter().enumerate() {
            preds.push(p);
            acts.push(y[first_target + h]);
            origins.push(first_target - 1);
            steps.push(h + 1);
        }
    }
    ForecastEval::from_pairs(k, preds, acts, origins, steps)
}
