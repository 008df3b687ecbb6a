use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::network::{loss, loss_and_gradients};
use super::{init_params, NetworkConfig, NetworkParams};
use crate::error::{Error, Result};
use crate::series::WindowedDataset;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Max-norm used when gradient clipping is switched on.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

/// Optional early termination. Both thresholds are inclusive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub train_loss_below: Option<f64>,
    pub val_loss_below: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Seeds parameter initialization in [`fit_network`].
    pub seed: u64,
    /// Global gradient norm cap; `None` leaves gradients untouched.
    pub clip_norm: Option<f64>,
    #[serde(default)]
    pub stop: StopRule,
}

impl Default for TrainConfig {
    /// 5000 full-batch Adam epochs at learning rate 0.001.
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 0.001,
            optimizer: Optimizer::Adam,
            seed: 0,
            clip_norm: None,
            stop: StopRule::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Training loss at the start of each epoch.
    pub train_loss_curve: Vec<f64>,
    /// Validation loss after each epoch's update.
    pub val_loss_curve: Vec<f64>,
    pub wall_time: Duration,
    pub final_params: NetworkParams,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_loss_curve.len()
    }

    pub fn final_val_loss(&self) -> f64 {
        *self.val_loss_curve.last().expect("at least one epoch")
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

fn check_sets(params: &NetworkParams, train_set: &WindowedDataset, val_set: &WindowedDataset) -> Result<()> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InsufficientData {
            what: "training and validation sets",
            required: 1,
            actual: train_set.len().min(val_set.len()),
        });
    }
    if train_set.window_len() != val_set.window_len() || train_set.features() != val_set.features() {
        return Err(Error::shape(
            "validation set",
            format!("T={} D={}", train_set.window_len(), train_set.features()),
            format!("T={} D={}", val_set.window_len(), val_set.features()),
        ));
    }
    if train_set.features() != params.config().n_inputs {
        return Err(Error::shape("dataset features", params.config().n_inputs, train_set.features()));
    }
    Ok(())
}

/// Full-batch gradient descent on mean squared error.
///
/// Divergence (a non-finite loss or parameter) aborts with the epoch index
/// and the last finite training loss.
pub fn train(
    mut params: NetworkParams,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    tc.validate()?;
    check_sets(&params, train_set, val_set)?;
    let started = Instant::now();
    let mut adam = Adam::new(params.len());
    let mut train_curve = Vec::with_capacity(tc.epochs);
    let mut val_curve = Vec::with_capacity(tc.epochs);
    let mut last_finite = None;

    for epoch in 1..=tc.epochs {
        let (train_loss, mut grad) = loss_and_gradients(&params, train_set)?;
        if !train_loss.is_finite() || !grad.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite_loss: last_finite,
            });
        }
        last_finite = Some(train_loss);
        train_curve.push(train_loss);

        if tc.stop.train_loss_below.is_some_and(|target| train_loss <= target) {
            val_curve.push(loss(&params, val_set)?);
            break;
        }

        if let Some(max_norm) = tc.clip_norm {
            let norm = grad.l2_norm();
            if norm > max_norm {
                let s = max_norm / norm;
                grad.as_mut_slice().iter_mut().for_each(|g| *g *= s);
            }
        }
        match tc.optimizer {
            Optimizer::Adam => adam.update(params.as_mut_slice(), grad.as_slice(), tc.learning_rate),
            Optimizer::Sgd => {
                for (p, g) in params.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *p -= tc.learning_rate * g;
                }
            }
        }

        let val_loss = if params.is_finite() { loss(&params, val_set)? } else { f64::NAN };
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite_loss: last_finite,
            });
        }
        val_curve.push(val_loss);
        if tc.stop.val_loss_below.is_some_and(|target| val_loss <= target) {
            break;
        }
    }

    Ok(TrainReport {
        train_loss_curve: train_curve,
        val_loss_curve: val_curve,
        wall_time: started.elapsed(),
        final_params: params,
    })
}

/// Initializes from `tc.seed` and trains.
pub fn fit_network(
    config: NetworkConfig,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    train(init_params(config, tc.seed)?, train_set, val_set, tc)
}
