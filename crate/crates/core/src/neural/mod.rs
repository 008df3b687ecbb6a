//! Stacked recurrent networks (Elman, LSTM, GRU) with a linear head.
//!
//! Parameters live in one flat buffer. Per layer, in order: the input
//! matrix (`gates*H x in`), the recurrent matrix (`gates*H x H`) and the
//! bias (`gates*H`), all row-major. The head matrix (`outputs x H`) and
//! head bias follow the last layer. Gate blocks are stacked as
//! `[input, forget, cell, output]` for LSTM and `[update, reset, candidate]`
//! for GRU.

mod network;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use network::{forward, loss_and_gradients, predict, ForwardOutput};
pub use train::{fit_network, train, Optimizer, StopRule, TrainConfig, TrainReport, DEFAULT_CLIP_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Elman,
    Lstm,
    Gru,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Elman, CellKind::Lstm, CellKind::Gru];

    /// Stacked gate blocks per layer.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Elman => 1,
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Elman => "elman",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elman" | "rnn" => Ok(CellKind::Elman),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::InvalidArgument(format!("unknown cell kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub cell_kind: CellKind,
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_layers: usize,
    pub n_outputs: usize,
}

impl NetworkConfig {
    /// One input, 25 hidden units per layer, two layers, one output.
    pub fn standard(cell_kind: CellKind) -> Self {
        Self {
            cell_kind,
            n_inputs: 1,
            n_hidden: 25,
            n_layers: 2,
            n_outputs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.n_hidden == 0 || self.n_layers == 0 || self.n_outputs == 0 {
            return Err(Error::InvalidArgument(format!(
                "network dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.n_inputs
        } else {
            self.n_hidden
        }
    }

    pub(crate) fn gate_rows(&self) -> usize {
        self.cell_kind.gates() * self.n_hidden
    }

    pub fn layout(&self) -> Layout {
        let g = self.gate_rows();
        let h = self.n_hidden;
        let mut offset = 0;
        let layers = (0..self.n_layers)
            .map(|l| {
                let w_in = offset;
                let w_rec = w_in + g * self.layer_input(l);
                let bias = w_rec + g * h;
                offset = bias + g;
                LayerOffsets { w_in, w_rec, bias }
            })
            .collect();
        let head_w = offset;
        let head_b = head_w + self.n_outputs * h;
        Layout {
            layers,
            head_w,
            head_b,
            total: head_b + self.n_outputs,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerOffsets {
    pub w_in: usize,
    pub w_rec: usize,
    pub bias: usize,
}

/// Start offsets of each block in the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerOffsets>,
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
}

/// Network weights (or gradients of the same shape).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetworkConfig,
    data: Vec<f64>,
}

/// Borrowed view of one layer's blocks.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub w_in: &'a [f64],
    pub w_rec: &'a [f64],
    pub bias: &'a [f64],
}

impl NetworkParams {
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            data: vec![0.0; config.param_count()],
            config,
        })
    }

    pub fn from_flat(config: NetworkConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if data.len() != config.param_count() {
            return Err(Error::shape("network parameters", config.param_count(), data.len()));
        }
        Ok(Self { config, data })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let layout = self.config.layout();
        let o = layout.layers[l];
        let g = self.config.gate_rows();
        LayerView {
            w_in: &self.data[o.w_in..o.w_rec],
            w_rec: &self.data[o.w_rec..o.bias],
            bias: &self.data[o.bias..o.bias + g],
        }
    }

    /// `(matrix, bias)` of the linear head.
    pub fn head(&self) -> (&[f64], &[f64]) {
        let layout = self.config.layout();
        (&self.data[layout.head_w..layout.head_b], &self.data[layout.head_b..])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Uniform weights in `±1/sqrt(fan_in)`, where `fan_in` is the column count
/// of each matrix. Biases start at zero except the LSTM forget gate, which
/// starts at one.
pub fn init_params(config: NetworkConfig, seed: u64) -> Result<NetworkParams> {
    let mut params = NetworkParams::zeros(config)?;
    let layout = config.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.n_hidden;
    let data = params.as_mut_slice();

    let mut fill = |block: &mut [f64], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for w in block {
            *w = rng.random_range(-bound..bound);
        }
    };
    for (l, o) in layout.layers.iter().enumerate() {
        fill(&mut data[o.w_in..o.w_rec], config.layer_input(l));
        fill(&mut data[o.w_rec..o.bias], h);
        if config.cell_kind == CellKind::Lstm {
            for b in &mut data[o.bias + h..o.bias + 2 * h] {
                *b = 1.0;
            }
        }
    }
    fill(&mut data[layout.head_w..layout.head_b], h);
    Ok(params)
}

/// A trained network bundled with the window length it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub params: NetworkParams,
    pub window: usize,
}

impl NeuralModel {
    pub fn config(&self) -> &NetworkConfig {
        self.params.config()
    }
}

impl crate::forecast::Forecaster for NeuralModel {
    fn window_len(&self) -> usize {
        self.window
    }

    fn one_step(&self, window: &[f64], _residuals: &[f64]) -> Result<f64> {
        if window.len() != self.window * self.config().n_inputs {
            return Err(Error::shape("network window", self.window, window.len()));
        }
        Ok(predict(&self.params, window)?[0])
    }
}
