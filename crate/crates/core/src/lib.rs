//! Travel-time forecasting toolkit.
//!
//! Five model families share one evaluation path: least-squares AR(p),
//! two-stage ARMA/ARIMA(p, d, q), and stacked Elman, LSTM and GRU networks
//! trained with exact backpropagation through time.

pub mod bench;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod series;

pub use error::{Error, Result};
pub use forecast::{
    one_step_eval, recursive_forecast, rolling_multi_step_eval, ForecastEval, Forecaster, Persistence,
};
pub use linear::{fit_ar, fit_arma, ArModel, ArmaModel, ArmaSpec, FitOptions};
pub use metrics::{mae, rmse, ErrorScores};
pub use model::{fit_model, FittedModel, ModelKind, ModelSettings};
pub use bench::{run_bench, sweep_lr, BenchConfig, BenchReport, SyntheticSpec};
pub use series::{
    chronological_split, fit_scaler, gen_ar_process, gen_sine_plus_noise, make_windows, ScalerParams,
    SplitSpec, TimeSeries, WindowedDataset,
};
