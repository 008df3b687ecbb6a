//! Autoregressive models fitted by least squares, and ARMA models fitted by
//! two-stage (Hannan–Rissanen) regression.
//!
//! Lag convention: windows are passed oldest to newest and `phi[0]` applies
//! to the newest value (lag 1). The same holds for residual histories and
//! `theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, Design};
use crate::series::TimeSeries;

/// Penalty applied when the ridge fallback is enabled.
pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Regularize rank-deficient designs instead of failing.
    pub ridge_fallback: bool,
}

impl FitOptions {
    fn ridge(&self) -> Option<f64> {
        self.ridge_fallback.then_some(RIDGE_LAMBDA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub p: usize,
    pub phi: Vec<f64>,
    pub intercept: f64,
    pub residual_variance: f64,
}

impl ArModel {
    pub fn new(phi: Vec<f64>, intercept: f64) -> Result<Self> {
        if phi.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
            return Err(Error::NonFinite("AR coefficients".into()));
        }
        Ok(Self {
            p: phi.len(),
            phi,
            intercept,
            residual_variance: 0.0,
        })
    }

    pub fn predict_one_step(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.p {
            return Err(Error::shape("AR window", self.p, window.len()));
        }
        Ok(self.intercept + lag_dot(&self.phi, window))
    }

    /// Implied stationary mean `c / (1 - sum phi)`, if defined.
    pub fn mean(&self) -> Option<f64> {
        let denom = 1.0 - self.phi.iter().sum::<f64>();
        (denom.abs() > f64::EPSILON).then(|| self.intercept / denom)
    }
}

/// `sum_i coef[i] * history[len - 1 - i]`
#[inline]
fn lag_dot(coef: &[f64], history: &[f64]) -> f64 {
    coef.iter().zip(history.iter().rev()).map(|(c, v)| c * v).sum()
}

fn lag_design(values: &[f64], p: usize, start: usize, residuals: Option<(&[f64], usize)>) -> (Design, Vec<f64>) {
    let q = residuals.map_or(0, |(_, q)| q);
    let rows = values.len() - start;
    let mut design = Design::new(rows, 1 + p + q);
    let mut target = Vec::with_capacity(rows);
    let mut row = vec![0.0; 1 + p + q];
    for t in start..values.len() {
        row[0] = 1.0;
        for i in 0..p {
            row[1 + i] = values[t - 1 - i];
        }
        if let Some((eps, q)) = residuals {
            for j in 0..q {
                row[1 + p + j] = eps[t - 1 - j];
            }
        }
        design.push_row(&row);
        target.push(values[t]);
    }
    (design, target)
}

/// Ordinary least squares AR(p) with intercept.
pub fn fit_ar(series: &TimeSeries, p: usize, opts: FitOptions) -> Result<ArModel> {
    if p == 0 {
        return Err(Error::InvalidArgument("AR order must be positive".into()));
    }
    series.ensure_clean()?;
    let y = series.values();
    if y.len() < 2 * p + 2 {
        return Err(Error::InsufficientData {
            what: "AR fit",
            required: 2 * p + 2,
            actual: y.len(),
        });
    }
    fit_ar_values(y, p, opts)
}

fn fit_ar_values(y: &[f64], p: usize, opts: FitOptions) -> Result<ArModel> {
    let (design, target) = lag_design(y, p, p, None);
    let sol = lstsq(&design, &target, opts.ridge())?;
    let dof = design.rows.saturating_sub(design.cols).max(1);
    Ok(ArModel {
        p,
        intercept: sol.coef[0],
        phi: sol.coef[1..].to_vec(),
        residual_variance: sol.rss / dof as f64,
    })
}

pub const DEFAULT_LONG_AR_ORDER: usize = 20;

/// Orders for an ARMA/ARIMA fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub p: usize,
    pub q: usize,
    pub d: usize,
    /// Order of the long autoregression whose residuals stand in for the
    /// unobserved innovations.
    pub long_ar_order: usize,
}

impl ArmaSpec {
    /// Long AR order defaults to [`DEFAULT_LONG_AR_ORDER`], raised to
    /// `max(p, q) + 1` for larger orders.
    pub fn new(p: usize, q: usize, d: usize) -> Self {
        Self {
            p,
            q,
            d,
            long_ar_order: DEFAULT_LONG_AR_ORDER.max(p.max(q) + 1),
        }
    }

    pub fn with_long_ar_order(mut self, order: usize) -> Self {
        self.long_ar_order = order;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub p: usize,
    pub q: usize,
    pub d: usize,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub long_ar_order: usize,
    pub residual_variance: f64,
}

impl ArmaModel {
    pub fn new(phi: Vec<f64>, theta: Vec<f64>, d: usize, intercept: f64) -> Result<Self> {
        if phi.iter().chain(&theta).any(|v| !v.is_finite()) || !intercept.is_finite() {
            return Err(Error::NonFinite("ARMA coefficients".into()));
        }
        let long_ar_order = DEFAULT_LONG_AR_ORDER.max(phi.len().max(theta.len()) + 1);
        Ok(Self {
            p: phi.len(),
            q: theta.len(),
            d,
            phi,
            theta,
            intercept,
            long_ar_order,
            residual_variance: 0.0,
        })
    }

    /// Raw observations required per prediction: `p + d`.
    pub fn window_len(&self) -> usize {
        self.p + self.d
    }

    /// One-step prediction in the original (undifferenced) scale.
    ///
    /// `window` holds the last `p + d` observations, `residuals` the last `q`
    /// one-step errors, both oldest first. Unknown residuals may be zero.
    pub fn predict_one_step(&self, window: &[f64], residuals: &[f64]) -> Result<f64> {
        if window.len() != self.window_len() {
            return Err(Error::shape("ARMA window", self.window_len(), window.len()));
        }
        if residuals.len() != self.q {
            return Err(Error::shape("ARMA residual history", self.q, residuals.len()));
        }
        let diffed = difference(window, self.d);
        let w = self.intercept + lag_dot(&self.phi, &diffed) + lag_dot(&self.theta, residuals);
        Ok(integrate_one(w, window, self.d))
    }
}

/// Applies `d` rounds of first differencing.
pub fn difference(values: &[f64], d: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Recovers the next level from a predicted `d`-th difference and the
/// preceding levels: `y_t = w - sum_{k=1..d} C(d,k) (-1)^k y_{t-k}`.
fn integrate_one(w: f64, history: &[f64], d: usize) -> f64 {
    let mut level = w;
    let mut binom = 1.0;
    for k in 1..=d {
        binom = binom * (d - k + 1) as f64 / k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        level -= binom * sign * history[history.len() - k];
    }
    level
}

/// Stage-2 regression inputs: one row per `t >= max(p, q)` holding
/// `[1, y_{t-1}..y_{t-p}, e_{t-1}..e_{t-q}]`, where `e` are long-AR
/// residuals and pre-sample residuals are zero.
pub fn arma_design(values: &[f64], spec: ArmaSpec, opts: FitOptions) -> Result<(Design, Vec<f64>)> {
    let start = spec.p.max(spec.q);
    if spec.q == 0 {
        return Ok(lag_design(values, spec.p, start, None));
    }
    let long = fit_ar_values(values, spec.long_ar_order, opts)?;
    let mut eps = vec![0.0; values.len()];
    for t in spec.long_ar_order..values.len() {
        let pred = long.intercept + lag_dot(&long.phi, &values[t - spec.long_ar_order..t]);
        eps[t] = values[t] - pred;
    }
    Ok(lag_design(values, spec.p, start, Some((&eps, spec.q))))
}

/// Two-stage ARMA estimation on the `d`-times differenced series.
pub fn fit_arma(series: &TimeSeries, spec: ArmaSpec, opts: FitOptions) -> Result<ArmaModel> {
    series.ensure_clean()?;
    let ArmaSpec { p, q, d, long_ar_order } = spec;
    if p + q == 0 {
        return Err(Error::InvalidArgument("ARMA needs p + q >= 1".into()));
    }
    if q > 0 && long_ar_order <= p.max(q) {
        return Err(Error::InvalidArgument(format!(
            "long AR order {long_ar_order} must exceed max(p, q) = {}",
            p.max(q)
        )));
    }
    let required = long_ar_order + p + q + 2 + d;
    if series.len() < required {
        return Err(Error::InsufficientData {
            what: "ARMA fit",
            required,
            actual: series.len(),
        });
    }
    let w = difference(series.values(), d);
    let (design, target) = arma_design(&w, spec, opts)?;
    let sol = lstsq(&design, &target, opts.ridge())?;
    let dof = design.rows.saturating_sub(design.cols).max(1);
    Ok(ArmaModel {
        p,
        q,
        d,
        intercept: sol.coef[0],
        phi: sol.coef[1..1 + p].to_vec(),
        theta: sol.coef[1 + p..].to_vec(),
        long_ar_order,
        residual_variance: sol.rss / dof as f64,
    })
}

pub fn predict_ar_one_step(model: &ArModel, window: &[f64]) -> Result<f64> {
    model.predict_one_step(window)
}

pub fn predict_arma_one_step(model: &ArmaModel, window: &[f64], residuals: &[f64]) -> Result<f64> {
    model.predict_one_step(window, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{gen_ar_process, gen_arma_process, ArProcess};

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v).unwrap()
    }

    fn sse(model: &ArModel, y: &[f64]) -> f64 {
        (model.p..y.len())
            .map(|t| (y[t] - model.predict_one_step(&y[t - model.p..t]).unwrap()).powi(2))
            .sum()
    }

    #[test]
    fn recovers_noiseless_ar1() {
        let s = ArProcess::new(vec![0.8], 0.0, 0.0).with_initial(vec![5.0]).generate(60, 0).unwrap();
        let m = fit_ar(&s, 1, FitOptions::default()).unwrap();
        assert!((m.phi[0] - 0.8).abs() < 1e-8);
        assert!(m.intercept.abs() < 1e-8);
    }

    #[test]
    fn recovers_noiseless_ar2() {
        let s = gen_ar_process(&[0.5, 0.3], 1.0, 0.0, 500, 0).unwrap();
        let m = fit_ar(&s, 2, FitOptions::default()).unwrap();
        assert!((m.phi[0] - 0.5).abs() < 1e-8, "{:?}", m.phi);
        assert!((m.phi[1] - 0.3).abs() < 1e-8);
        assert!((m.intercept - 1.0).abs() < 1e-8);
    }

    #[test]
    fn alternating_series() {
        let v: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let m = fit_ar(&ts(v), 1, FitOptions::default()).unwrap();
        assert!((m.phi[0] + 1.0).abs() < 1e-12);
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_rank_deficient() {
        let err = fit_ar(&ts(vec![3.0; 30]), 2, FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        assert!(err.to_string().contains("ridge"));
        let m = fit_ar(&ts(vec![3.0; 30]), 2, FitOptions { ridge_fallback: true }).unwrap();
        assert!(m.phi.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn ar_length_precondition() {
        let err = fit_ar(&ts(vec![1.0, 2.0, 3.0, 4.0, 5.0]), 2, FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { required: 6, .. }));
    }

    #[test]
    fn ar_prediction_examples() {
        let m = ArModel::new(vec![0.8], 0.0).unwrap();
        assert_eq!(m.predict_one_step(&[1.0]).unwrap(), 0.8);
        let m = ArModel::new(vec![0.0; 3], 2.5).unwrap();
        assert_eq!(m.predict_one_step(&[9.0, -4.0, 1.0]).unwrap(), 2.5);
        let m = ArModel::new(vec![0.5, 0.3], 1.0).unwrap();
        assert!((m.predict_one_step(&[2.0, 4.0]).unwrap() - 3.6).abs() < 1e-15);
        assert!(m.predict_one_step(&[1.0]).is_err());
    }

    #[test]
    fn arma_prediction_examples() {
        let m = ArmaModel::new(vec![0.5], vec![0.2], 0, 0.0).unwrap();
        assert!((m.predict_one_step(&[2.0], &[1.0]).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(m.predict_one_step(&[2.0], &[0.0]).unwrap(), 1.0);
        assert!(m.predict_one_step(&[2.0], &[]).is_err());

        let ar = ArModel::new(vec![0.5, 0.3], 1.0).unwrap();
        let arma = ArmaModel::new(vec![0.5, 0.3], vec![0.0, 0.0], 0, 1.0).unwrap();
        let w = [2.0, 4.0];
        assert_eq!(
            ar.predict_one_step(&w).unwrap(),
            arma.predict_one_step(&w, &[7.0, -3.0]).unwrap()
        );
    }

    #[test]
    fn arma_q0_matches_ar() {
        let s = gen_ar_process(&[0.6, -0.2, 0.1], 2.0, 0.5, 800, 3).unwrap();
        let ar = fit_ar(&s, 3, FitOptions::default()).unwrap();
        let arma = fit_arma(&s, ArmaSpec::new(3, 0, 0), FitOptions::default()).unwrap();
        for (a, b) in ar.phi.iter().zip(&arma.phi) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((ar.intercept - arma.intercept).abs() < 1e-9);
    }

    #[test]
    fn arma11_recovery_single_seed() {
        let s = gen_arma_process(&[0.7], &[0.4], 0.0, 1.0, 20_000, 500, 1).unwrap();
        let m = fit_arma(&s, ArmaSpec::new(1, 1, 0).with_long_ar_order(20), FitOptions::default()).unwrap();
        assert!((m.phi[0] - 0.7).abs() < 0.05, "phi {}", m.phi[0]);
        assert!((m.theta[0] - 0.4).abs() < 0.10, "theta {}", m.theta[0]);
    }

    #[test]
    fn stage_two_design_has_fifteen_columns() {
        let s = gen_ar_process(&[0.5, 0.2], 10.0, 1.0, 15_512, 9).unwrap();
        let (design, target) = arma_design(s.values(), ArmaSpec::new(10, 5, 0), FitOptions::default()).unwrap();
        // Intercept plus 10 lags plus 5 residual lags.
        assert_eq!(design.cols - 1, 15);
        assert_eq!(design.rows, 15_502);
        assert_eq!(target.len(), 15_502);
    }

    #[test]
    fn arma_validation_errors() {
        let s = gen_ar_process(&[0.5], 0.0, 1.0, 30, 1).unwrap();
        assert!(matches!(
            fit_arma(&s, ArmaSpec::new(10, 5, 0), FitOptions::default()),
            Err(Error::InsufficientData { required: 37, .. })
        ));
        let s = gen_ar_process(&[0.5], 0.0, 1.0, 300, 1).unwrap();
        let bad = ArmaSpec::new(2, 2, 0).with_long_ar_order(2);
        assert!(fit_arma(&s, bad, FitOptions::default()).is_err());
    }

    #[test]
    fn ols_is_locally_optimal() {
        let s = gen_ar_process(&[0.4, 0.25], 3.0, 0.7, 400, 21).unwrap();
        let y = s.values();
        let m = fit_ar(&s, 2, FitOptions::default()).unwrap();
        let base = sse(&m, y);
        for k in 0..3 {
            for delta in [1e-3, -1e-3] {
                let mut pert = m.clone();
                if k == 0 {
                    pert.intercept += delta;
                } else {
                    pert.phi[k - 1] += delta;
                }
                assert!(sse(&pert, y) >= base);
            }
        }
    }

    #[test]
    fn shift_equivariance() {
        let s = gen_ar_process(&[0.5, 0.3], 1.0, 0.0, 300, 0).unwrap();
        let shifted = ts(s.values().iter().map(|v| v + 7.0).collect());
        let a = fit_ar(&s, 2, FitOptions::default()).unwrap();
        let b = fit_ar(&shifted, 2, FitOptions::default()).unwrap();
        for (x, y) in a.phi.iter().zip(&b.phi) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((b.mean().unwrap() - a.mean().unwrap() - 7.0).abs() < 1e-8);
    }

    #[test]
    fn differencing_and_integration_agree() {
        let w = [1.0, 4.0, 9.0, 16.0, 25.0];
        assert_eq!(difference(&w, 1), vec![3.0, 5.0, 7.0, 9.0]);
        assert_eq!(difference(&w, 2), vec![2.0, 2.0, 2.0]);
        // Next square is 36: second difference stays 2.
        assert_eq!(integrate_one(2.0, &w, 2), 36.0);
        assert_eq!(integrate_one(11.0, &w, 1), 36.0);
    }
}
