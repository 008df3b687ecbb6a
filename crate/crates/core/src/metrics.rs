//! Point-forecast error scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorScores {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

impl ErrorScores {
    pub fn compute(predictions: &[f64], actuals: &[f64]) -> Result<Self> {
        Ok(Self {
            mae: mae(predictions, actuals)?,
            rmse: rmse(predictions, actuals)?,
            n: predictions.len(),
        })
    }
}

fn check(predictions: &[f64], actuals: &[f64]) -> Result<()> {
    if predictions.len() != actuals.len() {
        return Err(Error::shape("error scores", predictions.len(), actuals.len()));
    }
    if predictions.is_empty() {
        return Err(Error::InsufficientData {
            what: "error scores",
            required: 1,
            actual: 0,
        });
    }
    if predictions.iter().chain(actuals).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction or actual value".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check(predictions, actuals)?;
    let sum: f64 = predictions.iter().zip(actuals).map(|(p, a)| (p - a).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check(predictions, actuals)?;
    let sum: f64 = predictions.iter().zip(actuals).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let a = [1.0, -2.0, 3.5];
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn hand_values() {
        assert_eq!(mae(&[0.0, 0.0], &[3.0, -3.0]).unwrap(), 3.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535534).abs() < 1e-6);
    }

    #[test]
    fn constant_error_gives_equal_scores() {
        let p = [1.0, 2.0, 3.0];
        let a = [1.5, 2.5, 3.5];
        let s = ErrorScores::compute(&p, &a).unwrap();
        assert!((s.mae - 0.5).abs() < 1e-15);
        assert!((s.rmse - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sign_flip_symmetry() {
        let p = [0.25, -1.0, 4.0];
        let a = [1.0, 1.0, 1.0];
        let flipped: Vec<f64> = p.iter().zip(&a).map(|(p, a)| 2.0 * a - p).collect();
        assert_eq!(mae(&p, &a).unwrap(), mae(&flipped, &a).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[f64::NAN], &[1.0]).is_err());
    }
}
