//! Dense least squares via Householder QR.

use crate::error::{Error, Result};

/// Columns whose triangular diagonal falls below this fraction of their
/// original norm are treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Row-major `rows x cols` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coef: Vec<f64>,
    /// Residual sum of squares over the original (unaugmented) rows.
    pub rss: f64,
}

/// Minimizes `||A x - b||^2`, optionally plus `ridge * ||x||^2`.
///
/// With `ridge = None`, a rank-deficient `A` is reported as an error rather
/// than regularized.
pub fn lstsq(a: &Design, b: &[f64], ridge: Option<f64>) -> Result<LstsqSolution> {
    let (m0, n) = (a.rows, a.cols);
    if b.len() != m0 {
        return Err(Error::shape("least squares rhs", m0, b.len()));
    }
    let extra = if ridge.is_some() { n } else { 0 };
    let m = m0 + extra;
    if m < n || n == 0 {
        return Err(Error::InsufficientData {
            what: "least squares rows",
            required: n.max(1),
            actual: m,
        });
    }

    // Column-major working copy.
    let mut q = vec![0.0; m * n];
    for i in 0..m0 {
        for j in 0..n {
            q[j * m + i] = a.data[i * n + j];
        }
    }
    let mut rhs = vec![0.0; m];
    rhs[..m0].copy_from_slice(b);
    if let Some(lambda) = ridge {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("ridge penalty must be positive, got {lambda}")));
        }
        let s = lambda.sqrt();
        for j in 0..n {
            q[j * m + m0 + j] = s;
        }
    }
    if q.iter().chain(&rhs).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least squares input".into()));
    }

    let col_norms: Vec<f64> = (0..n).map(|j| norm(&q[j * m..(j + 1) * m])).collect();
    let mut diag = vec![0.0; n];
    let mut v = vec![0.0; m];

    for k in 0..n {
        let col = &q[k * m + k..(k + 1) * m];
        let alpha = norm(col);
        if alpha <= RANK_TOL * col_norms[k] || col_norms[k] == 0.0 {
            return Err(Error::RankDeficient { columns: n, column: k });
        }
        let alpha = if col[0] > 0.0 { -alpha } else { alpha };
        let len = m - k;
        v[..len].copy_from_slice(col);
        v[0] -= alpha;
        let vnorm2: f64 = v[..len].iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let c = &mut q[j * m + k..(j + 1) * m];
            let dot: f64 = c.iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (x, y) in c.iter_mut().zip(&v[..len]) {
                *x -= f * y;
            }
        }
        let r = &mut rhs[k..];
        let dot: f64 = r.iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        for (x, y) in r.iter_mut().zip(&v[..len]) {
            *x -= f * y;
        }
        // Column k is now (alpha, 0, ..., 0) below the diagonal.
        q[k * m + k] = alpha;
    }

    let mut coef = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= q[j * m + k] * coef[j];
        }
        coef[k] = s / diag[k];
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("least squares coefficients".into()));
    }

    let rss = (0..m0)
        .map(|i| {
            let fit: f64 = a.row(i).iter().zip(&coef).map(|(x, c)| x * c).sum();
            (b[i] - fit).powi(2)
        })
        .sum();
    Ok(LstsqSolution { coef, rss })
}

fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}
