//! Ordinary least squares with intercept via the normal equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to the diagonal of the Gram matrix before factorisation.
pub const RIDGE_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Full least-squares fit.
    Ols,
    /// Least squares with constant columns held at slope zero.
    OlsDroppedConstant,
    /// Too few rows or a singular system: predicts the target mean.
    MeanOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// `[intercept, slope_1, …, slope_d]`.
    pub coefficients: Vec<f64>,
    pub kind: FitKind,
}

impl LinearFit {
    pub fn mean_only(targets: &[f64], dims: usize) -> LinearFit {
        let mean = if targets.is_empty() {
            0.0
        } else {
            targets.iter().sum::<f64>() / targets.len() as f64
        };
        let mut coefficients = vec![0.0; dims + 1];
        coefficients[0] = mean;
        LinearFit {
            coefficients,
            kind: FitKind::MeanOnly,
        }
    }

    pub fn dims(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    pub fn predict(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dims() {
            return Err(Error::Shape(format!(
                "point has {} values, model expects {}",
                point.len(),
                self.dims()
            )));
        }
        Ok(self.intercept() + self.slopes().iter().zip(point).map(|(b, x)| b * x).sum::<f64>())
    }
}

/// In-place Cholesky solve of `a·x = b` for a symmetric positive definite `a`
/// (row-major, `m × m`). Returns `None` if `a` is not positive definite.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * m + k] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= a[k * m + i] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    Some(b)
}

/// Least-squares fit of `targets ≈ β₀ + Σ βⱼ·xⱼ`.
///
/// Columns and targets are centred first so the intercept is not penalised by
/// the jitter. Constant columns get slope zero. Fewer than `d + 1` rows, or a
/// Gram matrix that fails to factor, yield the mean-only model.
pub fn fit_linear_model(rows: &[Vec<f64>], targets: &[f64]) -> Result<LinearFit> {
    if rows.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let Some(first) = rows.first() else {
        return Err(Error::InsufficientData("cannot fit a model on zero rows".into()));
    };
    let d = first.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("ragged rows".into()));
    }
    let n = rows.len();
    if n < d + 1 {
        return Ok(LinearFit::mean_only(targets, d));
    }

    let nf = n as f64;
    let y_mean = targets.iter().sum::<f64>() / nf;
    let x_mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let active: Vec<usize> = (0..d)
        .filter(|&j| {
            let v0 = rows[0][j];
            rows.iter().any(|r| r[j] != v0)
        })
        .collect();

    let m = active.len();
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (row, &y) in rows.iter().zip(targets) {
        let yc = y - y_mean;
        for (a, &ja) in active.iter().enumerate() {
            let xa = row[ja] - x_mean[ja];
            rhs[a] += xa * yc;
            for (b, &jb) in active.iter().enumerate().take(a + 1) {
                gram[a * m + b] += xa * (row[jb] - x_mean[jb]);
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[b * m + a] = gram[a * m + b];
        }
        gram[a * m + a] += RIDGE_JITTER;
    }

    let Some(beta) = cholesky_solve(gram, rhs, m) else {
        return Ok(LinearFit::mean_only(targets, d));
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Ok(LinearFit::mean_only(targets, d));
    }
    let mut coefficients = vec![0.0; d + 1];
    let mut intercept = y_mean;
    for (&j, &b) in active.iter().zip(&beta) {
        coefficients[j + 1] = b;
        intercept -= b * x_mean[j];
    }
    coefficients[0] = intercept;
    Ok(LinearFit {
        coefficients,
        kind: if m == d {
            FitKind::Ols
        } else {
            FitKind::OlsDroppedConstant
        },
    })
}
