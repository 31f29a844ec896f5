use serde::{Deserialize, Serialize};

use super::features::{FeatureRow, Standardizer};
use super::linalg::{cholesky_in_place, cholesky_solve};
use crate::error::{Error, Result};

/// Ridge term used when the normal equations are rank deficient.
pub const RIDGE_FALLBACK: f64 = 1e-8;

/// Ordinary least squares on `[lags.., Mon..Sat, collected_yesterday]` plus
/// an intercept.
///
/// Sunday is the reference weekday, which keeps the weekday dummies from
/// being collinear with the intercept. Columns are standardised before the
/// solve and the intercept is recovered from the means, so the fallback
/// ridge acts on unit-scale coefficients and never on the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Slopes in standardised column space.
    pub coefficients: Vec<f64>,
    pub standardizer: Standardizer,
    pub target_mean: f64,
    pub residual_sum_of_squares: f64,
    /// `Some(lambda)` when the ridge fallback was needed.
    pub ridge: Option<f64>,
}

fn design(inputs: &[f64]) -> Vec<f64> {
    // inputs = lags, 7 weekday flags, collected_yesterday
    let n = inputs.len();
    let mut x = Vec::with_capacity(n - 1);
    x.extend_from_slice(&inputs[..n - 2]);
    x.push(inputs[n - 1]);
    x
}

impl LinearModel {
    pub fn fit(rows: &[FeatureRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientHistory("no training rows".into()));
        }
        let raw: Vec<Vec<f64>> = rows.iter().map(|r| design(&r.inputs())).collect();
        let standardizer = Standardizer::fit(&raw);
        let xs: Vec<Vec<f64>> = raw.iter().map(|x| standardizer.apply(x)).collect();
        let target_mean = rows.iter().map(|r| r.target).sum::<f64>() / rows.len() as f64;

        let p = xs[0].len();
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        for (x, row) in xs.iter().zip(rows) {
            let y = row.target - target_mean;
            for i in 0..p {
                xty[i] += x[i] * y;
                for j in 0..=i {
                    xtx[i * p + j] += x[i] * x[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                xtx[j * p + i] = xtx[i * p + j];
            }
        }

        let mut ridge = None;
        let mut l = xtx.clone();
        if cholesky_in_place(&mut l, p, 1e-10).is_err() {
            l = xtx;
            for i in 0..p {
                l[i * p + i] += RIDGE_FALLBACK;
            }
            cholesky_in_place(&mut l, p, 0.0)
                .map_err(|k| Error::Numerical(format!("ridge-regularised normal equations singular at {k}")))?;
            ridge = Some(RIDGE_FALLBACK);
        }
        let coefficients = cholesky_solve(&l, p, &xty);
        let mut model = Self {
            coefficients,
            standardizer,
            target_mean,
            residual_sum_of_squares: 0.0,
            ridge,
        };
        model.residual_sum_of_squares = rows
            .iter()
            .map(|r| (model.predict(&r.inputs()) - r.target).powi(2))
            .sum();
        Ok(model)
    }

    pub fn predict(&self, inputs: &[f64]) -> f64 {
        self.target_mean + dot(&self.standardizer.apply(&design(inputs)), &self.coefficients)
    }

    /// Intercept on the raw feature scale.
    pub fn intercept(&self) -> f64 {
        let shift: f64 = self
            .coefficients
            .iter()
            .zip(&self.standardizer.mean)
            .zip(&self.standardizer.scale)
            .map(|((b, m), s)| b * m / s)
            .sum();
        self.target_mean - shift
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
