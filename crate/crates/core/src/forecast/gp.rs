//! Zero-mean Gaussian-process regression with a squared-exponential kernel.
//!
//! `k(x, x') = sf^2 exp(-|x - x'|^2 / (2 l^2))`, observation noise `sn^2`
//! on the diagonal of the Gram matrix. The fitted state keeps the Cholesky
//! factor `L` of `K + sn^2 I` and the weights `alpha = (K + sn^2 I)^-1 y`,
//! so the predictive mean is `k_*^T alpha`.

use serde::{Deserialize, Serialize};

use super::linalg::{cholesky_in_place, cholesky_solve, forward_solve};
use crate::error::{Error, Result};

pub const JITTER: f64 = 1e-8;
pub const MAX_JITTER_ATTEMPTS: usize = 3;
/// Default hyperparameter grid, applied to each of `sf`, `l` and `sn`.
pub const DEFAULT_GRID: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub signal_sd: f64,
    pub length_scale: f64,
    pub noise_sd: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            signal_sd: 1.0,
            length_scale: 1.0,
            noise_sd: 0.1,
        }
    }
}

impl GpParams {
    /// Cartesian product in `(signal, length, noise)` order.
    pub fn grid(values: &[f64]) -> Vec<GpParams> {
        let mut out = Vec::with_capacity(values.len().pow(3));
        for &signal_sd in values {
            for &length_scale in values {
                for &noise_sd in values {
                    out.push(GpParams {
                        signal_sd,
                        length_scale,
                        noise_sd,
                    });
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if !(self.signal_sd > 0.0 && self.length_scale > 0.0 && self.noise_sd >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "GP parameters must satisfy sf > 0, l > 0, sn >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn kernel_from_sq(params: &GpParams, sq: f64) -> f64 {
    params.signal_sd.powi(2) * (-sq / (2.0 * params.length_scale.powi(2))).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProcess {
    pub params: GpParams,
    pub inputs: Vec<Vec<f64>>,
    /// Row-major lower factor of the regularised Gram matrix.
    pub cholesky: Vec<f64>,
    pub weights: Vec<f64>,
    /// Total jitter that had to be added to the diagonal.
    pub jitter: f64,
}

/// Factorises the Gram matrix described by pairwise squared distances.
fn factorise(sq: &[f64], n: usize, targets: &[f64], params: &GpParams) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let noise = params.noise_sd.powi(2);
    let mut gram: Vec<f64> = sq.iter().map(|&d| kernel_from_sq(params, d)).collect();
    for i in 0..n {
        gram[i * n + i] += noise;
    }
    let mut jitter = 0.0;
    for attempt in 0..=MAX_JITTER_ATTEMPTS {
        if attempt > 0 {
            jitter += JITTER;
            for i in 0..n {
                gram[i * n + i] += JITTER;
            }
        }
        let mut l = gram.clone();
        if cholesky_in_place(&mut l, n, 1e-13).is_ok() {
            let w = cholesky_solve(&l, n, targets);
            return Ok((l, w, jitter));
        }
    }
    Err(Error::Numerical(format!(
        "GP Gram matrix not positive definite after {MAX_JITTER_ATTEMPTS} jitter additions ({params:?})"
    )))
}

fn pairwise_sq(inputs: &[Vec<f64>]) -> Vec<f64> {
    let n = inputs.len();
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let d = squared_distance(&inputs[i], &inputs[j]);
            sq[i * n + j] = d;
            sq[j * n + i] = d;
        }
    }
    sq
}

fn sub_square(sq: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        out.extend_from_slice(&sq[i * n..i * n + m]);
    }
    out
}

impl GaussianProcess {
    pub fn fit(inputs: Vec<Vec<f64>>, targets: &[f64], params: GpParams) -> Result<Self> {
        params.validate()?;
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::InvalidParameter(format!(
                "GP needs matching non-empty inputs and targets ({} vs {})",
                inputs.len(),
                targets.len()
            )));
        }
        let n = inputs.len();
        let sq = pairwise_sq(&inputs);
        let (cholesky, weights, jitter) = factorise(&sq, n, targets, &params)?;
        Ok(Self {
            params,
            inputs,
            cholesky,
            weights,
            jitter,
        })
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        kernel_from_sq(&self.params, squared_distance(a, b))
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        self.inputs.iter().map(|xi| self.kernel(xi, x)).collect()
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.cross(x).iter().zip(&self.weights).map(|(k, w)| k * w).sum()
    }

    /// Posterior variance of the latent function at `x`.
    pub fn predict_variance(&self, x: &[f64]) -> f64 {
        let k = self.cross(x);
        let v = forward_solve(&self.cholesky, self.inputs.len(), &k);
        (self.params.signal_sd.powi(2) - v.iter().map(|x| x * x).sum::<f64>()).max(0.0)
    }
}

/// Outcome of the hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub selected: GpParams,
    pub holdout_mae: f64,
    pub evaluated: usize,
}

/// Picks the parameters minimising the mean absolute one-step error on the
/// last `holdout` rows after fitting on the rows before them. Earlier grid
/// entries win ties; entries whose Gram matrix cannot be factorised are
/// skipped.
pub fn grid_search(inputs: &[Vec<f64>], targets: &[f64], grid: &[GpParams], holdout: usize) -> Result<GridSearch> {
    let n = inputs.len();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty GP grid".into()));
    }
    if n <= holdout {
        return Err(Error::InsufficientHistory(format!(
            "{n} rows cannot hold out {holdout} for GP tuning"
        )));
    }
    let m = n - holdout;
    let sq = pairwise_sq(inputs);
    let train_sq = sub_square(&sq, n, m);
    let mut best: Option<(GpParams, f64)> = None;
    let mut evaluated = 0;
    for params in grid {
        params.validate()?;
        let Ok((_, weights, _)) = factorise(&train_sq, m, &targets[..m], params) else {
            continue;
        };
        evaluated += 1;
        let mae = (m..n)
            .map(|t| {
                let mean: f64 = (0..m).map(|i| kernel_from_sq(params, sq[t * n + i]) * weights[i]).sum();
                (mean - targets[t]).abs()
            })
            .sum::<f64>()
            / holdout as f64;
        if best.is_none_or(|(_, b)| mae < b) {
            best = Some((*params, mae));
        }
    }
    let (selected, holdout_mae) = best.ok_or_else(|| Error::Numerical("no GP grid entry could be factorised".into()))?;
    Ok(GridSearch {
        selected,
        holdout_mae,
        evaluated,
    })
}
