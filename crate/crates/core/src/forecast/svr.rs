//! Linear epsilon-insensitive support-vector regression trained in the primal.
//!
//! Minimises `1/(2C) |w|^2 + mean_i max(0, |y_i - w.x_i - b| - eps)` by
//! projected subgradient steps on `w` with step `C / t` (the strongly convex
//! schedule for regularisation `1/C`), an exact minimisation over the
//! unregularised bias after every step, and averaging of the second half of
//! the iterates.

use serde::{Deserialize, Serialize};

use super::linear::dot;
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub epochs: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            epsilon: 0.001,
            epochs: DEFAULT_EPOCHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvr {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: SvrParams,
    /// Mean epsilon-insensitive loss on the training rows.
    pub loss: f64,
    /// Fraction of training rows on or outside the epsilon tube.
    pub support_fraction: f64,
}

fn tube_loss(residuals: impl Iterator<Item = f64>, eps: f64) -> f64 {
    residuals.map(|r| (r.abs() - eps).max(0.0)).sum()
}

/// Midpoint of the minimiser interval of `b -> sum_i max(0, |r_i - b| - eps)`.
fn best_bias(residuals: &[f64], eps: f64) -> f64 {
    let mut lower: Vec<f64> = residuals.iter().map(|r| r - eps).collect();
    let mut upper: Vec<f64> = residuals.iter().map(|r| r + eps).collect();
    lower.sort_by(f64::total_cmp);
    upper.sort_by(f64::total_cmp);
    let n = residuals.len();
    // Slope just right of b: #{upper <= b} - #{lower > b}.
    let right_slope = |b: f64| {
        upper.partition_point(|&u| u <= b) as isize - (n - lower.partition_point(|&l| l <= b)) as isize
    };
    // Slope just left of b: #{upper < b} - #{lower >= b}.
    let left_slope = |b: f64| {
        upper.partition_point(|&u| u < b) as isize - (n - lower.partition_point(|&l| l < b)) as isize
    };
    let mut points: Vec<f64> = lower.iter().chain(&upper).copied().collect();
    points.sort_by(f64::total_cmp);
    let lo = points.iter().copied().find(|&b| right_slope(b) >= 0).unwrap_or(points[0]);
    let hi = points.iter().rev().copied().find(|&b| left_slope(b) <= 0).unwrap_or(lo);
    0.5 * (lo + hi.max(lo))
}

impl LinearSvr {
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], params: SvrParams) -> Result<Self> {
        if !(params.c > 0.0) {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if !(params.epsilon >= 0.0) {
            return Err(Error::InvalidParameter("epsilon must be non-negative".into()));
        }
        if params.epochs == 0 {
            return Err(Error::InvalidParameter("SVR needs at least one epoch".into()));
        }
        let n = inputs.len();
        if n == 0 || n != targets.len() {
            return Err(Error::InvalidParameter("SVR needs matching non-empty inputs and targets".into()));
        }
        let d = inputs[0].len();
        let lambda = 1.0 / params.c;
        let eps = params.epsilon;

        let mut w = vec![0.0; d];
        let mut b = best_bias(targets, eps);
        // Ball containing the optimum: lambda/2 |w*|^2 <= loss at w = 0.
        let loss0 = tube_loss(targets.iter().map(|y| y - b), eps) / n as f64;
        let radius = (2.0 * loss0 / lambda).sqrt();

        let mut avg = vec![0.0; d];
        let mut averaged = 0usize;
        let mut residuals = vec![0.0; n];
        let mut grad = vec![0.0; d];
        for t in 1..=params.epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (x, y) in inputs.iter().zip(targets) {
                let r = y - dot(&w, x) - b;
                if r > eps {
                    grad.iter_mut().zip(x).for_each(|(g, v)| *g -= v);
                } else if r < -eps {
                    grad.iter_mut().zip(x).for_each(|(g, v)| *g += v);
                }
            }
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - eta * lambda;
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi = shrink * *wi - eta * gi / n as f64;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                w.iter_mut().for_each(|wi| *wi *= radius / norm);
            }
            for (r, (x, y)) in residuals.iter_mut().zip(inputs.iter().zip(targets)) {
                *r = y - dot(&w, x);
            }
            b = best_bias(&residuals, eps);
            if t > params.epochs / 2 {
                avg.iter_mut().zip(&w).for_each(|(a, wi)| *a += wi);
                averaged += 1;
            }
        }
        let weights: Vec<f64> = avg.iter().map(|a| a / averaged as f64).collect();
        for (r, (x, y)) in residuals.iter_mut().zip(inputs.iter().zip(targets)) {
            *r = y - dot(&weights, x);
        }
        let bias = best_bias(&residuals, eps);
        let loss = tube_loss(residuals.iter().map(|r| r - bias), eps) / n as f64;
        // Rows strictly inside the tube carry no weight.
        let support = residuals.iter().filter(|r| (*r - bias).abs() >= eps).count();
        Ok(Self {
            weights,
            bias,
            params,
            loss,
            support_fraction: support as f64 / n as f64,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_is_centre_of_flat_minimum() {
        assert!((best_bias(&[0.1, 0.1, 0.1], 0.01) - 0.1).abs() < 1e-15);
        // Pure median when eps = 0.
        assert!((best_bias(&[1.0, 2.0, 10.0], 0.0) - 2.0).abs() < 1e-15);
        // Even count: any point between the middle pair; midpoint chosen.
        assert!((best_bias(&[1.0, 2.0, 4.0, 10.0], 0.0) - 3.0).abs() < 1e-15);
    }
}
