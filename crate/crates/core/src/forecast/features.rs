use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::model::FillRateSeries;

pub const DEFAULT_WINDOW: usize = 7;

/// One supervised example: the rate of day `t` explained by the `window`
/// previous rates, the weekday of `t` and whether `t - 1` was a collection
/// day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    /// `lags[0]` is the rate of the previous day.
    pub lags: Vec<f64>,
    /// Monday first.
    pub day_of_week: [f64; 7],
    pub collected_yesterday: f64,
    pub target: f64,
}

impl FeatureRow {
    /// Lags, weekday one-hot and the collection flag, in that order.
    pub fn inputs(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.lags.len() + 8);
        x.extend_from_slice(&self.lags);
        x.extend_from_slice(&self.day_of_week);
        x.push(self.collected_yesterday);
        x
    }
}

pub fn weekday_one_hot(date: NaiveDate) -> [f64; 7] {
    let mut out = [0.0; 7];
    out[date.weekday().num_days_from_monday() as usize] = 1.0;
    out
}

/// Feature vector for the day whose lags are the last `window` entries of
/// `rates` (most recent last).
pub fn inputs_for(rates: &[f64], window: usize, date: NaiveDate, collected_yesterday: bool) -> Vec<f64> {
    debug_assert!(rates.len() >= window);
    let mut x: Vec<f64> = rates.iter().rev().take(window).copied().collect();
    x.extend_from_slice(&weekday_one_hot(date));
    x.push(if collected_yesterday { 1.0 } else { 0.0 });
    x
}

/// All rows of a series; row `k` targets day `window + k`.
pub fn build_rows(series: &FillRateSeries, window: usize) -> Vec<FeatureRow> {
    (window..series.len())
        .map(|t| FeatureRow {
            lags: (1..=window).map(|l| series.daily_rate[t - l]).collect(),
            day_of_week: weekday_one_hot(series.date_at(t)),
            collected_yesterday: if series.collected_yesterday[t] { 1.0 } else { 0.0 },
            target: series.daily_rate[t],
        })
        .collect()
}

/// Per-column z-score transform fitted on training inputs. Constant columns
/// are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(inputs: &[Vec<f64>]) -> Self {
        let d = inputs.first().map_or(0, Vec::len);
        let n = inputs.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for x in inputs {
            for ((s, v), m) in scale.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}
