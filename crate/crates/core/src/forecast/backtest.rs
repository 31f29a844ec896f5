//! Backtest over the last days of the history.
//!
//! Models are fitted on everything before the test window and forecast the
//! whole window in one pass. On each test day the predicted fill is the sum
//! of predicted rates since the latest real collection before that day; the
//! actual fill is the same sum over the rates reconstructed from the full
//! history. The naive baseline repeats the last training rate.

use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_daily_rates, evaluate_mae, fit, forecast_rates, FillObservation, ForecastConfig};
use crate::error::{Error, Result};
use crate::model::{Container, FillRecord, Forecast, ModelTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerBacktest {
    pub container_id: String,
    pub days: usize,
    pub model_mae: f64,
    pub baseline_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub model_tag: ModelTag,
    pub horizon: usize,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub containers: Vec<ContainerBacktest>,
    pub skipped: Vec<(String, String)>,
    pub mean_model_mae: f64,
    pub mean_baseline_mae: f64,
    /// Share of evaluated containers where the model beats the baseline.
    pub beat_fraction: f64,
}

pub fn backtest(
    containers: &[Container],
    records: &[FillRecord],
    horizon: usize,
    tag: ModelTag,
    config: &ForecastConfig,
) -> Result<BacktestReport> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("backtest horizon must be at least 1 day".into()));
    }
    let test_end = records
        .iter()
        .map(|r| r.date)
        .max()
        .ok_or_else(|| Error::InsufficientHistory("empty history".into()))?;
    let test_start = test_end - chrono::Days::new(horizon as u64 - 1);

    let mut by_container: HashMap<&str, Vec<FillRecord>> = HashMap::new();
    for r in records {
        by_container.entry(r.container_id.as_str()).or_default().push(r.clone());
    }
    let results: Vec<std::result::Result<ContainerBacktest, (String, String)>> = containers
        .par_iter()
        .map(|c| {
            let recs = by_container.get(c.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            one(c, recs, test_start, test_end, tag, config).map_err(|e| (c.id.clone(), e.to_string()))
        })
        .collect();

    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(b) => evaluated.push(b),
            Err(s) => skipped.push(s),
        }
    }
    let n = evaluated.len().max(1) as f64;
    Ok(BacktestReport {
        model_tag: tag,
        horizon,
        test_start,
        test_end,
        mean_model_mae: evaluated.iter().map(|b| b.model_mae).sum::<f64>() / n,
        mean_baseline_mae: evaluated.iter().map(|b| b.baseline_mae).sum::<f64>() / n,
        beat_fraction: evaluated.iter().filter(|b| b.model_mae < b.baseline_mae).count() as f64 / n,
        containers: evaluated,
        skipped,
    })
}

fn one(
    container: &Container,
    records: &[FillRecord],
    test_start: NaiveDate,
    test_end: NaiveDate,
    tag: ModelTag,
    config: &ForecastConfig,
) -> Result<ContainerBacktest> {
    let train: Vec<FillRecord> = records.iter().filter(|r| r.date < test_start).cloned().collect();
    let train_series = derive_daily_rates(&train, container)?;
    let full = derive_daily_rates(records, container)?;
    let collections: BTreeSet<NaiveDate> = records.iter().map(|r| r.date).collect();

    let train_end = train_series.end_date().expect("non-empty series");
    let span = (test_end - train_end).num_days() as usize;
    let model = fit(tag, &train_series, config)?;
    let predicted = forecast_rates(&model, &train_series, span, &collections)?;
    let last_rate = *train_series.daily_rate.last().expect("non-empty series");
    let full_end = full.end_date().expect("non-empty series");

    let offset = |d: NaiveDate| (d - train_end).num_days() as usize - 1;
    let full_index = |d: NaiveDate| (d - full.start_date).num_days() as usize;
    let mut model_fc = Vec::new();
    let mut baseline_fc = Vec::new();
    let mut actual = Vec::new();
    let mut day = test_start;
    while day <= test_end.min(full_end) {
        let last = *collections.range(..day).next_back().expect("train end precedes test window");
        let from = last + chrono::Days::new(1);
        let p: f64 = predicted[offset(from)..=offset(day)].iter().sum();
        let days = (day - last).num_days() as f64;
        let a: f64 = full.daily_rate[full_index(from)..=full_index(day)].iter().sum();
        let fc = |fill: f64| Forecast {
            container_id: container.id.clone(),
            date: day,
            predicted_fill: fill.clamp(0.0, 1.0),
            overflow: fill > 1.0,
            model_tag: tag,
        };
        model_fc.push(fc(p));
        baseline_fc.push(fc(last_rate * days));
        actual.push(FillObservation {
            container_id: container.id.clone(),
            date: day,
            fill: a.clamp(0.0, 1.0),
        });
        day = day.succ_opt().expect("date overflow");
    }
    Ok(ContainerBacktest {
        container_id: container.id.clone(),
        days: actual.len(),
        model_mae: evaluate_mae(&model_fc, &actual)?,
        baseline_mae: evaluate_mae(&baseline_fc, &actual)?,
    })
}
