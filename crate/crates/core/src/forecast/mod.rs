//! Fill-level forecasting.
//!
//! Sparse collection events are turned into gap-free daily rate series
//! ([`derive_daily_rates`]), rows of lagged rates plus calendar features are
//! built from them ([`features`]) and one of three regressors predicts the
//! next day's rate. Multi-day forecasts are produced by feeding every
//! prediction back into the lag window.

mod backtest;
pub mod features;
pub mod gp;
pub mod linalg;
pub mod linear;
mod series;
pub mod svr;

use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use backtest::{backtest, BacktestReport, ContainerBacktest};
pub use series::{collection_days, derive_daily_rates};

use crate::error::{Error, Result};
use crate::model::{Container, FillRateSeries, FillRecord, Forecast, ModelTag};
use features::{build_rows, inputs_for, FeatureRow, Standardizer, DEFAULT_WINDOW};
use gp::{grid_search, GaussianProcess, GpParams, GridSearch, DEFAULT_GRID};
use linear::LinearModel;
use svr::{LinearSvr, SvrParams};

/// Rows held out at the end of the training set when tuning the GP.
pub const GP_HOLDOUT_ROWS: usize = 7;
/// Extra rows beyond the window required before any model is fitted.
pub const MIN_EXTRA_ROWS: usize = 7;
/// Kernel models train on at most this many of the most recent rows.
pub const DEFAULT_MAX_TRAIN_ROWS: usize = 180;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpTuning {
    /// Every `(sf, l, sn)` combination of the listed values.
    Grid(Vec<f64>),
    Fixed(GpParams),
}

impl Default for GpTuning {
    fn default() -> Self {
        GpTuning::Grid(DEFAULT_GRID.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub window: usize,
    pub max_train_rows: usize,
    pub gp: GpTuning,
    pub svr: SvrParams,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            max_train_rows: DEFAULT_MAX_TRAIN_ROWS,
            gp: GpTuning::default(),
            svr: SvrParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Gp {
        standardizer: Standardizer,
        gp: GaussianProcess,
        search: Option<GridSearch>,
    },
    Svr {
        standardizer: Standardizer,
        svr: LinearSvr,
    },
}

/// A fitted one-step-ahead rate regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub model_tag: ModelTag,
    pub window: usize,
    pub trained_from: NaiveDate,
    pub trained_to: NaiveDate,
    pub rows: usize,
    pub fitted: FittedModel,
}

impl RegressionModel {
    /// Predicted rate for one raw feature vector (lags, weekday, flag).
    pub fn predict_rate(&self, inputs: &[f64]) -> f64 {
        match &self.fitted {
            FittedModel::Linear(m) => m.predict(inputs),
            FittedModel::Gp { standardizer, gp, .. } => gp.predict_mean(&standardizer.apply(inputs)),
            FittedModel::Svr { standardizer, svr } => svr.predict(&standardizer.apply(inputs)),
        }
    }
}

fn training_rows(series: &FillRateSeries, window: usize) -> Result<Vec<FeatureRow>> {
    if window == 0 {
        return Err(Error::InvalidParameter("feature window must be at least 1".into()));
    }
    if series.len() < window + MIN_EXTRA_ROWS {
        return Err(Error::InsufficientHistory(format!(
            "container {} has {} days, window {window} needs at least {}",
            series.container_id,
            series.len(),
            window + MIN_EXTRA_ROWS
        )));
    }
    Ok(build_rows(series, window))
}

fn wrap(tag: ModelTag, series: &FillRateSeries, window: usize, rows: usize, fitted: FittedModel) -> RegressionModel {
    RegressionModel {
        model_tag: tag,
        window,
        trained_from: series.date_at(series.len() - rows),
        trained_to: series.date_at(series.len() - 1),
        rows,
        fitted,
    }
}

fn recent(rows: Vec<FeatureRow>, max_rows: usize) -> Vec<FeatureRow> {
    let skip = rows.len().saturating_sub(max_rows.max(1));
    rows.into_iter().skip(skip).collect()
}

pub fn fit_linear(series: &FillRateSeries, window: usize) -> Result<RegressionModel> {
    let rows = training_rows(series, window)?;
    let model = LinearModel::fit(&rows)?;
    Ok(wrap(ModelTag::Linear, series, window, rows.len(), FittedModel::Linear(model)))
}

/// GP on standardised inputs, tuned by grid search or with fixed parameters.
pub fn fit_gp(series: &FillRateSeries, window: usize, tuning: &GpTuning, max_rows: usize) -> Result<RegressionModel> {
    let rows = recent(training_rows(series, window)?, max_rows);
    let raw: Vec<Vec<f64>> = rows.iter().map(FeatureRow::inputs).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let standardizer = Standardizer::fit(&raw);
    let inputs: Vec<Vec<f64>> = raw.iter().map(|x| standardizer.apply(x)).collect();
    let (params, search) = match tuning {
        GpTuning::Fixed(p) => (*p, None),
        GpTuning::Grid(values) if rows.len() > GP_HOLDOUT_ROWS => {
            let s = grid_search(&inputs, &targets, &GpParams::grid(values), GP_HOLDOUT_ROWS)?;
            (s.selected, Some(s))
        }
        GpTuning::Grid(_) => (GpParams::default(), None),
    };
    let n = rows.len();
    let gp = GaussianProcess::fit(inputs, &targets, params)?;
    Ok(wrap(
        ModelTag::Gp,
        series,
        window,
        n,
        FittedModel::Gp {
            standardizer,
            gp,
            search,
        },
    ))
}

pub fn fit_svr(series: &FillRateSeries, window: usize, params: SvrParams, max_rows: usize) -> Result<RegressionModel> {
    let rows = recent(training_rows(series, window)?, max_rows);
    let raw: Vec<Vec<f64>> = rows.iter().map(FeatureRow::inputs).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let standardizer = Standardizer::fit(&raw);
    let inputs: Vec<Vec<f64>> = raw.iter().map(|x| standardizer.apply(x)).collect();
    let svr = LinearSvr::fit(&inputs, &targets, params)?;
    Ok(wrap(ModelTag::Svr, series, window, rows.len(), FittedModel::Svr { standardizer, svr }))
}

pub fn fit(tag: ModelTag, series: &FillRateSeries, config: &ForecastConfig) -> Result<RegressionModel> {
    match tag {
        ModelTag::Linear => fit_linear(series, config.window),
        ModelTag::Gp => fit_gp(series, config.window, &config.gp, config.max_train_rows),
        ModelTag::Svr => fit_svr(series, config.window, config.svr, config.max_train_rows),
    }
}

/// Iterated one-step-ahead rates for the `horizon` days after the series.
///
/// Each prediction is clamped at zero and appended to the lag window.
/// `collections` lists the days on which the container is known to be
/// emptied; it drives the collected-yesterday feature. The series' own last
/// day counts as a collection.
pub fn forecast_rates(
    model: &RegressionModel,
    series: &FillRateSeries,
    horizon: usize,
    collections: &BTreeSet<NaiveDate>,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1 day".into()));
    }
    if series.len() < model.window {
        return Err(Error::WindowMismatch {
            model: model.window,
            series: series.len(),
        });
    }
    let end = series.end_date().expect("non-empty series");
    let mut lags: Vec<f64> = series.daily_rate[series.len() - model.window..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for h in 1..=horizon as u64 {
        let date = end + chrono::Days::new(h);
        let yesterday = date.pred_opt().expect("date underflow");
        let cy = yesterday == end || collections.contains(&yesterday);
        let x = inputs_for(&lags, model.window, date, cy);
        let rate = model.predict_rate(&x).max(0.0);
        out.push(rate);
        lags.remove(0);
        lags.push(rate);
    }
    Ok(out)
}

/// Cumulative fill for each of the `horizon` days after the series, starting
/// from `last_fill` at the series' last day.
pub fn predict(
    model: &RegressionModel,
    series: &FillRateSeries,
    horizon: usize,
    last_fill: f64,
) -> Result<Vec<Forecast>> {
    let rates = forecast_rates(model, series, horizon, &BTreeSet::new())?;
    let end = series.end_date().expect("non-empty series");
    Ok(accumulate(&series.container_id, end, last_fill, &rates, model.model_tag))
}

fn accumulate(id: &str, end: NaiveDate, last_fill: f64, rates: &[f64], tag: ModelTag) -> Vec<Forecast> {
    let mut fill = last_fill;
    rates
        .iter()
        .enumerate()
        .map(|(k, r)| {
            fill += r;
            Forecast {
                container_id: id.to_string(),
                date: end + chrono::Days::new(k as u64 + 1),
                predicted_fill: fill.clamp(0.0, 1.0),
                overflow: fill > 1.0,
                model_tag: tag,
            }
        })
        .collect()
}

/// Observed (or reconstructed) fill of a container on a day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillObservation {
    pub container_id: String,
    pub date: NaiveDate,
    pub fill: f64,
}

/// Mean absolute error in percentage points over the `(container, date)`
/// pairs present in both lists.
pub fn evaluate_mae(forecasts: &[Forecast], actuals: &[FillObservation]) -> Result<f64> {
    let index: HashMap<(&str, NaiveDate), f64> = actuals
        .iter()
        .map(|a| ((a.container_id.as_str(), a.date), a.fill))
        .collect();
    let (sum, n) = forecasts
        .iter()
        .filter_map(|f| index.get(&(f.container_id.as_str(), f.date)).map(|a| (f.predicted_fill - a).abs()))
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    if n == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(sum / n as f64 * 100.0)
}

/// Outcome of forecasting one container for a planning date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetForecast {
    pub forecasts: Vec<Forecast>,
    /// Containers that could not be forecast, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Fill forecast for `date` of every container whose history ends before
/// it. Containers are fitted in parallel; output order follows `containers`.
pub fn forecast_fleet(
    containers: &[Container],
    records: &[FillRecord],
    date: NaiveDate,
    tag: ModelTag,
    config: &ForecastConfig,
) -> FleetForecast {
    let mut by_container: HashMap<&str, Vec<FillRecord>> = HashMap::new();
    for r in records.iter().filter(|r| r.date < date) {
        by_container.entry(r.container_id.as_str()).or_default().push(r.clone());
    }
    let results: Vec<std::result::Result<Forecast, (String, String)>> = containers
        .par_iter()
        .map(|c| {
            let recs = by_container.get(c.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            forecast_one(c, recs, date, tag, config).map_err(|e| (c.id.clone(), e.to_string()))
        })
        .collect();
    let mut out = FleetForecast {
        forecasts: Vec::new(),
        skipped: Vec::new(),
    };
    for r in results {
        match r {
            Ok(f) => out.forecasts.push(f),
            Err(s) => out.skipped.push(s),
        }
    }
    out
}

fn forecast_one(
    container: &Container,
    records: &[FillRecord],
    date: NaiveDate,
    tag: ModelTag,
    config: &ForecastConfig,
) -> Result<Forecast> {
    let series = derive_daily_rates(records, container)?;
    let model = fit(tag, &series, config)?;
    let end = series.end_date().expect("non-empty series");
    let horizon = (date - end).num_days() as usize;
    let rates = forecast_rates(&model, &series, horizon, &BTreeSet::new())?;
    Ok(accumulate(&container.id, end, 0.0, &rates, tag).pop().expect("horizon >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from(rates: Vec<f64>) -> FillRateSeries {
        let n = rates.len();
        FillRateSeries {
            container_id: "C1".into(),
            start_date: NaiveDate::from_ymd_opt(2025, 1, 6).unwrap(),
            daily_rate: rates,
            collected_yesterday: vec![false; n],
        }
    }

    #[test]
    fn too_short_series_is_rejected() {
        let s = series_from(vec![0.1; 13]);
        let err = fit_linear(&s, 7).unwrap_err();
        assert!(err.to_string().contains("insufficient history"), "{err}");
        assert!(fit_linear(&series_from(vec![0.1; 14]), 7).is_ok());
    }

    #[test]
    fn zero_horizon_is_an_error() {
        let s = series_from(vec![0.1; 30]);
        let m = fit_linear(&s, 7).unwrap();
        assert!(predict(&m, &s, 0, 0.5).is_err());
    }

    #[test]
    fn window_mismatch_is_an_error() {
        let s = series_from(vec![0.1; 30]);
        let m = fit_linear(&s, 7).unwrap();
        let short = series_from(vec![0.1; 5]);
        assert!(matches!(predict(&m, &short, 1, 0.0), Err(Error::WindowMismatch { .. })));
    }

    #[test]
    fn overflow_is_clamped_and_flagged() {
        let f = accumulate("C1", NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(), 0.95, &[0.1, 0.1], ModelTag::Linear);
        assert!((f[0].predicted_fill - 1.0).abs() < 1e-12 && f[0].overflow);
        assert_eq!(f[1].predicted_fill, 1.0);
        assert!(f[1].overflow);
    }

    #[test]
    fn mae_is_in_percentage_points() {
        let d1 = NaiveDate::from_ymd_opt(2025, 3, 1).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2025, 3, 2).unwrap();
        let fc = |d, p| Forecast {
            container_id: "A".into(),
            date: d,
            predicted_fill: p,
            overflow: false,
            model_tag: ModelTag::Gp,
        };
        let ob = |d, v| FillObservation {
            container_id: "A".into(),
            date: d,
            fill: v,
        };
        let mae = evaluate_mae(&[fc(d1, 0.50), fc(d2, 0.60)], &[ob(d1, 0.52), ob(d2, 0.57)]).unwrap();
        assert!((mae - 2.5).abs() < 1e-9);
        assert_eq!(evaluate_mae(&[fc(d1, 0.3)], &[ob(d1, 0.3)]).unwrap(), 0.0);
        assert!(matches!(evaluate_mae(&[fc(d1, 0.3)], &[ob(d2, 0.3)]), Err(Error::NoOverlap)));
    }
}
