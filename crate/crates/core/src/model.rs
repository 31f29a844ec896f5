//! Domain types shared by every stage of the planner.
//!
//! Demand is always carried in kilograms (`fill_fraction * capacity_kg`);
//! fill levels are dimensionless fractions in `[0, 1]`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default penalty per unassigned penalized container, in meters.
pub const DEFAULT_PENALTY: f64 = 500.0;

/// Geographic coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// A collection point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub id: String,
    pub location: GeoPoint,
    pub capacity_kg: f64,
    pub unload_time_s: f64,
    /// Reachable only by a small vehicle (narrow streets).
    pub small_only: bool,
    pub has_sensor: bool,
    #[serde(default)]
    pub address: String,
    #[serde(default)]
    pub group: String,
}

/// A collection truck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: String,
    pub capacity_kg: f64,
    /// Small enough to serve `small_only` containers.
    pub small: bool,
    pub cost_per_km: f64,
    #[serde(default)]
    pub registration: String,
}

impl Vehicle {
    pub fn can_serve(&self, container: &Container) -> bool {
        self.small || !container.small_only
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CostMatrixData {
    ids: Vec<String>,
    distance: Vec<f64>,
    duration: Vec<f64>,
}

/// Asymmetric distance (m) and duration (s) matrices over the depot and the
/// containers. Node 0 is the depot; node `k >= 1` is `ids[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostMatrixData", into = "CostMatrixData")]
pub struct CostMatrix {
    ids: Vec<String>,
    distance: Vec<f64>,
    duration: Vec<f64>,
    index: HashMap<String, usize>,
}

impl TryFrom<CostMatrixData> for CostMatrix {
    type Error = Error;

    fn try_from(d: CostMatrixData) -> Result<Self> {
        CostMatrix::new(d.ids, d.distance, d.duration)
    }
}

impl From<CostMatrix> for CostMatrixData {
    fn from(m: CostMatrix) -> Self {
        CostMatrixData {
            ids: m.ids,
            distance: m.distance,
            duration: m.duration,
        }
    }
}

impl CostMatrix {
    /// Builds a matrix from row-major `(n+1)^2` grids, validating every
    /// invariant (square shape, zero diagonal, finite non-negative entries,
    /// unique ids).
    pub fn new(ids: Vec<String>, distance: Vec<f64>, duration: Vec<f64>) -> Result<Self> {
        let n = ids.len() + 1;
        for (name, grid) in [("distance", &distance), ("duration", &duration)] {
            if grid.len() != n * n {
                return Err(Error::InvalidMatrix(format!(
                    "{name} grid has {} entries, expected {n}x{n}",
                    grid.len()
                )));
            }
            for (k, &v) in grid.iter().enumerate() {
                let (row, col) = (k / n, k % n);
                if !v.is_finite() {
                    return Err(Error::InvalidMatrix(format!(
                        "non-finite entry ({row},{col}) in {name}"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "negative entry ({row},{col}) in {name}"
                    )));
                }
                if row == col && v != 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "non-zero diagonal entry ({row},{col}) in {name}"
                    )));
                }
            }
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (k, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), k + 1).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            ids,
            distance,
            duration,
            index,
        })
    }

    /// Number of nodes including the depot.
    pub fn node_count(&self) -> usize {
        self.ids.len() + 1
    }

    /// Container ids in node order (node 1 first).
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    #[inline]
    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.distance[from * self.node_count() + to]
    }

    #[inline]
    pub fn duration(&self, from: usize, to: usize) -> f64 {
        self.duration[from * self.node_count() + to]
    }

    pub fn distance_grid(&self) -> &[f64] {
        &self.distance
    }

    pub fn duration_grid(&self) -> &[f64] {
        &self.duration
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.node_count();
        (0..n).all(|i| (i + 1..n).all(|j| self.distance(i, j) == self.distance(j, i)))
    }
}

/// A container selected for a shift together with the load it is expected to
/// hold on that day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub container: Container,
    pub demand_kg: f64,
}

/// Everything the router needs for one planning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub depot: GeoPoint,
    pub tasks: Vec<Task>,
    pub vehicles: Vec<Vehicle>,
    pub matrix: Arc<CostMatrix>,
    pub penalty: f64,
}

impl PlanningInstance {
    pub fn new(
        depot: GeoPoint,
        tasks: Vec<Task>,
        vehicles: Vec<Vehicle>,
        matrix: Arc<CostMatrix>,
    ) -> Self {
        Self {
            depot,
            tasks,
            vehicles,
            matrix,
            penalty: DEFAULT_PENALTY,
        }
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.container.id == id)
    }

    pub fn vehicle(&self, id: &str) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.id == id)
    }
}

/// One breached invariant found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl Violation {
    pub fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

/// Checks every type invariant of a planning instance. An empty list means
/// the instance is valid. A `small_only` container without any small vehicle
/// is reported but the instance stays usable (partially infeasible).
pub fn validate_instance(instance: &PlanningInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if !instance.depot.is_valid() {
        out.push(Violation::new("depot", "coordinate out of range"));
    }
    if !(instance.penalty > 0.0) {
        out.push(Violation::new("instance", "penalty must be positive"));
    }

    let mut seen = HashSet::new();
    let has_small = instance.vehicles.iter().any(|v| v.small);
    for task in &instance.tasks {
        let c = &task.container;
        let who = format!("container {}", c.id);
        if !seen.insert(c.id.as_str()) {
            out.push(Violation::new(&who, "duplicate id"));
        }
        if !(c.capacity_kg > 0.0) {
            out.push(Violation::new(&who, "capacity must be positive"));
        }
        if !(c.unload_time_s >= 0.0) {
            out.push(Violation::new(&who, "unload time must be non-negative"));
        }
        if !c.location.is_valid() {
            out.push(Violation::new(&who, "coordinate out of range"));
        }
        if !(task.demand_kg >= 0.0) {
            out.push(Violation::new(&who, "negative demand"));
        } else if task.demand_kg > c.capacity_kg {
            out.push(Violation::new(&who, "demand exceeds capacity"));
        }
        if c.small_only && !has_small {
            out.push(Violation::new(&who, "no compatible vehicle"));
        }
        if instance.matrix.index_of(&c.id).is_none() {
            out.push(Violation::new(&who, "missing from cost matrix"));
        }
    }

    if instance.vehicles.is_empty() {
        out.push(Violation::new("fleet", "at least one vehicle required"));
    }
    let mut seen = HashSet::new();
    for v in &instance.vehicles {
        let who = format!("vehicle {}", v.id);
        if !seen.insert(v.id.as_str()) {
            out.push(Violation::new(&who, "duplicate id"));
        }
        if !(v.capacity_kg > 0.0) {
            out.push(Violation::new(&who, "capacity must be positive"));
        }
        if !(v.cost_per_km >= 0.0) {
            out.push(Violation::new(&who, "cost per km must be non-negative"));
        }
    }
    out
}

/// Ordered visit list for one vehicle; the depot is implicit at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vehicle_id: String,
    pub containers: Vec<String>,
    pub total_distance_m: f64,
    pub total_duration_s: f64,
    pub total_load_kg: f64,
}

impl Route {
    pub fn is_empty(&self) -> bool {
        self.containers.is_empty()
    }
}

/// One route per vehicle plus the containers left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub unassigned: Vec<String>,
    pub fitness: f64,
}

impl Solution {
    pub fn total_distance(&self) -> f64 {
        self.routes.iter().map(|r| r.total_distance_m).sum()
    }

    pub fn assigned_count(&self) -> usize {
        self.routes.iter().map(|r| r.containers.len()).sum()
    }
}

/// A collection event from the historical data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRecord {
    pub container_id: String,
    pub date: NaiveDate,
    pub collected_kg: f64,
    pub collected_yesterday: bool,
    pub day_of_week: Weekday,
}

impl FillRecord {
    pub fn new(
        container_id: impl Into<String>,
        date: NaiveDate,
        collected_kg: f64,
        collected_yesterday: bool,
    ) -> Self {
        Self {
            container_id: container_id.into(),
            date,
            collected_kg,
            collected_yesterday,
            day_of_week: date.weekday(),
        }
    }
}

/// Gap-free daily fill increments (fraction of capacity per day).
///
/// `daily_rate[k]` belongs to `start_date + k`. The last day of the series is
/// always a collection day, so the container is empty right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRateSeries {
    pub container_id: String,
    pub start_date: NaiveDate,
    pub daily_rate: Vec<f64>,
    /// Whether a collection happened on the day before each entry.
    pub collected_yesterday: Vec<bool>,
}

impl FillRateSeries {
    pub fn len(&self) -> usize {
        self.daily_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.daily_rate.is_empty()
    }

    pub fn date_at(&self, k: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(k as u64)
    }

    /// Last covered day; `None` for an empty series.
    pub fn end_date(&self) -> Option<NaiveDate> {
        (!self.is_empty()).then(|| self.date_at(self.len() - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Linear,
    Gp,
    Svr,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [ModelTag::Linear, ModelTag::Gp, ModelTag::Svr];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Linear => "linear",
            ModelTag::Gp => "gp",
            ModelTag::Svr => "svr",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelTag::Linear),
            "gp" => Ok(ModelTag::Gp),
            "svr" => Ok(ModelTag::Svr),
            other => Err(Error::Parse(format!("unknown model tag {other:?}"))),
        }
    }
}

/// Predicted fill level of one container for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub container_id: String,
    pub date: NaiveDate,
    /// Clamped to `[0, 1]`.
    pub predicted_fill: f64,
    /// Set when the unclamped prediction exceeded 1.
    #[serde(default)]
    pub overflow: bool,
    pub model_tag: ModelTag,
}
