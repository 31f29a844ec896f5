//! Forecast, select and route one collection day.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::NaiveDate;
use fillroute_core::forecast::{forecast_fleet, ForecastConfig};
use fillroute_core::model::{Container, Forecast, ModelTag, PlanningInstance, Solution, Task, DEFAULT_PENALTY};
use fillroute_core::router::{self, SolverConfig};
use fillroute_core::selection::{self, SelectionCriteria, SelectionResult};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::store::Store;

/// Which unassigned containers cost the penalty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NacMode {
    /// Every selected container.
    #[default]
    All,
    /// Mandatory containers only; optional ones ride along when cheap.
    Mandatory,
}

fn default_model_tag() -> ModelTag {
    ModelTag::Gp
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}

/// Everything that, together with the store inputs, determines a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub date: NaiveDate,
    #[serde(default)]
    pub criteria: SelectionCriteria,
    #[serde(default)]
    pub solver_config: SolverConfig,
    #[serde(default = "default_model_tag")]
    pub model_tag: ModelTag,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub nac_mode: NacMode,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
}

impl PlanRequest {
    pub fn new(date: NaiveDate) -> Self {
        Self {
            date,
            criteria: SelectionCriteria::default(),
            solver_config: SolverConfig::default(),
            model_tag: default_model_tag(),
            forecast: ForecastConfig::default(),
            nac_mode: NacMode::default(),
            penalty: DEFAULT_PENALTY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.criteria.validate()?;
        self.solver_config.validate()?;
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            return Err(Error::InvalidRequest(format!("penalty must be non-negative, got {}", self.penalty)));
        }
        if self.forecast.window == 0 {
            return Err(Error::InvalidRequest("forecast window must be at least 1".into()));
        }
        Ok(())
    }

    /// Content hash of the request and the store inputs, 16 hex digits.
    pub fn plan_id(&self, input_digest: &str) -> Result<String> {
        let mut h = Sha256::new();
        h.update(b"plan\0");
        h.update(serde_json::to_vec(self)?);
        h.update([0]);
        h.update(input_digest.as_bytes());
        let mut id = hex::encode(h.finalize());
        id.truncate(16);
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMetrics {
    pub vehicle_id: String,
    pub containers: usize,
    pub duration_s: f64,
    pub distance_m: f64,
    pub load_kg: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub containers: usize,
    pub duration_s: f64,
    pub distance_m: f64,
    pub load_kg: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub duration_s: f64,
    pub distance_m: f64,
    pub load_kg: f64,
}

/// Per-truck rows, totals and per-container averages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub routes: Vec<RouteMetrics>,
    pub total: Totals,
    pub per_container: Averages,
}

impl PlanMetrics {
    pub fn from_routes(routes: Vec<RouteMetrics>) -> Self {
        let mut total = Totals::default();
        for r in &routes {
            total.containers += r.containers;
            total.duration_s += r.duration_s;
            total.distance_m += r.distance_m;
            total.load_kg += r.load_kg;
        }
        let per_container = if total.containers == 0 {
            Averages::default()
        } else {
            let n = total.containers as f64;
            Averages {
                duration_s: total.duration_s / n,
                distance_m: total.distance_m / n,
                load_kg: total.load_kg / n,
            }
        };
        Self {
            routes,
            total,
            per_container,
        }
    }

    pub fn of_solution(solution: &Solution) -> Self {
        Self::from_routes(
            solution
                .routes
                .iter()
                .map(|r| RouteMetrics {
                    vehicle_id: r.vehicle_id.clone(),
                    containers: r.containers.len(),
                    duration_s: r.total_duration_s,
                    distance_m: r.total_distance_m,
                    load_kg: r.total_load_kg,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub plan_id: String,
    pub date: NaiveDate,
    pub request: PlanRequest,
    pub input_digest: String,
    pub selection: SelectionResult,
    /// Containers without a usable forecast, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Containers whose fill came from a sensor reading on the day.
    pub sensor_overrides: Vec<String>,
    pub penalized: BTreeSet<String>,
    /// Demand used for routing, kg.
    pub demand_kg: BTreeMap<String, f64>,
    pub solution: Solution,
    pub metrics: PlanMetrics,
    pub improvements: usize,
}

impl DayPlan {
    /// The persisted form: pretty JSON with a trailing newline.
    pub fn to_document(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn routed(&self) -> BTreeSet<String> {
        self.solution.routes.iter().flat_map(|r| r.containers.iter().cloned()).collect()
    }
}

/// Outcome of a planning run: the plan, its convergence trace and whether it
/// was computed for the first time.
#[derive(Debug, Clone)]
pub struct PlanRun {
    pub plan: DayPlan,
    pub trace: Vec<f64>,
    pub fresh: bool,
}

/// Forecasts every container for `request.date`, selects, routes and
/// persists the plan. Runs on one store are serialised.
pub fn plan_day(store: &Store, request: &PlanRequest) -> Result<PlanRun> {
    request.validate()?;
    let _guard = store.lock_writer();

    let matrix = Arc::new(store.matrix()?);
    let containers = store.containers()?;
    let vehicles = store.vehicles()?;
    let depot = store.depot()?;
    let input_digest = store.input_digest()?;
    let plan_id = request.plan_id(&input_digest)?;

    let history = store.history()?;
    let fleet = forecast_fleet(&containers, &history, request.date, request.model_tag, &request.forecast);
    let mut forecasts = fleet.forecasts;
    let mut skipped = fleet.skipped;
    let sensor_overrides = apply_sensors(store, &containers, request, &mut forecasts, &mut skipped)?;

    let universe: Vec<String> = containers.iter().map(|c| c.id.clone()).collect();
    let selection = selection::select(&universe, &forecasts, &request.criteria)?;
    let selected = selection.selected();
    let penalized: BTreeSet<String> = match request.nac_mode {
        NacMode::All => selected.clone(),
        NacMode::Mandatory => selection.mandatory.clone(),
    };

    let tasks: Vec<Task> = containers
        .iter()
        .filter(|c| selected.contains(&c.id))
        .map(|c| Task {
            demand_kg: demand(c, selection.fills.get(&c.id).copied()),
            container: c.clone(),
        })
        .collect();
    let demand_kg = tasks.iter().map(|t| (t.container.id.clone(), t.demand_kg)).collect();

    let (solution, trace, improvements) = if tasks.is_empty() {
        let empty = Solution {
            routes: Vec::new(),
            unassigned: Vec::new(),
            fitness: 0.0,
        };
        (empty, vec![0.0], 0)
    } else {
        let mut instance = PlanningInstance::new(depot, tasks, vehicles, matrix);
        instance.penalty = request.penalty;
        let out = router::solve(&instance, &penalized, &request.solver_config)?;
        (out.solution, out.trace, out.improvements)
    };

    let plan = DayPlan {
        plan_id,
        date: request.date,
        request: request.clone(),
        input_digest,
        metrics: PlanMetrics::of_solution(&solution),
        selection,
        skipped,
        sensor_overrides,
        penalized,
        demand_kg,
        solution,
        improvements,
    };
    let fresh = store.save_plan(&plan, &trace)?;
    info!(
        "plan {} for {}: {} routed, {} unassigned, fitness {:.1}",
        plan.plan_id,
        plan.date,
        plan.solution.assigned_count(),
        plan.solution.unassigned.len(),
        plan.solution.fitness
    );
    Ok(PlanRun { plan, trace, fresh })
}

/// Forecast fill as kg; a forced container without a forecast is treated
/// as full.
fn demand(container: &Container, fill: Option<f64>) -> f64 {
    fill.map(|f| f.clamp(0.0, 1.0)).unwrap_or(1.0) * container.capacity_kg
}

/// Replaces forecasts of sensor-equipped containers that have a reading
/// dated on the planning day.
fn apply_sensors(
    store: &Store,
    containers: &[Container],
    request: &PlanRequest,
    forecasts: &mut Vec<Forecast>,
    skipped: &mut Vec<(String, String)>,
) -> Result<Vec<String>> {
    let readings: BTreeMap<&str, f64> = store
        .sensors()?
        .into_iter()
        .filter(|r| r.date == request.date)
        .map(|r| (containers.iter().find(|c| c.id == r.container_id).map(|c| c.id.as_str()), r.fill))
        .filter_map(|(id, fill)| id.map(|id| (id, fill)))
        .collect();
    let mut used = Vec::new();
    for c in containers.iter().filter(|c| c.has_sensor) {
        let Some(&fill) = readings.get(c.id.as_str()) else { continue };
        if !fill.is_finite() {
            continue;
        }
        let fc = Forecast {
            container_id: c.id.clone(),
            date: request.date,
            predicted_fill: fill.clamp(0.0, 1.0),
            overflow: fill > 1.0,
            model_tag: request.model_tag,
        };
        match forecasts.iter_mut().find(|f| f.container_id == c.id) {
            Some(f) => *f = fc,
            None => {
                skipped.retain(|(id, _)| id != &c.id);
                forecasts.push(fc);
            }
        }
        used.push(c.id.clone());
    }
    Ok(used)
}
