//! Plan versus baseline reports.

use std::collections::{BTreeMap, BTreeSet};

use fillroute_core::io::BaselineRoute;
use fillroute_core::model::{Container, CostMatrix};
use fillroute_core::router::{route_cost, route_duration};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{DayPlan, PlanMetrics, RouteMetrics};
use crate::store::Store;

/// Externally supplied routes costed with our matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePlan {
    pub routes: Vec<BaselineRoute>,
    pub metrics: PlanMetrics,
}

impl BaselinePlan {
    /// Costs `routes` on `matrix`. Loads come from `demand_kg`; containers
    /// without an entry count as empty.
    pub fn evaluate(
        routes: Vec<BaselineRoute>,
        matrix: &CostMatrix,
        containers: &[Container],
        demand_kg: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let known: BTreeSet<&str> = containers.iter().map(|c| c.id.as_str()).collect();
        let mut rows = Vec::with_capacity(routes.len());
        for r in &routes {
            if let Some(id) = r
                .containers
                .iter()
                .find(|id| !known.contains(id.as_str()) || matrix.index_of(id).is_none())
            {
                return Err(fillroute_core::Error::UnknownContainer(id.clone()).into());
            }
            rows.push(RouteMetrics {
                vehicle_id: r.vehicle_id.clone(),
                containers: r.containers.len(),
                duration_s: route_duration(&r.containers, matrix, containers)?,
                distance_m: route_cost(&r.containers, matrix)?,
                load_kg: r.containers.iter().filter_map(|id| demand_kg.get(id)).fold(0.0, |a, b| a + b),
            });
        }
        Ok(Self {
            routes,
            metrics: PlanMetrics::from_routes(rows),
        })
    }

    /// Baseline for a stored plan, using the plan's forecast demand.
    pub fn for_plan(store: &Store, plan: &DayPlan, routes: Vec<BaselineRoute>) -> Result<Self> {
        let containers = store.containers()?;
        let demand: BTreeMap<String, f64> = containers
            .iter()
            .filter_map(|c| plan.selection.fills.get(&c.id).map(|f| (c.id.clone(), f * c.capacity_kg)))
            .chain(plan.demand_kg.iter().map(|(k, v)| (k.clone(), *v)))
            .collect();
        Self::evaluate(routes, &store.matrix()?, &containers, &demand)
    }
}

/// Distance savings of a plan relative to a baseline, in percent of the
/// baseline figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    /// `(baseline avg - plan avg) / baseline avg` over meters per container.
    pub per_container_pct: f64,
    /// Plan meters per container times the baseline container count.
    pub extrapolated_distance_m: f64,
    /// Extrapolated distance against the baseline total.
    pub extrapolated_pct: f64,
    pub total_distance_pct: f64,
    /// Plan total minus baseline total; positive means the plan is longer.
    pub duration_delta_s: f64,
}

pub fn savings(plan: &PlanMetrics, baseline: &PlanMetrics) -> Result<Savings> {
    let b = &baseline.total;
    if b.containers == 0 || b.distance_m <= 0.0 {
        return Err(Error::InvalidRequest("baseline has no containers or zero distance".into()));
    }
    let pct = |base: f64, value: f64| (base - value) / base * 100.0;
    let extrapolated = plan.per_container.distance_m * b.containers as f64;
    Ok(Savings {
        per_container_pct: pct(baseline.per_container.distance_m, plan.per_container.distance_m),
        extrapolated_distance_m: extrapolated,
        extrapolated_pct: pct(b.distance_m, extrapolated),
        total_distance_pct: pct(b.distance_m, plan.total.distance_m),
        duration_delta_s: plan.total.duration_s - b.duration_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub plan_id: String,
    pub plan: PlanMetrics,
    pub baseline: PlanMetrics,
    pub shared_containers: usize,
    /// Share of the baseline's containers that the plan also collects.
    pub overlap_pct: f64,
    pub savings: Savings,
}

pub fn compare(plan: &DayPlan, baseline: &BaselinePlan) -> Result<ComparisonReport> {
    let ours = plan.routed();
    let theirs: BTreeSet<&String> = baseline.routes.iter().flat_map(|r| &r.containers).collect();
    let shared = theirs.iter().filter(|id| ours.contains(**id)).count();
    Ok(ComparisonReport {
        plan_id: plan.plan_id.clone(),
        savings: savings(&plan.metrics, &baseline.metrics)?,
        plan: plan.metrics.clone(),
        baseline: baseline.metrics.clone(),
        shared_containers: shared,
        overlap_pct: if theirs.is_empty() {
            0.0
        } else {
            shared as f64 / theirs.len() as f64 * 100.0
        },
    })
}
