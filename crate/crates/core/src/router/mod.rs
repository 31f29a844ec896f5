//! Heterogeneous, site-dependent vehicle routing on an asymmetric matrix.
//!
//! Fitness of a solution is the sum of its route distances plus a penalty
//! `p` for every unassigned container that belongs to the penalized set.
//! [`solve`] runs a (1+1) ruin-and-recreate loop: radial ruin of a fraction
//! of the assigned containers followed by cheapest-insertion recreation.
//! [`brute_force`] enumerates every assignment and visit order and serves as
//! an oracle on tiny instances.

mod oracle;
mod search;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use oracle::{brute_force, ORACLE_LIMIT};
pub use search::{Problem, SolveOutcome};

use crate::error::{Error, Result};
use crate::model::{Container, CostMatrix, PlanningInstance, Solution, Violation};

pub const DEFAULT_ITERATIONS: usize = 10_000;
pub const DEFAULT_RUIN_FRACTION: f64 = 0.3;
pub const DEFAULT_SEED: u64 = 20_250_101;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// Keep the candidate only when it is strictly better than the best.
    #[default]
    Greedy,
    /// Accept into the current solution when within a decaying threshold of
    /// it; the best solution is tracked separately.
    Threshold,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinBase {
    /// Ruin the incumbent.
    #[default]
    Best,
    /// Ruin a fresh random solution every iteration.
    FreshRandom,
}

/// When a container may end up unassigned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unassign {
    /// Only when no vehicle has room for it; every insertable container is
    /// routed whatever its detour.
    #[default]
    CapacityOnly,
    /// Also when leaving it out is cheaper than routing it: after each
    /// recreate, containers whose detour exceeds their penalty are dropped,
    /// then whole routes costing more than their penalties. This minimises
    /// the fitness over all assignments, as the oracle does.
    Profitable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub iteration_budget: usize,
    pub ruin_fraction: f64,
    pub seed: u64,
    pub acceptance: Acceptance,
    pub threshold_initial: f64,
    pub threshold_decay: f64,
    pub ruin_base: RuinBase,
    pub unassign: Unassign,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iteration_budget: DEFAULT_ITERATIONS,
            ruin_fraction: DEFAULT_RUIN_FRACTION,
            seed: DEFAULT_SEED,
            acceptance: Acceptance::Greedy,
            threshold_initial: 200.0,
            threshold_decay: 0.9995,
            ruin_base: RuinBase::Best,
            unassign: Unassign::CapacityOnly,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iteration_budget == 0 {
            return Err(Error::InvalidParameter("iteration budget must be at least 1".into()));
        }
        if !(self.ruin_fraction > 0.0 && self.ruin_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ruin fraction must lie in (0, 1), got {}",
                self.ruin_fraction
            )));
        }
        if self.acceptance == Acceptance::Threshold
            && !(self.threshold_initial >= 0.0 && self.threshold_decay > 0.0 && self.threshold_decay <= 1.0)
        {
            return Err(Error::InvalidParameter(
                "threshold mode needs threshold_initial >= 0 and decay in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn matrix_index(matrix: &CostMatrix, id: &str) -> Result<usize> {
    matrix.index_of(id).ok_or_else(|| Error::UnknownContainer(id.to_string()))
}

/// Length of depot -> c1 -> ... -> ck -> depot. An empty route costs 0.
pub fn route_cost<S: AsRef<str>>(route: &[S], matrix: &CostMatrix) -> Result<f64> {
    let nodes = route
        .iter()
        .map(|id| matrix_index(matrix, id.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(leg_sum(&nodes, |a, b| matrix.distance(a, b)))
}

/// Travel time along the route plus the unload time of every visited
/// container.
pub fn route_duration<S: AsRef<str>>(route: &[S], matrix: &CostMatrix, containers: &[Container]) -> Result<f64> {
    let nodes = route
        .iter()
        .map(|id| matrix_index(matrix, id.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let unload: HashMap<&str, f64> = containers.iter().map(|c| (c.id.as_str(), c.unload_time_s)).collect();
    let service = route
        .iter()
        .map(|id| {
            unload
                .get(id.as_ref())
                .copied()
                .ok_or_else(|| Error::UnknownContainer(id.as_ref().to_string()))
        })
        .sum::<Result<f64>>()?;
    Ok(leg_sum(&nodes, |a, b| matrix.duration(a, b)) + service)
}

pub(crate) fn leg_sum(nodes: &[usize], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (Some(&first), Some(&last)) = (nodes.first(), nodes.last()) else {
        return 0.0;
    };
    cost(0, first) + nodes.windows(2).map(|w| cost(w[0], w[1])).sum::<f64>() + cost(last, 0)
}

/// Route distances recomputed from the matrix plus `p` per unassigned
/// container in `penalized`.
pub fn evaluate(solution: &Solution, instance: &PlanningInstance, penalized: &BTreeSet<String>) -> Result<f64> {
    let mut total = 0.0;
    for r in &solution.routes {
        total += route_cost(&r.containers, &instance.matrix)?;
    }
    let nac = solution.unassigned.iter().filter(|id| penalized.contains(*id)).count();
    Ok(total + instance.penalty * nac as f64)
}

/// Capacity, site-compatibility and duplicate-visit checks, together with
/// references to unknown vehicles or containers and containers missing from
/// the solution altogether.
pub fn check_feasibility(solution: &Solution, instance: &PlanningInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let tasks: HashMap<&str, _> = instance.tasks.iter().map(|t| (t.container.id.as_str(), t)).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut vehicles_seen: HashSet<&str> = HashSet::new();
    for route in &solution.routes {
        let who = format!("route {}", route.vehicle_id);
        let vehicle = instance.vehicle(&route.vehicle_id);
        if vehicle.is_none() {
            out.push(Violation::new(&who, "unknown vehicle"));
        }
        if !vehicles_seen.insert(route.vehicle_id.as_str()) {
            out.push(Violation::new(&who, "vehicle has more than one route"));
        }
        let mut load = 0.0;
        for id in &route.containers {
            if !seen.insert(id.as_str()) {
                out.push(Violation::new(format!("container {id}"), "duplicate visit"));
            }
            let Some(task) = tasks.get(id.as_str()) else {
                out.push(Violation::new(format!("container {id}"), "unknown container"));
                continue;
            };
            load += task.demand_kg;
            if let Some(v) = vehicle {
                if !v.can_serve(&task.container) {
                    out.push(Violation::new(
                        format!("container {id}"),
                        format!("site incompatible with vehicle {}", v.id),
                    ));
                }
            }
        }
        if let Some(v) = vehicle {
            if load > v.capacity_kg {
                out.push(Violation::new(
                    &who,
                    format!("capacity exceeded: {load} kg on {} kg vehicle", v.capacity_kg),
                ));
            }
        }
    }
    for id in &solution.unassigned {
        if !seen.insert(id.as_str()) {
            out.push(Violation::new(format!("container {id}"), "duplicate visit"));
        }
        if !tasks.contains_key(id.as_str()) {
            out.push(Violation::new(format!("container {id}"), "unknown container"));
        }
    }
    for t in &instance.tasks {
        if !seen.contains(t.container.id.as_str()) {
            out.push(Violation::new(format!("container {}", t.container.id), "missing from solution"));
        }
    }
    out
}

/// Runs the ruin-and-recreate search.
pub fn solve(instance: &PlanningInstance, penalized: &BTreeSet<String>, config: &SolverConfig) -> Result<SolveOutcome> {
    Problem::new(instance, penalized)?.solve(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeoPoint, Route};

    fn matrix(ids: &[&str], d: Vec<f64>) -> CostMatrix {
        let t = d.iter().map(|x| x * 2.0).collect();
        CostMatrix::new(ids.iter().map(|s| s.to_string()).collect(), d, t).unwrap()
    }

    #[test]
    fn asymmetric_single_stop() {
        let m = matrix(&["A"], vec![0.0, 100.0, 150.0, 0.0]);
        assert_eq!(route_cost(&["A"], &m).unwrap(), 250.0);
        assert_eq!(route_cost::<&str>(&[], &m).unwrap(), 0.0);
        assert!(route_cost(&["B"], &m).is_err());
    }

    #[test]
    fn duration_adds_unload() {
        let m = CostMatrix::new(vec!["A".into()], vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 300.0, 400.0, 0.0]).unwrap();
        let c = Container {
            id: "A".into(),
            location: GeoPoint::new(0.0, 0.0),
            capacity_kg: 75.0,
            unload_time_s: 210.0,
            small_only: false,
            has_sensor: false,
            address: String::new(),
            group: String::new(),
        };
        assert_eq!(route_duration(&["A"], &m, std::slice::from_ref(&c)).unwrap(), 910.0);
        assert_eq!(route_duration::<&str>(&[], &m, &[c]).unwrap(), 0.0);
    }

    #[test]
    fn fitness_counts_only_penalized_unassigned() {
        let m = std::sync::Arc::new(matrix(&["A", "B", "C"], vec![0.0; 16]));
        let inst = PlanningInstance::new(GeoPoint::new(0.0, 0.0), vec![], vec![], m);
        let sol = Solution {
            routes: vec![Route {
                vehicle_id: "v".into(),
                containers: vec![],
                total_distance_m: 0.0,
                total_duration_s: 0.0,
                total_load_kg: 0.0,
            }],
            unassigned: vec!["A".into(), "B".into(), "C".into()],
            fitness: 0.0,
        };
        let all: BTreeSet<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        assert_eq!(evaluate(&sol, &inst, &all).unwrap(), 1500.0);
        let one: BTreeSet<String> = ["B".to_string()].into();
        assert_eq!(evaluate(&sol, &inst, &one).unwrap(), 500.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let zero = SolverConfig {
            iteration_budget: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        let full = SolverConfig {
            ruin_fraction: 1.0,
            ..Default::default()
        };
        assert!(full.validate().is_err());
    }
}
