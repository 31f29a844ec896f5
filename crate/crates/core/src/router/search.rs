use std::collections::{BTreeSet, HashMap};

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{leg_sum, Acceptance, RuinBase, SolverConfig, Unassign};
use crate::error::{Error, Result};
use crate::model::{PlanningInstance, Route, Solution};

/// Best solution found and the best fitness after every iteration; entry
/// 0 is the starting solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solution: Solution,
    pub trace: Vec<f64>,
    pub improvements: usize,
}

/// Index-based working copy of a solution.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Work {
    pub routes: Vec<Vec<usize>>,
    pub unassigned: Vec<usize>,
}

/// A planning instance compiled for the search: tasks and vehicles are
/// addressed by position, containers by matrix node.
#[derive(Debug)]
pub struct Problem<'a> {
    pub(crate) instance: &'a PlanningInstance,
    pub(crate) node: Vec<usize>,
    pub(crate) demand: Vec<f64>,
    /// `p` for penalized tasks, 0 otherwise.
    pub(crate) penalty: Vec<f64>,
    /// `compatible[v][t]`: vehicle `v` may serve task `t`.
    pub(crate) compatible: Vec<Vec<bool>>,
    /// Rank of each task in container-id order, used for tie-breaks.
    rank: Vec<usize>,
    by_id: HashMap<&'a str, usize>,
}

impl<'a> Problem<'a> {
    pub fn new(instance: &'a PlanningInstance, penalized: &BTreeSet<String>) -> Result<Self> {
        let mut by_id = HashMap::new();
        let mut node = Vec::with_capacity(instance.tasks.len());
        for (k, t) in instance.tasks.iter().enumerate() {
            let id = t.container.id.as_str();
            if by_id.insert(id, k).is_some() {
                return Err(Error::DuplicateId(id.to_string()));
            }
            node.push(
                instance
                    .matrix
                    .index_of(id)
                    .ok_or_else(|| Error::UnknownContainer(id.to_string()))?,
            );
        }
        let mut order: Vec<usize> = (0..instance.tasks.len()).collect();
        order.sort_by(|&a, &b| instance.tasks[a].container.id.cmp(&instance.tasks[b].container.id));
        let mut rank = vec![0; order.len()];
        for (r, &t) in order.iter().enumerate() {
            rank[t] = r;
        }
        Ok(Self {
            instance,
            node,
            demand: instance.tasks.iter().map(|t| t.demand_kg).collect(),
            penalty: instance
                .tasks
                .iter()
                .map(|t| if penalized.contains(&t.container.id) { instance.penalty } else { 0.0 })
                .collect(),
            compatible: instance
                .vehicles
                .iter()
                .map(|v| instance.tasks.iter().map(|t| v.can_serve(&t.container)).collect())
                .collect(),
            rank,
            by_id,
        })
    }

    pub fn task_count(&self) -> usize {
        self.node.len()
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        self.instance.matrix.distance(a, b)
    }

    pub(crate) fn route_cost(&self, route: &[usize]) -> f64 {
        let nodes: Vec<usize> = route.iter().map(|&t| self.node[t]).collect();
        leg_sum(&nodes, |a, b| self.dist(a, b))
    }

    fn load(&self, route: &[usize]) -> f64 {
        // Folding from +0 keeps empty routes at 0 rather than -0.
        route.iter().fold(0.0, |acc, &t| acc + self.demand[t])
    }

    pub(crate) fn fitness(&self, w: &Work) -> f64 {
        w.routes.iter().map(|r| self.route_cost(r)).sum::<f64>() + w.unassigned.iter().map(|&t| self.penalty[t]).sum::<f64>()
    }

    fn empty(&self) -> Work {
        Work {
            routes: vec![Vec::new(); self.instance.vehicles.len()],
            unassigned: Vec::new(),
        }
    }

    fn random_work(&self, rng: &mut impl Rng) -> Work {
        let mut w = self.empty();
        let mut loads = vec![0.0; w.routes.len()];
        let mut tasks: Vec<usize> = (0..self.task_count()).collect();
        tasks.shuffle(rng);
        let mut vehicles: Vec<usize> = (0..w.routes.len()).collect();
        vehicles.shuffle(rng);
        for t in tasks {
            let slot = vehicles.iter().copied().find(|&v| {
                self.compatible[v][t] && loads[v] + self.demand[t] <= self.instance.vehicles[v].capacity_kg
            });
            match slot {
                Some(v) => {
                    w.routes[v].push(t);
                    loads[v] += self.demand[t];
                }
                None => w.unassigned.push(t),
            }
        }
        w
    }

    /// Radial ruin: removes a random assigned task and its nearest assigned
    /// neighbours, moving them to the unassigned list. Returns the removed
    /// tasks in removal order.
    fn ruin_work(&self, w: &mut Work, fraction: f64, rng: &mut impl Rng) -> Vec<usize> {
        let assigned: Vec<usize> = w.routes.iter().flatten().copied().collect();
        if assigned.is_empty() {
            return Vec::new();
        }
        let count = ((fraction * assigned.len() as f64 - 1e-9).ceil() as usize).clamp(1, assigned.len());
        let seed = assigned[rng.random_range(0..assigned.len())];
        let mut near: Vec<(f64, usize, usize)> = assigned
            .iter()
            .map(|&t| {
                let d = if t == seed { -1.0 } else { self.dist(self.node[seed], self.node[t]) };
                (d, self.rank[t], t)
            })
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let removed: Vec<usize> = near[..count].iter().map(|x| x.2).collect();
        let gone: BTreeSet<usize> = removed.iter().copied().collect();
        for r in &mut w.routes {
            r.retain(|t| !gone.contains(t));
        }
        w.unassigned.extend_from_slice(&removed);
        removed
    }

    /// Cheapest feasible insertion of task `t`: `(route, position, delta)`.
    /// Ties go to the lowest route index, then the lowest position.
    fn best_insertion(&self, w: &Work, loads: &[f64], t: usize) -> Option<(usize, usize, f64)> {
        let n = self.node[t];
        let mut best: Option<(usize, usize, f64)> = None;
        for (v, route) in w.routes.iter().enumerate() {
            if !self.compatible[v][t] || loads[v] + self.demand[t] > self.instance.vehicles[v].capacity_kg {
                continue;
            }
            for pos in 0..=route.len() {
                let prev = if pos == 0 { 0 } else { self.node[route[pos - 1]] };
                let next = if pos == route.len() { 0 } else { self.node[route[pos]] };
                let delta = if route.is_empty() {
                    self.dist(0, n) + self.dist(n, 0)
                } else {
                    self.dist(prev, n) + self.dist(n, next) - self.dist(prev, next)
                };
                if best.is_none_or(|(_, _, b)| delta < b) {
                    best = Some((v, pos, delta));
                }
            }
        }
        best
    }

    /// Reinserts `pool` (tasks currently unassigned) in random order at their
    /// cheapest feasible positions; tasks without one stay unassigned.
    fn recreate_work(&self, w: &mut Work, mut pool: Vec<usize>, rng: &mut impl Rng) {
        pool.sort_by_key(|&t| self.rank[t]);
        pool.dedup();
        pool.shuffle(rng);
        let pooled: BTreeSet<usize> = pool.iter().copied().collect();
        w.unassigned.retain(|t| !pooled.contains(t));
        let mut loads: Vec<f64> = w.routes.iter().map(|r| self.load(r)).collect();
        for t in pool {
            match self.best_insertion(w, &loads, t) {
                Some((v, pos, _)) => {
                    w.routes[v].insert(pos, t);
                    loads[v] = self.load(&w.routes[v]);
                }
                None => w.unassigned.push(t),
            }
        }
    }

    /// Drops routed tasks whose detour costs more than their penalty, the
    /// most expensive first, until none is left, then empties every route
    /// that costs more than the penalties of all its tasks. Ties go to the
    /// lowest id.
    fn prune_work(&self, w: &mut Work) {
        self.drop_detours(w);
        for route in &mut w.routes {
            let penalty: f64 = route.iter().map(|&t| self.penalty[t]).sum();
            if !route.is_empty() && self.route_cost(route) > penalty {
                w.unassigned.append(route);
            }
        }
    }

    fn drop_detours(&self, w: &mut Work) {
        loop {
            let mut worst: Option<(f64, usize, usize, usize)> = None;
            for (v, route) in w.routes.iter().enumerate() {
                for pos in 0..route.len() {
                    let t = route[pos];
                    let prev = if pos == 0 { 0 } else { self.node[route[pos - 1]] };
                    let next = if pos + 1 == route.len() { 0 } else { self.node[route[pos + 1]] };
                    let n = self.node[t];
                    let saving = self.dist(prev, n) + self.dist(n, next) - self.dist(prev, next);
                    let gain = saving - self.penalty[t];
                    if gain > 0.0
                        && worst.is_none_or(|(g, r, _, _)| gain > g || (gain == g && self.rank[t] < r))
                    {
                        worst = Some((gain, self.rank[t], v, pos));
                    }
                }
            }
            let Some((_, _, v, pos)) = worst else {
                return;
            };
            let t = w.routes[v].remove(pos);
            w.unassigned.push(t);
        }
    }

    fn iterate(&self, base: &Work, config: &SolverConfig, rng: &mut impl Rng) -> Work {
        let mut cand = base.clone();
        self.ruin_work(&mut cand, config.ruin_fraction, rng);
        let pool = std::mem::take(&mut cand.unassigned);
        self.recreate_work(&mut cand, pool, rng);
        if config.unassign == Unassign::Profitable {
            self.prune_work(&mut cand);
        }
        cand
    }

    pub fn solve(&self, config: &SolverConfig) -> Result<SolveOutcome> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut start = self.empty();
        self.recreate_work(&mut start, (0..self.task_count()).collect(), &mut rng);
        if config.unassign == Unassign::Profitable {
            self.prune_work(&mut start);
        }

        let mut best_fit = self.fitness(&start);
        let mut best = start.clone();
        let mut current = start;
        let mut current_fit = best_fit;
        let mut trace = Vec::with_capacity(config.iteration_budget + 1);
        trace.push(best_fit);
        let mut improvements = 0;
        let mut threshold = config.threshold_initial;
        for _ in 0..config.iteration_budget {
            let cand = match config.ruin_base {
                RuinBase::Best => self.iterate(&current, config, &mut rng),
                RuinBase::FreshRandom => {
                    let fresh = self.random_work(&mut rng);
                    self.iterate(&fresh, config, &mut rng)
                }
            };
            let fit = self.fitness(&cand);
            match config.acceptance {
                Acceptance::Greedy => {
                    if fit < best_fit {
                        best_fit = fit;
                        best = cand.clone();
                        current_fit = fit;
                        current = cand;
                        improvements += 1;
                    }
                }
                Acceptance::Threshold => {
                    if fit < best_fit {
                        best_fit = fit;
                        best = cand.clone();
                        improvements += 1;
                    }
                    if fit < current_fit + threshold {
                        current_fit = fit;
                        current = cand;
                    }
                    threshold *= config.threshold_decay;
                }
            }
            trace.push(best_fit);
        }
        debug!(
            "solve: {} tasks, {} iterations, fitness {} -> {best_fit} ({improvements} improvements)",
            self.task_count(),
            config.iteration_budget,
            trace[0]
        );
        Ok(SolveOutcome {
            solution: self.to_solution(&best),
            trace,
            improvements,
        })
    }

    pub(crate) fn to_solution(&self, w: &Work) -> Solution {
        let inst = self.instance;
        let routes: Vec<Route> = w
            .routes
            .iter()
            .zip(&inst.vehicles)
            .map(|(r, v)| {
                let nodes: Vec<usize> = r.iter().map(|&t| self.node[t]).collect();
                let unload: f64 = r.iter().map(|&t| inst.tasks[t].container.unload_time_s).sum();
                Route {
                    vehicle_id: v.id.clone(),
                    containers: r.iter().map(|&t| inst.tasks[t].container.id.clone()).collect(),
                    total_distance_m: leg_sum(&nodes, |a, b| inst.matrix.distance(a, b)),
                    total_duration_s: if r.is_empty() {
                        0.0
                    } else {
                        leg_sum(&nodes, |a, b| inst.matrix.duration(a, b)) + unload
                    },
                    total_load_kg: self.load(r),
                }
            })
            .collect();
        let mut unassigned = w.unassigned.clone();
        unassigned.sort_by_key(|&t| self.rank[t]);
        let penalty: f64 = unassigned.iter().map(|&t| self.penalty[t]).sum();
        Solution {
            fitness: routes.iter().map(|r| r.total_distance_m).sum::<f64>() + penalty,
            routes,
            unassigned: unassigned.iter().map(|&t| inst.tasks[t].container.id.clone()).collect(),
        }
    }

    fn task_of(&self, id: &str) -> Result<usize> {
        self.by_id.get(id).copied().ok_or_else(|| Error::UnknownContainer(id.to_string()))
    }

    pub(crate) fn work_of(&self, s: &Solution) -> Result<Work> {
        let mut w = self.empty();
        for r in &s.routes {
            let v = self
                .instance
                .vehicles
                .iter()
                .position(|v| v.id == r.vehicle_id)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown vehicle {}", r.vehicle_id)))?;
            w.routes[v] = r.containers.iter().map(|id| self.task_of(id)).collect::<Result<_>>()?;
        }
        w.unassigned = s.unassigned.iter().map(|id| self.task_of(id)).collect::<Result<_>>()?;
        Ok(w)
    }

    /// Shuffles the tasks and appends each to the first vehicle (in a random
    /// vehicle order) that can still take it; the rest stay unassigned.
    pub fn random_solution(&self, rng: &mut impl Rng) -> Solution {
        self.to_solution(&self.random_work(rng))
    }

    /// Removes `ceil(fraction * assigned)` containers by radial ruin. The
    /// partial solution lists them as unassigned.
    pub fn ruin(&self, solution: &Solution, fraction: f64, rng: &mut impl Rng) -> Result<(Solution, Vec<String>)> {
        let mut w = self.work_of(solution)?;
        let removed = self.ruin_work(&mut w, fraction, rng);
        let ids = removed
            .iter()
            .map(|&t| self.instance.tasks[t].container.id.clone())
            .collect();
        Ok((self.to_solution(&w), ids))
    }

    /// Reinserts `removed` by cheapest insertion in random order.
    pub fn recreate(&self, partial: &Solution, removed: &[String], rng: &mut impl Rng) -> Result<Solution> {
        let mut w = self.work_of(partial)?;
        let pool = removed.iter().map(|id| self.task_of(id)).collect::<Result<Vec<_>>>()?;
        self.recreate_work(&mut w, pool, rng);
        Ok(self.to_solution(&w))
    }

    /// Cost increase of the cheapest feasible insertion of `id` into
    /// `partial`, or `None` when no vehicle can take it.
    pub fn cheapest_insertion(&self, partial: &Solution, id: &str) -> Result<Option<f64>> {
        let w = self.work_of(partial)?;
        let loads: Vec<f64> = w.routes.iter().map(|r| self.load(r)).collect();
        let t = self.task_of(id)?;
        Ok(self.best_insertion(&w, &loads, t).map(|b| b.2))
    }
}
