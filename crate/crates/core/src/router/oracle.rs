//! Exhaustive reference solver for tiny instances.

use std::collections::BTreeSet;

use super::search::{Problem, Work};
use crate::error::{Error, Result};
use crate::model::{PlanningInstance, Solution};

/// Largest instance the oracle accepts.
pub const ORACLE_LIMIT: usize = 8;

/// Cheapest visit order of every task subset for one vehicle, by full
/// permutation enumeration. `None` marks subsets the vehicle cannot take.
fn subset_tours(p: &Problem<'_>, v: usize) -> Vec<Option<(f64, Vec<usize>)>> {
    let n = p.task_count();
    let cap = p.instance.vehicles[v].capacity_kg;
    (0..1usize << n)
        .map(|mask| {
            let tasks: Vec<usize> = (0..n).filter(|t| mask >> t & 1 == 1).collect();
            let load: f64 = tasks.iter().map(|&t| p.demand[t]).sum();
            if load > cap || tasks.iter().any(|&t| !p.compatible[v][t]) {
                return None;
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut perm = Vec::with_capacity(tasks.len());
            let mut used = vec![false; tasks.len()];
            permute(p, &tasks, &mut perm, &mut used, &mut best);
            best
        })
        .collect()
}

fn permute(p: &Problem<'_>, tasks: &[usize], perm: &mut Vec<usize>, used: &mut [bool], best: &mut Option<(f64, Vec<usize>)>) {
    if perm.len() == tasks.len() {
        let cost = p.route_cost(perm);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            *best = Some((cost, perm.clone()));
        }
        return;
    }
    for k in 0..tasks.len() {
        if !used[k] {
            used[k] = true;
            perm.push(tasks[k]);
            permute(p, tasks, perm, used, best);
            perm.pop();
            used[k] = false;
        }
    }
}

/// Minimum-fitness solution over every assignment of containers to vehicles
/// or to the unassigned list and every visit order.
pub fn brute_force(instance: &PlanningInstance, penalized: &BTreeSet<String>) -> Result<Solution> {
    let n = instance.tasks.len();
    if n > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge {
            count: n,
            limit: ORACLE_LIMIT,
        });
    }
    let p = Problem::new(instance, penalized)?;
    let tours: Vec<_> = (0..instance.vehicles.len()).map(|v| subset_tours(&p, v)).collect();
    let full = (1usize << n) - 1;

    // best[v][mask]: cheapest way to handle `mask` with vehicles v.. and the
    // unassigned list.
    let vehicles = instance.vehicles.len();
    let mut best = vec![vec![(f64::INFINITY, 0usize); 1 << n]; vehicles + 1];
    for mask in 0..=full {
        let pen: f64 = (0..n).filter(|t| mask >> t & 1 == 1).map(|t| p.penalty[t]).sum();
        best[vehicles][mask] = (pen, 0);
    }
    for v in (0..vehicles).rev() {
        for mask in 0..=full {
            let mut sub = mask;
            loop {
                if let Some((cost, _)) = &tours[v][sub] {
                    let total = cost + best[v + 1][mask & !sub].0;
                    if total < best[v][mask].0 {
                        best[v][mask] = (total, sub);
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
        }
    }

    let mut w = Work {
        routes: vec![Vec::new(); vehicles],
        unassigned: Vec::new(),
    };
    let mut mask = full;
    for (v, route) in w.routes.iter_mut().enumerate() {
        let sub = best[v][mask].1;
        if let Some((_, order)) = &tours[v][sub] {
            *route = order.clone();
        }
        mask &= !sub;
    }
    w.unassigned = (0..n).filter(|t| mask >> t & 1 == 1).collect();
    Ok(p.to_solution(&w))
}
