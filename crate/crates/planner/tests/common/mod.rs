#![allow(dead_code)]

use std::path::Path;

use chrono::NaiveDate;
use fillroute_core::costmatrix::{build_matrix, HaversineProvider};
use fillroute_core::model::ModelTag;
use fillroute_core::router::SolverConfig;
use fillroute_core::synth::{generate, SynthConfig};
use fillroute_planner::{PlanRequest, Store};

pub fn synth_config() -> SynthConfig {
    SynthConfig {
        n_containers: 40,
        n_small_only: 3,
        n_selected: 14,
        months_history: 4,
        seed: 11,
        ..Default::default()
    }
}

/// A small synthetic store with a matrix; returns the planning date.
pub fn store_at(dir: &Path, with_matrix: bool) -> (Store, NaiveDate) {
    let inst = generate(&synth_config()).unwrap();
    let store = Store::create(dir, inst.depot, &inst.containers, &inst.vehicles, &inst.history).unwrap();
    if with_matrix {
        let m = build_matrix(inst.depot, &inst.containers, &HaversineProvider::default(), 1.1).unwrap();
        store.write_matrix(&m).unwrap();
    }
    (store, inst.planning_date)
}

pub fn quick_request(date: NaiveDate) -> PlanRequest {
    PlanRequest {
        model_tag: ModelTag::Linear,
        solver_config: SolverConfig {
            iteration_budget: 400,
            ..Default::default()
        },
        ..PlanRequest::new(date)
    }
}
