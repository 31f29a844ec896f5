use std::fs::{self, File};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fillroute_core::costmatrix::{self as cm, HaversineProvider};
use fillroute_core::forecast::{self, ForecastConfig, GpTuning};
use fillroute_core::io;
use fillroute_core::model::{PlanningInstance, Task};
use fillroute_core::router::{self, Acceptance, RuinBase, SolverConfig, Unassign, DEFAULT_SEED, ORACLE_LIMIT};
use fillroute_core::selection::Comparison;
use fillroute_core::synth::{self, SynthConfig};
use fillroute_planner::{geo, plan_day, BaselinePlan, NacMode, PlanRequest, Store};
use serde_json::{json, Value};

use crate::{
    AcceptanceArg, BacktestArgs, BuildMatrixArgs, CompareArgs, ForecastArgs, GenInstanceArgs, ModelArgs, NacModeArg,
    PlanArgs, RuinBaseArg, ServeArgs, SolveOracleArgs, SolverArgs, UnassignArg,
};

/// The given seed, or `default` announced on stderr.
fn seed_or(seed: Option<u64>, default: u64) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("seed: {default} (default)");
        default
    })
}

fn open_store(path: &Path) -> Result<Store> {
    Store::open(path).with_context(|| format!("opening store {}", path.display()))
}

fn out_dir(out: &Option<std::path::PathBuf>) -> Result<Option<&Path>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(out.as_deref())
}

pub fn gen_instance(a: GenInstanceArgs) -> Result<Value> {
    let defaults = SynthConfig::default();
    if a.small_only > a.containers {
        bail!("--small-only {} exceeds --containers {}", a.small_only, a.containers);
    }
    let selected = a.selected.unwrap_or_else(|| {
        (a.containers * defaults.n_selected / defaults.n_containers).max(a.small_only).min(a.containers)
    });
    let mut vehicles = synth::default_fleet();
    vehicles[0].capacity_kg = a.small_capacity;
    vehicles[1].capacity_kg = a.big_capacity;
    let config = SynthConfig {
        n_containers: a.containers,
        n_small_only: a.small_only,
        n_selected: selected,
        capacity_kg: a.capacity,
        unload_time_s: a.unload_time,
        vehicles,
        months_history: a.months,
        start_date: a.start,
        seed: seed_or(a.seed, defaults.seed),
        ..defaults
    };
    let inst = synth::generate(&config)?;
    Store::create(&a.out, inst.depot, &inst.containers, &inst.vehicles, &inst.history)?;
    Ok(json!({
        "out": a.out,
        "seed": config.seed,
        "containers": inst.containers.len(),
        "small_only": inst.containers.iter().filter(|c| c.small_only).count(),
        "vehicles": inst.vehicles.len(),
        "history_records": inst.history.len(),
        "planning_date": inst.planning_date,
    }))
}

pub fn build_matrix(a: BuildMatrixArgs) -> Result<Value> {
    let store = open_store(&a.store)?;
    let provider = HaversineProvider {
        detour_factor: a.detour,
        speed_mps: a.speed,
    };
    let m = cm::build_matrix(store.depot()?, &store.containers()?, &provider, a.asymmetry)?;
    let dir = a.out.unwrap_or_else(|| store.matrix_dir());
    cm::write_matrix(&m, &dir)?;
    Ok(json!({
        "out": dir,
        "nodes": m.node_count(),
        "symmetric": m.is_symmetric(),
    }))
}

fn forecast_config(a: &ModelArgs) -> ForecastConfig {
    let mut c = ForecastConfig::default();
    if let Some(w) = a.window {
        c.window = w;
    }
    if let Some(g) = &a.grid {
        c.gp = GpTuning::Grid(g.clone());
    }
    if let Some(v) = a.svr_c {
        c.svr.c = v;
    }
    if let Some(v) = a.svr_epsilon {
        c.svr.epsilon = v;
    }
    c
}

pub fn forecast(a: ForecastArgs) -> Result<Value> {
    if a.horizon == 0 {
        bail!("--horizon must be at least 1");
    }
    let store = open_store(&a.store)?;
    let containers = store.containers()?;
    let history = store.history()?;
    let config = forecast_config(&a.model);
    let mut all = Vec::new();
    let mut skipped = Vec::new();
    for k in 0..a.horizon as u64 {
        let date = a.date + chrono::Days::new(k);
        let fleet = forecast::forecast_fleet(&containers, &history, date, a.model.model, &config);
        all.extend(fleet.forecasts);
        if k == 0 {
            skipped = fleet.skipped;
        }
    }
    let first: Vec<_> = all.iter().filter(|f| f.date == a.date).collect();
    let mut summary = json!({
        "date": a.date,
        "horizon": a.horizon,
        "model": a.model.model,
        "forecasts": all.len(),
        "above_optional": first.iter().filter(|f| f.predicted_fill > 0.5).count(),
        "above_mandatory": first.iter().filter(|f| f.predicted_fill > 0.8).count(),
        "skipped": skipped,
    });
    if let Some(dir) = out_dir(&a.out)? {
        let path = dir.join("forecasts.csv");
        io::write_forecasts(File::create(&path)?, &all)?;
        summary["out"] = json!(path);
    }
    Ok(summary)
}

pub fn backtest(a: BacktestArgs) -> Result<Value> {
    let store = open_store(&a.store)?;
    let report = forecast::backtest(
        &store.containers()?,
        &store.history()?,
        a.horizon,
        a.model.model,
        &forecast_config(&a.model),
    )?;
    let mut summary = serde_json::to_value(&report)?;
    if let Some(dir) = out_dir(&a.out)? {
        let path = dir.join(format!("backtest_{}.csv", report.model_tag));
        let mut text = String::from("container_id,days,model_mae,baseline_mae\n");
        for c in &report.containers {
            text.push_str(&format!("{},{},{},{}\n", c.container_id, c.days, c.model_mae, c.baseline_mae));
        }
        fs::write(&path, text)?;
        summary["out"] = json!(path);
    }
    Ok(summary)
}

fn solver_config(a: &SolverArgs, mut c: SolverConfig) -> SolverConfig {
    if let Some(v) = a.iterations {
        c.iteration_budget = v;
    }
    if let Some(v) = a.ruin_fraction {
        c.ruin_fraction = v;
    }
    c.seed = seed_or(a.seed, c.seed);
    if let Some(v) = a.acceptance {
        c.acceptance = match v {
            AcceptanceArg::Greedy => Acceptance::Greedy,
            AcceptanceArg::Threshold => Acceptance::Threshold,
        };
    }
    if let Some(v) = a.ruin_base {
        c.ruin_base = match v {
            RuinBaseArg::Best => RuinBase::Best,
            RuinBaseArg::FreshRandom => RuinBase::FreshRandom,
        };
    }
    if let Some(v) = a.unassign {
        c.unassign = match v {
            UnassignArg::CapacityOnly => Unassign::CapacityOnly,
            UnassignArg::Profitable => Unassign::Profitable,
        };
    }
    c
}

fn plan_request(a: &PlanArgs) -> PlanRequest {
    let mut req = PlanRequest::new(a.date);
    if let Some(v) = a.mandatory_threshold {
        req.criteria.mandatory_threshold = v;
    }
    if let Some(v) = a.optional_threshold {
        req.criteria.optional_threshold = v;
    }
    req.criteria.forced_include = a.force_include.iter().cloned().collect();
    req.criteria.forced_exclude = a.force_exclude.iter().cloned().collect();
    if a.inclusive {
        req.criteria.comparison = Comparison::Inclusive;
    }
    if let Some(v) = a.nac_mode {
        req.nac_mode = match v {
            NacModeArg::All => NacMode::All,
            NacModeArg::Mandatory => NacMode::Mandatory,
        };
    }
    if let Some(v) = a.penalty {
        req.penalty = v;
    }
    req.model_tag = a.model.model;
    req.forecast = forecast_config(&a.model);
    req.solver_config = solver_config(&a.solver, SolverConfig::default());
    req
}

pub fn plan(a: PlanArgs) -> Result<Value> {
    let store = open_store(&a.store)?;
    let req = plan_request(&a);
    let run = plan_day(&store, &req)?;
    let p = &run.plan;
    let mut summary = json!({
        "plan_id": p.plan_id,
        "date": p.date,
        "seed": req.solver_config.seed,
        "reused": !run.fresh,
        "selected": p.selection.selected().len(),
        "mandatory": p.selection.mandatory.len(),
        "optional": p.selection.optional.len(),
        "routed": p.solution.assigned_count(),
        "unassigned": p.solution.unassigned,
        "fitness": p.solution.fitness,
        "routes": p.metrics.routes,
        "total": p.metrics.total,
        "per_container": p.metrics.per_container,
    });
    if let Some(dir) = out_dir(&a.out)? {
        fs::write(dir.join("plan.json"), store.plan_document(&p.plan_id)?)?;
        fs::write(dir.join("plan.geojson"), geo::to_document(&geo::export_geojson(p, &store)?)?)?;
        io::write_trace(File::create(dir.join("trace.csv"))?, &run.trace)?;
        summary["out"] = json!(dir);
    }
    Ok(summary)
}

pub fn compare(a: CompareArgs) -> Result<Value> {
    let store = open_store(&a.store)?;
    let plan = store.load_plan(&a.plan)?;
    let routes = io::read_baseline(File::open(&a.baseline).with_context(|| format!("reading {}", a.baseline.display()))?)?;
    let baseline = BaselinePlan::for_plan(&store, &plan, routes)?;
    let report = fillroute_planner::compare(&plan, &baseline)?;
    let mut summary = serde_json::to_value(&report)?;
    if let Some(dir) = out_dir(&a.out)? {
        let path = dir.join("comparison.json");
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        summary["out"] = json!(path);
    }
    Ok(summary)
}

pub fn serve(a: ServeArgs) -> Result<Value> {
    let store = Arc::new(open_store(&a.store)?);
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("serving {} on http://{}", a.store.display(), a.bind);
    rt.block_on(fillroute_planner::service::serve(store, a.bind))
        .with_context(|| format!("serving on {}", a.bind))?;
    Ok(json!({"stopped": true}))
}

pub fn solve_oracle(a: SolveOracleArgs) -> Result<Value> {
    let store = open_store(&a.store)?;
    let containers = store.containers()?;
    let chosen: Vec<_> = if a.all_containers {
        containers.clone()
    } else {
        if a.containers.is_empty() {
            bail!("pass --containers id,id,... or --all-containers");
        }
        a.containers
            .iter()
            .map(|id| {
                containers
                    .iter()
                    .find(|c| &c.id == id)
                    .cloned()
                    .ok_or_else(|| fillroute_core::Error::UnknownContainer(id.clone()))
            })
            .collect::<Result<_, _>>()?
    };
    if chosen.len() > ORACLE_LIMIT {
        return Err(fillroute_core::Error::InstanceTooLarge {
            count: chosen.len(),
            limit: ORACLE_LIMIT,
        }
        .into());
    }
    let history = store.history()?;
    let date = match a.date {
        Some(d) => d,
        None => history
            .iter()
            .map(|r| r.date)
            .max()
            .context("history is empty; pass --date")?
            .succ_opt()
            .context("date out of range")?,
    };
    let fleet = forecast::forecast_fleet(&chosen, &history, date, a.model, &ForecastConfig::default());
    if let Some((id, why)) = fleet.skipped.first() {
        bail!("no forecast for {id}: {why}");
    }
    let tasks: Vec<Task> = chosen
        .iter()
        .zip(&fleet.forecasts)
        .map(|(c, f)| Task {
            demand_kg: f.predicted_fill * c.capacity_kg,
            container: c.clone(),
        })
        .collect();
    let instance = PlanningInstance::new(store.depot()?, tasks, store.vehicles()?, Arc::new(store.matrix()?));
    let penalized = chosen.iter().map(|c| c.id.clone()).collect();
    let exact = router::brute_force(&instance, &penalized)?;
    let config = SolverConfig {
        iteration_budget: a.iterations.unwrap_or(router::DEFAULT_ITERATIONS),
        seed: seed_or(a.seed, DEFAULT_SEED),
        unassign: Unassign::Profitable,
        ..Default::default()
    };
    let heuristic = router::solve(&instance, &penalized, &config)?;
    let gap = heuristic.solution.fitness - exact.fitness;
    Ok(json!({
        "date": date,
        "containers": chosen.len(),
        "seed": config.seed,
        "oracle_fitness": exact.fitness,
        "solve_fitness": heuristic.solution.fitness,
        "matches": gap.abs() <= 1e-9 * exact.fitness.max(1.0),
        "oracle": exact,
        "solve": heuristic.solution,
    }))
}
