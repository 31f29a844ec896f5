//! Acceptance gate. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::NaiveDate;
use fillroute_core::costmatrix::{build_matrix, write_matrix, HaversineProvider};
use fillroute_core::forecast::features::build_rows;
use fillroute_core::forecast::gp::{GaussianProcess, GpParams};
use fillroute_core::forecast::{backtest, derive_daily_rates, ForecastConfig};
use fillroute_core::model::{
    Container, CostMatrix, Forecast, GeoPoint, ModelTag, PlanningInstance, Route, Solution, Task, Vehicle,
};
use fillroute_core::router::{brute_force, check_feasibility, evaluate, solve, Problem, RuinBase, SolverConfig, Unassign};
use fillroute_core::selection::{select, SelectionClass, SelectionCriteria};
use fillroute_core::synth::{calibrated_forecasts, generate, routing_instance, routing_suite, SynthConfig};
use fillroute_planner::plan::{PlanMetrics, RouteMetrics};
use fillroute_planner::{compare, plan_day, PlanRequest, Store};
use http_body_util::BodyExt;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let suite = routing_suite(2025, 200);
    let with_small = suite
        .iter()
        .filter(|(inst, _)| inst.tasks.iter().any(|t| t.container.small_only))
        .count();
    ensure(with_small >= 100, || format!("only {with_small} instances have a small_only container"))?;
    let (mut hits, mut pairs) = (0usize, 0usize);
    for (k, (inst, pen)) in suite.iter().enumerate() {
        ensure((3..=6).contains(&inst.tasks.len()), || format!("instance {k} has {} containers", inst.tasks.len()))?;
        let exact = brute_force(inst, pen).map_err(e2s)?;
        for seed in 0..3 {
            let cfg = SolverConfig {
                iteration_budget: 10_000,
                ruin_base: RuinBase::Best,
                unassign: Unassign::Profitable,
                seed,
                ..Default::default()
            };
            let got = solve(inst, pen, &cfg).map_err(e2s)?.solution.fitness;
            let tol = 1e-9 * exact.fitness.max(1.0);
            ensure(got >= exact.fitness - tol, || format!("instance {k} seed {seed}: {got} below oracle {}", exact.fitness))?;
            pairs += 1;
            if (got - exact.fitness).abs() <= tol {
                hits += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let rate = hits as f64 / pairs as f64;
    ensure(rate >= 0.95, || format!("{hits}/{pairs} matches"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{hits}/{pairs} pairs match, none below the oracle, {:.1} s", elapsed.as_secs_f64()))
}

fn feasibility_cycles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0usize;
    for k in 0..10_000 {
        let n = rng.random_range(1..=15);
        let v = rng.random_range(1..=3);
        let small = rng.random_range(0..=n.min(4));
        let (inst, pen) = routing_instance(&mut rng, n, v, small);
        let p = Problem::new(&inst, &pen).map_err(e2s)?;
        let mut check = |s: &Solution, stage: &str| {
            checked += 1;
            let v = check_feasibility(s, &inst);
            ensure(v.is_empty(), || format!("cycle {k} {stage}: {v:?}"))
        };
        let s = p.random_solution(&mut rng);
        check(&s, "random_solution")?;
        let (partial, removed) = p.ruin(&s, rng.random_range(0.05..0.95), &mut rng).map_err(e2s)?;
        check(&partial, "ruin")?;
        let s2 = p.recreate(&partial, &removed, &mut rng).map_err(e2s)?;
        check(&s2, "recreate")?;
        if k % 10 == 0 {
            let cfg = SolverConfig {
                iteration_budget: 50,
                seed: k,
                ..Default::default()
            };
            let solved = solve(&inst, &pen, &cfg).map_err(e2s)?.solution;
            check(&solved, "solve")?;
        }
    }
    Ok(format!("10000 cycles, {checked} solutions without violations"))
}

fn plain_container(id: &str) -> Container {
    Container {
        id: id.into(),
        location: GeoPoint::new(36.72, -4.42),
        capacity_kg: 75.0,
        unload_time_s: 210.0,
        small_only: false,
        has_sensor: false,
        address: String::new(),
        group: String::new(),
    }
}

fn penalty_arithmetic() -> Outcome {
    // Depot plus A..E. One route depot-A-B-depot of 57,688 m, C D E left out.
    let ids: Vec<String> = ["A", "B", "C", "D", "E"].iter().map(|s| s.to_string()).collect();
    let n = ids.len() + 1;
    let mut distance = vec![1_000.0; n * n];
    for k in 0..n {
        distance[k * n + k] = 0.0;
    }
    distance[1] = 20_000.0;
    distance[n + 2] = 17_688.0;
    distance[2 * n] = 20_000.0;
    let matrix = CostMatrix::new(ids.clone(), distance.clone(), distance).map_err(e2s)?;
    let tasks = ids
        .iter()
        .map(|id| Task {
            container: plain_container(id),
            demand_kg: 10.0,
        })
        .collect();
    let vehicles = vec![Vehicle {
        id: "truck".into(),
        capacity_kg: 2_000.0,
        small: false,
        cost_per_km: 1.0,
        registration: String::new(),
    }];
    let inst = PlanningInstance::new(GeoPoint::new(36.7, -4.4), tasks, vehicles, Arc::new(matrix));
    let solution = Solution {
        routes: vec![Route {
            vehicle_id: "truck".into(),
            containers: vec!["A".into(), "B".into()],
            total_distance_m: 0.0,
            total_duration_s: 0.0,
            total_load_kg: 0.0,
        }],
        unassigned: vec!["C".into(), "D".into(), "E".into()],
        fitness: 0.0,
    };
    let penalized: BTreeSet<String> = ids.into_iter().collect();
    let f = evaluate(&solution, &inst, &penalized).map_err(e2s)?;
    ensure(inst.penalty == 500.0, || format!("default penalty {}", inst.penalty))?;
    ensure(f == 59_188.0, || format!("fitness {f}"))?;
    Ok(format!("57,688 m + 3 x 500 = {f}"))
}

fn metrics(routes: &[(usize, f64)]) -> PlanMetrics {
    PlanMetrics::from_routes(
        routes
            .iter()
            .enumerate()
            .map(|(k, &(containers, distance_m))| RouteMetrics {
                vehicle_id: format!("v{k}"),
                containers,
                duration_s: 0.0,
                distance_m,
                load_kg: 0.0,
            })
            .collect(),
    )
}

fn comparison_math() -> Outcome {
    // 76 containers averaging 779.57 m; the split across routes is immaterial.
    let plan = metrics(&[(40, 779.57 * 40.0), (36, 779.57 * 36.0)]);
    let baseline = metrics(&[(62, 72_353.0)]);
    ensure((plan.per_container.distance_m - 779.57).abs() < 1e-9, || {
        format!("plan average {}", plan.per_container.distance_m)
    })?;
    let s = compare::savings(&plan, &baseline).map_err(e2s)?;
    ensure((s.extrapolated_distance_m - 48_333.0).abs() <= 1.0, || {
        format!("extrapolated {}", s.extrapolated_distance_m)
    })?;
    ensure((s.extrapolated_pct - 33.2).abs() <= 0.1, || format!("savings {}", s.extrapolated_pct))?;
    Ok(format!(
        "extrapolated {:.2} m, savings {:.2}%",
        s.extrapolated_distance_m, s.extrapolated_pct
    ))
}

fn case_study(root: &Path) -> Outcome {
    let inst = generate(&SynthConfig::default()).map_err(e2s)?;
    let store = Store::create(root, inst.depot, &inst.containers, &inst.vehicles, &inst.history).map_err(e2s)?;
    let matrix = build_matrix(inst.depot, &inst.containers, &HaversineProvider::default(), 1.1).map_err(e2s)?;
    write_matrix(&matrix, &store.matrix_dir()).map_err(e2s)?;

    let start = Instant::now();
    let mut req = PlanRequest::new(inst.planning_date);
    req.model_tag = ModelTag::Gp;
    req.solver_config.iteration_budget = 10_000;
    let run = plan_day(&store, &req).map_err(e2s)?;
    let elapsed = start.elapsed();
    let plan = &run.plan;

    let small: Vec<&str> = inst.vehicles.iter().filter(|v| v.small).map(|v| v.id.as_str()).collect();
    let small_only: Vec<&str> = inst.containers.iter().filter(|c| c.small_only).map(|c| c.id.as_str()).collect();
    ensure(inst.containers.len() == 217 && small_only.len() == 9, || "instance dimensions".into())?;
    for id in &small_only {
        let route = plan.solution.routes.iter().find(|r| r.containers.iter().any(|c| c == id));
        ensure(route.is_some_and(|r| small.contains(&r.vehicle_id.as_str())), || {
            format!("{id} rides {:?}", route.map(|r| &r.vehicle_id))
        })?;
    }
    for r in &plan.solution.routes {
        let cap = inst.vehicles.iter().find(|v| v.id == r.vehicle_id).map(|v| v.capacity_kg).unwrap_or(0.0);
        ensure(r.total_load_kg <= cap + 1e-9, || format!("{} carries {} of {cap} kg", r.vehicle_id, r.total_load_kg))?;
    }
    ensure(elapsed <= Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let loads: Vec<String> = plan
        .solution
        .routes
        .iter()
        .map(|r| format!("{} {:.1} kg", r.vehicle_id, r.total_load_kg))
        .collect();
    Ok(format!(
        "{} selected, {} routed, 9/9 small_only on the small truck, {}, {:.1} s",
        plan.selection.selected().len(),
        plan.solution.assigned_count(),
        loads.join(", "),
        elapsed.as_secs_f64()
    ))
}

fn dense_gp_mean(xs: &[Vec<f64>], ys: &[f64], p: GpParams, x: &[f64]) -> f64 {
    let n = xs.len();
    let k = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        p.signal_sd * p.signal_sd * (-d / (2.0 * p.length_scale * p.length_scale)).exp()
    };
    let gram = DMatrix::from_fn(n, n, |i, j| k(&xs[i], &xs[j]) + if i == j { p.noise_sd * p.noise_sd } else { 0.0 });
    let alpha = gram.lu().solve(&DVector::from_column_slice(ys)).expect("gram matrix is non-singular");
    DVector::from_fn(n, |i, _| k(&xs[i], x)).dot(&alpha)
}

fn forecasting() -> Outcome {
    let inst = generate(&SynthConfig::default()).map_err(e2s)?;
    let config = ForecastConfig::default();

    // (a) GP means against a dense solve on real feature rows.
    let mut worst = 0.0f64;
    for c in inst.containers.iter().step_by(20) {
        let series = derive_daily_rates(&inst.history, c).map_err(e2s)?;
        let rows = build_rows(&series, config.window);
        let n = rows.len().min(50);
        let (train, test) = rows.split_at(n.saturating_sub(5));
        let xs: Vec<Vec<f64>> = train.iter().map(|r| r.inputs()).collect();
        let ys: Vec<f64> = train.iter().map(|r| r.target).collect();
        let p = GpParams::default();
        let gp = GaussianProcess::fit(xs.clone(), &ys, p).map_err(e2s)?;
        for r in test.iter().take(5) {
            let x = r.inputs();
            worst = worst.max((gp.predict_mean(&x) - dense_gp_mean(&xs, &ys, p, &x)).abs());
        }
    }
    ensure(worst < 1e-8, || format!("GP deviates from dense solve by {worst:e}"))?;

    // (b) every model beats last-rate persistence on most containers.
    let mut beats = Vec::new();
    for tag in ModelTag::ALL {
        let report = backtest(&inst.containers, &inst.history, 30, tag, &config).map_err(e2s)?;
        ensure(report.beat_fraction >= 0.8, || format!("{tag} beats the baseline on {:.3}", report.beat_fraction))?;
        beats.push(format!("{tag} {:.1}%", 100.0 * report.beat_fraction));
    }

    // (c) spread rates times capacity add back up to the collected mass.
    let mut worst_rel = 0.0f64;
    for c in &inst.containers {
        let series = derive_daily_rates(&inst.history, c).map_err(e2s)?;
        let mut days: Vec<_> = inst.history.iter().filter(|r| r.container_id == c.id).collect();
        days.sort_by_key(|r| r.date);
        let first = days[0].date;
        let collected: f64 = days
            .iter()
            .filter(|r| r.date > first)
            .map(|r| r.collected_kg.clamp(0.0, c.capacity_kg))
            .sum();
        let spread: f64 = series.daily_rate.iter().map(|r| r * c.capacity_kg).sum();
        worst_rel = worst_rel.max((spread - collected).abs() / collected.max(f64::MIN_POSITIVE));
    }
    ensure(worst_rel <= 1e-9, || format!("mass conservation off by {worst_rel:e}"))?;
    Ok(format!(
        "GP max deviation {worst:.1e}; baseline beaten: {}; mass error {worst_rel:.1e}",
        beats.join(", ")
    ))
}

fn selection_thresholds() -> Outcome {
    let date = NaiveDate::from_ymd_opt(2025, 12, 1).unwrap();
    let cases = [
        (0.85, SelectionClass::Mandatory),
        (0.80, SelectionClass::Optional),
        (0.50, SelectionClass::Excluded),
    ];
    let ids: Vec<String> = (0..cases.len()).map(|k| format!("C{k}")).collect();
    let forecasts: Vec<Forecast> = ids
        .iter()
        .zip(&cases)
        .map(|(id, &(fill, _))| Forecast {
            container_id: id.clone(),
            date,
            predicted_fill: fill,
            overflow: false,
            model_tag: ModelTag::Linear,
        })
        .collect();
    let r = select(&ids, &forecasts, &SelectionCriteria::default()).map_err(e2s)?;
    for (id, &(fill, want)) in ids.iter().zip(&cases) {
        let got = r.class_of(id);
        ensure(got == Some(want), || format!("fill {fill}: {got:?}, expected {want:?}"))?;
    }
    let fc = calibrated_forecasts(217, 77, 0.5, date, 1).map_err(e2s)?;
    let universe: Vec<String> = fc.iter().map(|f| f.container_id.clone()).collect();
    let r = select(&universe, &fc, &SelectionCriteria::default()).map_err(e2s)?;
    let chosen = r.selected().len();
    ensure(universe.len() == 217 && chosen == 77, || format!("{chosen} of {}", universe.len()))?;
    Ok("0.85 mandatory, 0.80 optional, 0.50 excluded; calibrated set selects 77 of 217".into())
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fillroute")).args(args).output().map_err(e2s)?;
    if !out.status.success() {
        return Err(format!("fillroute {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn determinism(root: &Path) -> Outcome {
    let stores: Vec<String> = ["a", "b"].iter().map(|s| root.join(s).display().to_string()).collect();
    for s in &stores {
        cli(&["gen-instance", "--out", s, "--seed", "5"])?;
        cli(&["build-matrix", "--store", s])?;
    }
    let date = "2025-12-01";
    let mut exports = Vec::new();
    let mut plan_id = String::new();
    for (k, s) in stores.iter().enumerate() {
        let out = root.join(format!("out{k}"));
        let summary = cli(&[
            "plan", "--store", s, "--date", date, "--model", "linear", "--iterations", "3000", "--seed", "9", "--out",
            &out.display().to_string(),
        ])?;
        let v: serde_json::Value = serde_json::from_str(&summary).map_err(e2s)?;
        plan_id = v["plan_id"].as_str().unwrap_or_default().to_string();
        let read = |name: &str| std::fs::read(out.join(name)).map_err(e2s);
        exports.push((read("plan.json")?, read("plan.geojson")?, read("trace.csv")?));
    }
    ensure(exports[0] == exports[1], || "CLI exports differ between two runs".into())?;

    // Same request over HTTP on a third, identical store.
    let third = root.join("c").display().to_string();
    cli(&["gen-instance", "--out", &third, "--seed", "5"])?;
    cli(&["build-matrix", "--store", &third])?;
    let store = Arc::new(Store::open(&third).map_err(e2s)?);
    let app = fillroute_planner::service::router(store);
    let body = serde_json::json!({
        "date": date,
        "model_tag": "linear",
        "solver_config": {"iteration_budget": 3000, "seed": 9},
    });
    let rt = tokio::runtime::Runtime::new().map_err(e2s)?;
    let call = |method: &str, uri: String, body: Option<String>| {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map(Body::from).unwrap_or_else(Body::empty))
            .unwrap();
        rt.block_on(async {
            let resp = app.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
        })
    };
    let (status, created) = call("POST", "/plans".into(), Some(body.to_string()));
    ensure(status == StatusCode::CREATED, || format!("POST /plans gave {status}"))?;
    let created: serde_json::Value = serde_json::from_slice(&created).map_err(e2s)?;
    let http_id = created["plan_id"].as_str().unwrap_or_default().to_string();
    ensure(http_id == plan_id, || format!("CLI plan {plan_id}, HTTP plan {http_id}"))?;
    let (_, doc) = call("GET", format!("/plans/{http_id}"), None);
    let (_, geo) = call("GET", format!("/plans/{http_id}/geojson"), None);
    ensure(doc == exports[0].0, || "HTTP plan document differs from the CLI export".into())?;
    ensure(geo == exports[0].1, || "HTTP GeoJSON differs from the CLI export".into())?;
    Ok(format!("plan {plan_id} byte-identical across two CLI runs and HTTP"))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let case_root = dir.path().join("case");
    let det_root = dir.path().join("determinism");
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("feasibility property suite", Box::new(feasibility_cycles)),
        ("penalized fitness arithmetic", Box::new(penalty_arithmetic)),
        ("comparison arithmetic", Box::new(comparison_math)),
        ("case-study scale and runtime", Box::new(move || case_study(&case_root))),
        ("forecasting properties", Box::new(forecasting)),
        ("selection thresholds", Box::new(selection_thresholds)),
        ("determinism", Box::new(move || determinism(&det_root))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
