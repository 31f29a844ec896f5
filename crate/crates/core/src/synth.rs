//! Reproducible synthetic case-study instances.
//!
//! Every container has a latent daily deposit process: a base rate scaled by
//! a per-weekday multiplier (weekends heavier) and 10% multiplicative noise.
//! Containers are emptied on a fixed weekly schedule of two or three days,
//! which produces the sparse collection history. Base rates are calibrated
//! so that a chosen number of containers sit above 50% on the planning day.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{Datelike, Months, NaiveDate};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Container, CostMatrix, FillRecord, Forecast, GeoPoint, ModelTag, PlanningInstance, Task, Vehicle, DEFAULT_PENALTY,
};

const METERS_PER_DEGREE: f64 = 111_195.0;
const WARM_UP_DAYS: i64 = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_containers: usize,
    pub n_small_only: usize,
    /// Containers calibrated above the optional threshold on the planning day.
    pub n_selected: usize,
    pub capacity_kg: f64,
    pub unload_time_s: f64,
    pub vehicles: Vec<Vehicle>,
    pub months_history: u32,
    pub start_date: NaiveDate,
    pub centre: GeoPoint,
    pub radius_m: f64,
    /// Depot offset from the centre, due east.
    pub depot_offset_m: f64,
    pub small_only_radius_m: f64,
    pub noise: f64,
    pub seed: u64,
}

pub fn default_fleet() -> Vec<Vehicle> {
    vec![
        Vehicle {
            id: "small".into(),
            capacity_kg: 1700.0,
            small: true,
            cost_per_km: 0.9,
            registration: "1234-SML".into(),
        },
        Vehicle {
            id: "big".into(),
            capacity_kg: 2000.0,
            small: false,
            cost_per_km: 1.2,
            registration: "5678-BIG".into(),
        },
    ]
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_containers: 217,
            n_small_only: 9,
            n_selected: 77,
            capacity_kg: 75.0,
            unload_time_s: 210.0,
            vehicles: default_fleet(),
            months_history: 11,
            start_date: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
            centre: GeoPoint::new(36.72, -4.42),
            radius_m: 3_000.0,
            depot_offset_m: 2_000.0,
            small_only_radius_m: 350.0,
            noise: 0.1,
            seed: 7,
        }
    }
}

/// Latent generating parameters of one container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentProcess {
    pub container_id: String,
    pub base_rate: f64,
    /// Monday first.
    pub weekday_multiplier: [f64; 7],
    /// Collection weekdays, Monday = 0.
    pub schedule: Vec<u32>,
    /// Noise-free fill expected on the planning day.
    pub target_fill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthInstance {
    pub depot: GeoPoint,
    pub containers: Vec<Container>,
    pub vehicles: Vec<Vehicle>,
    pub history: Vec<FillRecord>,
    /// First day after the history.
    pub planning_date: NaiveDate,
    pub latent: Vec<LatentProcess>,
}

fn offset(centre: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let lat = centre.lat + north_m / METERS_PER_DEGREE;
    let lon = centre.lon + east_m / (METERS_PER_DEGREE * centre.lat.to_radians().cos());
    GeoPoint::new(lat, lon)
}

fn point_in_disk(rng: &mut impl Rng, centre: GeoPoint, radius: f64) -> GeoPoint {
    let r = radius * rng.random::<f64>().sqrt();
    let a = std::f64::consts::TAU * rng.random::<f64>();
    offset(centre, r * a.cos(), r * a.sin())
}

/// Sum of weekday multipliers over the days of each schedule gap, keyed by
/// the weekday that closes the gap.
fn gap_sums(schedule: &[u32], mult: &[f64; 7]) -> Vec<(u32, f64)> {
    let mut days = schedule.to_vec();
    days.sort_unstable();
    (0..days.len())
        .map(|k| {
            let end = days[k];
            let prev = days[(k + days.len() - 1) % days.len()];
            let len = (end + 7 - prev - 1) % 7 + 1;
            let sum = (0..len).map(|i| mult[((end + 7 - i) % 7) as usize]).sum();
            (end, sum)
        })
        .collect()
}

/// Multiplier sum from the last scheduled collection before `day` through
/// `day` itself.
fn sum_since_collection(schedule: &[u32], mult: &[f64; 7], day: u32) -> f64 {
    let mut sum = 0.0;
    for back in 0..7 {
        let wd = (day + 7 - back) % 7;
        if back > 0 && schedule.contains(&wd) {
            break;
        }
        sum += mult[wd as usize];
    }
    sum
}

pub fn generate(config: &SynthConfig) -> Result<SynthInstance> {
    if config.n_small_only > config.n_containers {
        return Err(Error::InvalidParameter(format!(
            "{} small-only containers requested out of {}",
            config.n_small_only, config.n_containers
        )));
    }
    if config.n_selected > config.n_containers || config.n_selected < config.n_small_only {
        return Err(Error::InvalidParameter(format!(
            "selected count {} must lie between the small-only count {} and the container count {}",
            config.n_selected, config.n_small_only, config.n_containers
        )));
    }
    if !(config.capacity_kg > 0.0 && config.unload_time_s >= 0.0) {
        return Err(Error::InvalidParameter("capacity must be positive and unload time non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let end = config
        .start_date
        .checked_add_months(Months::new(config.months_history))
        .ok_or_else(|| Error::InvalidParameter("history end date out of range".into()))?;
    let planning_wd = end.weekday().num_days_from_monday();

    let n = config.n_containers;
    let regular = n - config.n_small_only;
    let picked: Vec<usize> = sample(&mut rng, regular, config.n_selected - config.n_small_only).into_vec();
    let mut selected = vec![false; n];
    for k in picked {
        selected[k] = true;
    }

    let mut containers = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for k in 0..n {
        let small_only = k >= regular;
        let id = format!("C{:03}", k + 1);
        let location = if small_only {
            point_in_disk(&mut rng, config.centre, config.small_only_radius_m)
        } else {
            point_in_disk(&mut rng, config.centre, config.radius_m)
        };
        containers.push(Container {
            id: id.clone(),
            location,
            capacity_kg: config.capacity_kg,
            unload_time_s: config.unload_time_s,
            small_only,
            has_sensor: false,
            address: format!("Street {}, {}", k % 40 + 1, k / 40 + 1),
            group: format!("sector-{}", k % 6 + 1),
        });

        let mut mult = [1.0; 7];
        for m in mult.iter_mut().take(5) {
            *m = rng.random_range(0.95..1.05);
        }
        mult[5] = rng.random_range(1.25..1.4);
        mult[6] = rng.random_range(1.35..1.5);

        let three = small_only || rng.random_bool(0.5);
        let (schedule, target) = if small_only {
            (vec![planning_wd, (planning_wd + 2) % 7, (planning_wd + 4) % 7], rng.random_range(0.86..0.95))
        } else if selected[k] {
            let sched = if three {
                vec![planning_wd, (planning_wd + 2) % 7, (planning_wd + 4) % 7]
            } else {
                vec![planning_wd, (planning_wd + 3) % 7]
            };
            let f = if rng.random_bool(0.2) {
                rng.random_range(0.81..0.9)
            } else {
                rng.random_range(0.52..0.68)
            };
            (sched, f)
        } else {
            let first = rng.random_range(0..7u32);
            let sched = if three {
                vec![first, (first + 2) % 7, (first + 4) % 7]
            } else {
                vec![first, (first + 3) % 7]
            };
            (sched, rng.random_range(0.08..0.45))
        };
        let mut schedule = schedule;
        schedule.sort_unstable();
        let s_plan = sum_since_collection(&schedule, &mult, planning_wd);
        let s_max = gap_sums(&schedule, &mult).iter().map(|g| g.1).fold(0.0, f64::max);
        let base_rate = (target / s_plan).min(0.97 / s_max);
        latent.push(LatentProcess {
            container_id: id,
            base_rate,
            weekday_multiplier: mult,
            target_fill: base_rate * s_plan,
            schedule,
        });
    }

    let mut history = Vec::new();
    if config.months_history > 0 {
        for (c, lp) in containers.iter().zip(&latent) {
            let mut fill = 0.0;
            let mut prev_collected = false;
            let mut day = config.start_date - chrono::Days::new(WARM_UP_DAYS as u64);
            while day < end {
                let wd = day.weekday().num_days_from_monday();
                let noise: f64 = rng.sample(StandardNormal);
                fill += lp.base_rate * lp.weekday_multiplier[wd as usize] * (1.0 + config.noise * noise).max(0.0);
                let collect = lp.schedule.contains(&wd);
                if collect {
                    if day >= config.start_date {
                        let kg = (fill.min(1.0) * c.capacity_kg * 1e4).round() / 1e4;
                        history.push(FillRecord::new(&c.id, day, kg, prev_collected));
                    }
                    fill = 0.0;
                }
                prev_collected = collect;
                day = day.succ_opt().expect("date overflow");
            }
        }
        history.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.container_id.cmp(&b.container_id)));
    }

    let depot = offset(config.centre, config.depot_offset_m, 0.0);
    Ok(SynthInstance {
        depot,
        containers,
        vehicles: config.vehicles.clone(),
        history,
        planning_date: end,
        latent,
    })
}

/// Forecast set of `n` containers with exactly `n_selected` fills above
/// `threshold`, the remaining ones at or below it.
pub fn calibrated_forecasts(
    n: usize,
    n_selected: usize,
    threshold: f64,
    date: NaiveDate,
    seed: u64,
) -> Result<Vec<Forecast>> {
    if n_selected > n || !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidParameter("invalid calibration request".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample(&mut rng, n, n_selected).into_vec();
    let mut above = vec![false; n];
    for k in chosen {
        above[k] = true;
    }
    Ok((0..n)
        .map(|k| {
            let u: f64 = rng.random();
            // (threshold, 1] above; [0, threshold] below.
            let fill = if above[k] {
                1.0 - u * (1.0 - threshold) * 0.999
            } else {
                u * threshold
            };
            Forecast {
                container_id: format!("C{:03}", k + 1),
                date,
                predicted_fill: fill,
                overflow: false,
                model_tag: ModelTag::Gp,
            }
        })
        .collect())
}

/// Small random routing instance: containers scattered over a 2 km square,
/// an arc-wise randomly skewed (asymmetric) matrix, random demands and one
/// or two vehicles of different sizes. The first `n_small_only` containers
/// are small-only. Roughly two thirds of the containers are penalized.
pub fn routing_instance(
    rng: &mut impl Rng,
    n_containers: usize,
    n_vehicles: usize,
    n_small_only: usize,
) -> (PlanningInstance, BTreeSet<String>) {
    let pts: Vec<(f64, f64)> = (0..=n_containers)
        .map(|_| (rng.random_range(0.0..2_000.0), rng.random_range(0.0..2_000.0)))
        .collect();
    let m = n_containers + 1;
    let mut distance = vec![0.0; m * m];
    let mut duration = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                distance[i * m + j] = (d * rng.random_range(1.0..1.6)).round();
                duration[i * m + j] = (distance[i * m + j] / 8.33).round();
            }
        }
    }
    let ids: Vec<String> = (1..=n_containers).map(|k| format!("C{k}")).collect();
    let matrix = CostMatrix::new(ids.clone(), distance, duration).expect("valid random matrix");
    let tasks = ids
        .iter()
        .enumerate()
        .map(|(k, id)| Task {
            container: Container {
                id: id.clone(),
                location: GeoPoint::new(36.72 + pts[k + 1].1 / METERS_PER_DEGREE, -4.42 + pts[k + 1].0 / METERS_PER_DEGREE),
                capacity_kg: 75.0,
                unload_time_s: 210.0,
                small_only: k < n_small_only,
                has_sensor: false,
                address: String::new(),
                group: String::new(),
            },
            demand_kg: rng.random_range(20.0..75.0_f64).round(),
        })
        .collect();
    let vehicles = (0..n_vehicles)
        .map(|v| Vehicle {
            id: if v == 0 { "small".into() } else { format!("big{v}") },
            capacity_kg: if v == 0 {
                rng.random_range(80.0..180.0_f64).round()
            } else {
                rng.random_range(120.0..260.0_f64).round()
            },
            small: v == 0,
            cost_per_km: 1.0,
            registration: String::new(),
        })
        .collect();
    let penalized = ids.iter().filter(|_| rng.random_bool(2.0 / 3.0)).cloned().collect();
    let mut inst = PlanningInstance::new(
        GeoPoint::new(36.72 + pts[0].1 / METERS_PER_DEGREE, -4.42 + pts[0].0 / METERS_PER_DEGREE),
        tasks,
        vehicles,
        Arc::new(matrix),
    );
    inst.penalty = DEFAULT_PENALTY;
    (inst, penalized)
}

/// Fixed randomized suite of `count` tiny instances with 3 to 6 containers
/// and one or two vehicles; every other instance has at least one
/// small-only container.
pub fn routing_suite(seed: u64, count: usize) -> Vec<(PlanningInstance, BTreeSet<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = rng.random_range(3..=6);
            let v = rng.random_range(1..=2);
            let small = if k % 2 == 0 { rng.random_range(1..=n.min(2)) } else { 0 };
            routing_instance(&mut rng, n, v, small)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_sums_cover_the_week() {
        let mult = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let g = gap_sums(&[0, 3], &mult);
        // Thu -> Mon covers Fri, Sat, Sun, Mon; Mon -> Thu covers Tue-Thu.
        assert_eq!(g, vec![(0, 7.0), (3, 3.0)]);
        let total: f64 = g.iter().map(|x| x.1).sum();
        assert_eq!(total, mult.iter().sum::<f64>());
        assert_eq!(sum_since_collection(&[0, 3], &mult, 0), 7.0);
        assert_eq!(sum_since_collection(&[0, 3], &mult, 6), 6.0);
    }

    #[test]
    fn zero_months_gives_empty_history() {
        let cfg = SynthConfig {
            months_history: 0,
            n_containers: 10,
            n_small_only: 2,
            n_selected: 4,
            ..Default::default()
        };
        let inst = generate(&cfg).unwrap();
        assert!(inst.history.is_empty());
        assert_eq!(inst.containers.len(), 10);
    }

    #[test]
    fn invalid_counts_are_rejected() {
        let cfg = SynthConfig {
            n_containers: 5,
            n_small_only: 6,
            ..Default::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
