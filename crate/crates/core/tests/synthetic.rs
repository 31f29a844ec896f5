use fillroute_core::costmatrix::{build_matrix, HaversineProvider};
use fillroute_core::forecast::derive_daily_rates;
use fillroute_core::synth::{generate, SynthConfig};

#[test]
fn defaults_reproduce_case_study_dimensions() {
    let inst = generate(&SynthConfig::default()).unwrap();
    assert_eq!(inst.containers.len(), 217);
    assert_eq!(inst.containers.iter().filter(|c| c.small_only).count(), 9);
    assert_eq!(inst.vehicles.len(), 2);
    assert!(inst.containers.iter().all(|c| c.capacity_kg == 75.0 && c.unload_time_s == 210.0));
    assert_eq!(inst.planning_date.to_string(), "2025-12-01");

    let m = build_matrix(inst.depot, &inst.containers, &HaversineProvider::default(), 1.0).unwrap();
    assert_eq!(m.node_count(), 218);

    for c in &inst.containers {
        let s = derive_daily_rates(&inst.history, c).unwrap();
        let days = (s.end_date().unwrap() - s.start_date).num_days() as usize + 1;
        assert_eq!(s.len(), days, "{} has gaps", c.id);
        assert!(s.daily_rate.iter().all(|r| r.is_finite() && *r >= 0.0));
    }
}

#[test]
fn generation_is_seeded() {
    let cfg = SynthConfig {
        n_containers: 30,
        n_small_only: 3,
        n_selected: 10,
        months_history: 2,
        ..Default::default()
    };
    assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    let other = SynthConfig { seed: 8, ..cfg.clone() };
    assert_ne!(generate(&cfg).unwrap().history, generate(&other).unwrap().history);
}
