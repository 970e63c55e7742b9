use ri_switch::policies::{CAUTIOUS_GROUP, NORMAL_GROUP};
use ri_switch::sim::lidar::raycast;
use ri_switch::sim::{run_scenario, ControlMode, Disc, LidarConfig, Scenario, TrackConfig, TrackMap, Vec2};
use ri_switch::tracelog::{from_json, traces_by_car};

fn short(cars: usize, peds: usize, seed: u64, ticks: u64) -> Scenario {
    let mut sc = Scenario { cars, seed, max_ticks: ticks, record_trace: true, ..Scenario::default() };
    sc.pedestrians.cap = peds;
    sc.car_spawn_interval = 5.0;
    sc
}

#[test]
fn scan_matches_corridor_geometry() {
    let map = TrackMap::new(TrackConfig::default(), 0.3).unwrap();
    let (pos, heading) = map.start();
    assert_eq!((pos.x, pos.y), (1.0, 5.0));
    let cfg = LidarConfig::default();
    let rays = raycast(&map, &[], pos, heading, &cfg);
    assert_eq!(rays.len(), 61);
    for (i, r) in rays.iter().enumerate() {
        let theta = (-115.0 + 230.0 * i as f64 / 60.0_f64).to_radians();
        // side walls are 1 m away; rays steeper than cot = 3 stay within the
        // straight section, flatter ones run down the corridor
        if theta.tan().abs() >= 1.0 / 3.0 {
            let expected = (1.0 / theta.sin().abs()).min(5.0);
            assert!((r - expected).abs() < 1e-9, "ray {i}: {r} vs {expected}");
        }
        assert!(*r > 0.0 && *r <= 5.0);
    }
    assert_eq!(rays[30], 5.0);

    let ped = Disc { center: Vec2::new(1.0, 7.0), radius: 0.25 };
    let rays = raycast(&map, &[ped], pos, heading, &cfg);
    assert!((rays[30] - 1.75).abs() < 1e-9);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let sc = short(2, 2, 42, 900);
    for mode in [ControlMode::Bare, ControlMode::Ri] {
        let a = run_scenario(&sc, mode).unwrap();
        let b = run_scenario(&sc, mode).unwrap();
        assert_eq!(a, b);
    }
    let other = run_scenario(&Scenario { seed: 43, ..sc.clone() }, ControlMode::Ri).unwrap();
    assert_ne!(other.trace, run_scenario(&sc, ControlMode::Ri).unwrap().trace);
}

#[test]
fn recorded_inputs_stay_in_range() {
    for seed in 0..4 {
        let sc = short(3, 2, seed, 900);
        let r = run_scenario(&sc, ControlMode::Ri).unwrap();
        assert!(!r.trace.is_empty());
        for rec in &r.trace {
            let input = from_json(&rec.input);
            let rays = input.get(0).unwrap().as_array().unwrap();
            let v = input.get(1).unwrap().as_scalar().unwrap();
            assert_eq!(rays.len(), 61);
            assert!(rays.iter().all(|d| *d >= 0.0 && *d <= 5.0));
            assert!((0.0..=sc.vehicle.v_max + 1e-12).contains(&v), "speed {v}");
            if let Some(y) = &rec.released {
                let y = from_json(y);
                let d = y.get(0).unwrap().as_scalar().unwrap();
                assert!((-1.0..=1.0).contains(&d), "steer {d}");
            }
        }
    }
}

#[test]
fn mode_occupancy_covers_every_active_tick() {
    for seed in 0..4 {
        let r = run_scenario(&short(3, 2, seed, 900), ControlMode::Ri).unwrap();
        for car in &r.cars {
            assert_eq!(car.mode_ticks.iter().sum::<u64>(), car.active_ticks);
            assert!(car.changes < car.active_ticks.max(1));
        }
    }
}

#[test]
fn empty_road_runs_in_normal_mode_only() {
    let r = run_scenario(&short(3, 0, 5, 1200), ControlMode::Ri).unwrap();
    assert_eq!(r.spawned_cars(), 3);
    assert!(!r.any_crash());
    for car in &r.cars {
        assert_eq!(car.mode_ticks[NORMAL_GROUP], car.active_ticks);
        assert_eq!(car.changes, 0);
    }
    assert!(r.audit_ok());
}

#[test]
fn audit_finds_no_trap_entry_or_thawed_controller() {
    for seed in 10..16 {
        let r = run_scenario(&short(3, 2, seed, 1500), ControlMode::Ri).unwrap();
        for car in &r.cars {
            let audit = car.audit.as_ref().expect("audit enabled");
            assert_eq!(audit.trap_entered, None);
            assert_eq!(audit.frozen_violation, None);
            assert!(audit.report.all_pass(), "{}", audit.report);
        }
    }
}

#[test]
fn recorded_trace_splits_per_car() {
    let r = run_scenario(&short(2, 1, 3, 600), ControlMode::Ri).unwrap();
    let runs = traces_by_car(&r.trace).unwrap();
    assert_eq!(runs.len(), r.spawned_cars());
    for run in &runs {
        let car = &r.cars[run.car.unwrap()];
        assert_eq!(run.released.len() as u64, car.active_ticks);
        assert_eq!(run.histories.len(), 3);
        // the cautious group is suspended whenever its policy would be trapped
        let suspended = run.histories[CAUTIOUS_GROUP].events().iter().filter(|e| e.output.is_none()).count();
        assert!(suspended > 0);
    }
}

#[test]
fn bare_mode_records_no_manager_state() {
    let r = run_scenario(&short(1, 0, 0, 300), ControlMode::Bare).unwrap();
    assert!(r.trace.is_empty());
    assert!(r.cars.iter().all(|c| c.audit.is_none() && c.changes == 0));
}

#[test]
fn scenario_files_fill_in_defaults() {
    let sc = Scenario::from_toml("cars = 2\nseed = 9\n[pedestrians]\ncap = 1\n[track]\ncorridor = 2.5\n").unwrap();
    assert_eq!((sc.cars, sc.seed, sc.pedestrians.cap), (2, 9, 1));
    assert_eq!(sc.track.corridor, 2.5);
    assert_eq!(sc.max_ticks, 2400);
    assert_eq!(sc.spawn_ticks(), [0, 300]);
    assert!(Scenario::from_toml("cars = \"two\"").is_err());
}

#[test]
fn bad_configuration_is_reported() {
    let mut sc = short(1, 0, 0, 10);
    sc.lidar.rays = 60;
    assert!(run_scenario(&sc, ControlMode::Ri).is_err());
    let mut sc = short(1, 0, 0, 10);
    sc.track.corridor = 0.1;
    assert!(run_scenario(&sc, ControlMode::Ri).is_err());
}
