mod common;

use common::*;
use gridfuse::flight::{plan_trajectory, read_pylons_csv, speed_profile, FlightPlanConfig, Pass, Pylon};
use proptest::prelude::*;
use rand::Rng;

fn route(seed: u64, n: usize) -> Vec<Pylon> {
    let mut r = rng(seed);
    let (mut x, mut y, mut heading) = (0.0f64, 0.0f64, r.gen_range(-3.1f64..3.1));
    (0..n)
        .map(|i| {
            let p = Pylon::new(format!("p{i}"), x, y, r.gen_range(15.0..80.0));
            heading += r.gen_range(-0.8..0.8);
            let step = r.gen_range(30.0..300.0);
            x += step * heading.cos();
            y += step * heading.sin();
            p
        })
        .collect()
}

fn config() -> impl Strategy<Value = FlightPlanConfig> {
    (5.0f64..60.0, 0.3f64..1.5, 0.0f64..15.0, 2.0f64..20.0, 0.1f64..2.0).prop_map(|(h, a, off, spacing, g)| {
        FlightPlanConfig {
            height_above_line: h,
            depression_angle: a,
            lateral_offset: off,
            spacing,
            max_speed_gradient: g,
            ..Default::default()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Flying the route in reverse swaps the two passes.
    #[test]
    fn reversed_route_mirrors_passes(seed in 0u64..100_000, n in 2usize..7, cfg in config()) {
        let pylons = route(seed, n);
        let reversed: Vec<Pylon> = pylons.iter().rev().cloned().collect();
        let a = plan_trajectory(&pylons, &cfg).unwrap();
        let b = plan_trajectory(&reversed, &cfg).unwrap();
        let back: Vec<[f64; 3]> = a.pass(Pass::Backward).map(|w| w.position).collect();
        let fwd: Vec<[f64; 3]> = b.pass(Pass::Forward).map(|w| w.position).collect();
        // The backward pass may lose its first point to a merge with the U-turn.
        let skip = fwd.len() - back.len();
        prop_assert!(skip <= 1);
        prop_assert_eq!(&fwd[skip..], &back[..]);
    }

    #[test]
    fn speeds_respect_bounds_and_gradient(seed in 0u64..100_000, n in 2usize..7, cfg in config()) {
        let plan = plan_trajectory(&route(seed, n), &cfg).unwrap();
        let d = cfg.look_ahead_distance();
        for pair in plan.waypoints.windows(2) {
            let ds = pair[1].station - pair[0].station;
            prop_assert!(ds > 0.0);
            prop_assert!((pair[1].speed - pair[0].speed).abs() <= cfg.max_speed_gradient * ds + 1e-9);
        }
        for w in &plan.waypoints {
            prop_assert!(w.speed >= cfg.v_min && w.speed <= cfg.v_max);
            let in_window = plan.pylon_stations.iter().any(|&s| w.station >= s - d && w.station <= s);
            if in_window || w.pass == Pass::Turn {
                prop_assert_eq!(w.speed, cfg.v_min);
            }
        }
        prop_assert_eq!(speed_profile(&plan, &cfg), plan.waypoints.iter().map(|w| w.speed).collect::<Vec<_>>());
    }

    #[test]
    fn spacing_is_respected(seed in 0u64..100_000, n in 2usize..7, cfg in config()) {
        let plan = plan_trajectory(&route(seed, n), &cfg).unwrap();
        for pass in [Pass::Forward, Pass::Backward] {
            let pts: Vec<_> = plan.pass(pass).collect();
            for pair in pts.windows(2) {
                let (a, b) = (pair[0].position, pair[1].position);
                let horizontal = (b[0] - a[0]).hypot(b[1] - a[1]);
                prop_assert!(horizontal <= cfg.spacing + 1e-9 || (pair[0].heading - pair[1].heading).abs() > 1e-12);
            }
        }
    }
}

#[test]
fn two_pylon_example() {
    // 100 m span at 30 m, default 25 m above the line, 5 m to the right.
    let pylons = [Pylon::new("a", 0.0, 0.0, 30.0), Pylon::new("b", 100.0, 0.0, 30.0)];
    let cfg = FlightPlanConfig::default();
    let plan = plan_trajectory(&pylons, &cfg).unwrap();
    let fwd: Vec<_> = plan.pass(Pass::Forward).collect();
    assert_eq!(fwd[0].position, [0.0, -5.0, 55.0]);
    assert_eq!(fwd.last().unwrap().position, [100.0, -5.0, 55.0]);
    assert!(fwd.iter().all(|w| w.heading == 0.0));
    let back: Vec<_> = plan.pass(Pass::Backward).collect();
    assert!(back.iter().all(|w| w.position[1] == 5.0));
    assert_eq!(back.last().unwrap().position, [0.0, 5.0, 55.0]);
    assert_eq!(plan.pass(Pass::Turn).count(), 5);
    assert_eq!(plan.pylon_stations.len(), 4);
    assert_eq!(plan.waypoints[0].speed, cfg.v_min);
}

#[test]
fn csv_round_trip() {
    let text = "id,x,y,z_top\nT1,0,0,30\nT2,120.5,10,32.5\nT3,250,-20,28\n";
    let pylons = read_pylons_csv(text).unwrap();
    assert_eq!(pylons.len(), 3);
    assert_eq!(pylons[1], Pylon::new("T2", 120.5, 10.0, 32.5));
    let plan = plan_trajectory(&pylons, &FlightPlanConfig::default()).unwrap();
    let mut out = Vec::new();
    plan.write_csv(&mut out).unwrap();
    let out = String::from_utf8(out).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,y,z,speed,heading,pass"));
    assert_eq!(lines.count(), plan.waypoints.len());
    assert!(out.contains(",turn\n") && out.contains(",backward\n"));
}

#[test]
fn invalid_input_is_rejected() {
    let cfg = FlightPlanConfig::default();
    assert!(plan_trajectory(&[Pylon::new("a", 0.0, 0.0, 1.0)], &cfg).is_err());
    let dup = [Pylon::new("a", 0.0, 0.0, 1.0), Pylon::new("b", 0.0, 0.0, 1.0)];
    assert!(plan_trajectory(&dup, &cfg).is_err());
    let ok = [Pylon::new("a", 0.0, 0.0, 1.0), Pylon::new("b", 50.0, 0.0, 1.0)];
    let bad = FlightPlanConfig { depression_angle: 0.0, ..cfg.clone() };
    assert!(plan_trajectory(&ok, &bad).is_err());
    let bad = FlightPlanConfig { v_min: 12.0, ..cfg };
    assert!(plan_trajectory(&ok, &bad).is_err());
    assert!(read_pylons_csv("id,x,y\nA,0,0\n").is_err());
    assert!(read_pylons_csv("id,x,y,z_top\nA,0,zero,3\n").is_err());
}
