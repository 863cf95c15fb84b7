use gridfuse::flight::{plan_trajectory, read_pylons_csv, FlightPlanConfig, Pass};
use serde_json::json;

use crate::failure::{flag, Failure, Outcome};
use crate::manifest::{self, Manifest};
use crate::{io, PlanArgs, Shared};

pub fn plan(args: &PlanArgs, _shared: &Shared) -> Outcome {
    let config = FlightPlanConfig {
        height_above_line: args.height,
        depression_angle: args.angle.to_radians(),
        lateral_offset: args.offset,
        v_min: args.v_min,
        v_max: args.v_max,
        spacing: args.spacing,
        max_speed_gradient: args.max_gradient,
    };
    flag(config.validate())?;

    let text = std::fs::read_to_string(&args.pylons).map_err(|e| Failure::from(e).at(&args.pylons))?;
    let pylons = read_pylons_csv(&text).map_err(|e| Failure::from(e).at(&args.pylons))?;
    let plan = plan_trajectory(&pylons, &config).map_err(|e| Failure::from(e).at(&args.pylons))?;

    let mut bytes = Vec::new();
    plan.write_csv(&mut bytes)?;
    io::write(&args.out, &bytes)?;

    let count = |p: Pass| plan.pass(p).count();
    let slow = plan.waypoints.iter().filter(|w| w.speed <= config.v_min).count();
    println!(
        "{} pylons, {} waypoints ({} forward, {} turn, {} backward), {:.1} m, look-ahead {:.2} m, {slow} at minimum speed",
        pylons.len(),
        plan.waypoints.len(),
        count(Pass::Forward),
        count(Pass::Turn),
        count(Pass::Backward),
        plan.length(),
        config.look_ahead_distance()
    );

    let mut m = Manifest::new("plan", json!(args));
    m.input(&args.pylons)?;
    m.output(&args.out)?;
    m.results = json!({
        "waypoints": plan.waypoints.len(),
        "length": plan.length(),
        "look_ahead_distance": config.look_ahead_distance(),
    });
    m.write(&manifest::path_for(&args.out))
}
