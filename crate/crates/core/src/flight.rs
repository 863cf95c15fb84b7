//! Corridor flight plans over a pylon sequence.
//!
//! The plan flies the pylon line once in each direction at a fixed height
//! above the straight conductor line between consecutive pylon tops, joined
//! by a semicircular U-turn around the last pylon. The forward pass is offset
//! to the right of travel; the backward pass is generated the same way on the
//! reversed pylon list, which puts it on the other side of the line.
//!
//! Speeds drop to `v_min` over the look-ahead window `[s_p - d, s_p]` before
//! each pylon at along-track station `s_p`, where `d = H / tan(alpha)` is the
//! distance at which an oblique sensor tilted `alpha` below the horizon,
//! flying `H` above the pylon top, first aims at it. Elsewhere the target is
//! `v_max`, and changes between waypoints are limited to
//! `max_speed_gradient` m/s per metre of track.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Waypoints closer than this are merged.
const MERGE_TOL: f64 = 1e-6;
const TURN_POINTS: usize = 5;
pub const MIN_TURN_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pylon {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z_top: f64,
}

impl Pylon {
    pub fn new(id: impl Into<String>, x: f64, y: f64, z_top: f64) -> Self {
        Self {
            id: id.into(),
            x,
            y,
            z_top,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlanConfig {
    /// Height above the conductor line, metres.
    pub height_above_line: f64,
    /// Sensor depression below the horizon, radians, in `(0, pi/2)`.
    pub depression_angle: f64,
    /// Lateral offset from the line, metres.
    pub lateral_offset: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Maximum waypoint spacing along a segment, metres.
    pub spacing: f64,
    /// Largest allowed speed change per metre of track, (m/s)/m.
    pub max_speed_gradient: f64,
}

impl Default for FlightPlanConfig {
    fn default() -> Self {
        Self {
            height_above_line: 25.0,
            depression_angle: 50f64.to_radians(),
            lateral_offset: 5.0,
            v_min: 2.0,
            v_max: 10.0,
            spacing: 10.0,
            max_speed_gradient: 0.5,
        }
    }
}

impl FlightPlanConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.height_above_line) {
            return Err(Error::invalid("height above line must be > 0"));
        }
        if !(self.depression_angle > 0.0 && self.depression_angle < PI / 2.0) {
            return Err(Error::invalid("depression angle must lie in (0, pi/2)"));
        }
        if !(self.lateral_offset.is_finite() && self.lateral_offset >= 0.0) {
            return Err(Error::invalid("lateral offset must be >= 0"));
        }
        if !(pos(self.v_min) && self.v_max.is_finite() && self.v_min <= self.v_max) {
            return Err(Error::invalid("speeds must satisfy 0 < v_min <= v_max"));
        }
        if !pos(self.spacing) {
            return Err(Error::invalid("waypoint spacing must be > 0"));
        }
        if !pos(self.max_speed_gradient) {
            return Err(Error::invalid("maximum speed gradient must be > 0"));
        }
        Ok(())
    }

    /// `H / tan(alpha)`.
    pub fn look_ahead_distance(&self) -> f64 {
        self.height_above_line / self.depression_angle.tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    Forward,
    Turn,
    Backward,
}

impl Pass {
    pub fn as_str(self) -> &'static str {
        match self {
            Pass::Forward => "forward",
            Pass::Turn => "turn",
            Pass::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Waypoint {
    pub position: [f64; 3],
    pub speed: f64,
    /// Direction of travel, radians counter-clockwise from +X.
    pub heading: f64,
    pub pass: Pass,
    /// Cumulative track length from the first waypoint, metres.
    pub station: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlan {
    pub waypoints: Vec<Waypoint>,
    /// Stations at which the plan passes a pylon, in flight order.
    pub pylon_stations: Vec<f64>,
}

impl FlightPlan {
    pub fn pass(&self, pass: Pass) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.iter().filter(move |w| w.pass == pass)
    }

    pub fn length(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.station)
    }

    /// CSV with columns `x,y,z,speed,heading,pass`; heading in radians.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::data(format!("writing plan: {e}"));
        out.write_record(["x", "y", "z", "speed", "heading", "pass"])
            .map_err(csv_err)?;
        for wp in &self.waypoints {
            out.write_record([
                format!("{:.6}", wp.position[0]),
                format!("{:.6}", wp.position[1]),
                format!("{:.6}", wp.position[2]),
                format!("{:.6}", wp.speed),
                format!("{:.9}", wp.heading),
                wp.pass.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads `id,x,y,z_top` rows with a header line.
pub fn read_pylons_csv(text: &str) -> Result<Vec<Pylon>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (n, rec) in reader.deserialize::<Pylon>().enumerate() {
        out.push(rec.map_err(|e| Error::data(format!("pylon row {}: {e}", n + 1)))?);
    }
    Ok(out)
}

fn validate_pylons(pylons: &[Pylon]) -> Result<()> {
    if pylons.len() < 2 {
        return Err(Error::invalid(format!(
            "a corridor needs at least 2 pylons, got {}",
            pylons.len()
        )));
    }
    for p in pylons {
        if !(p.x.is_finite() && p.y.is_finite() && p.z_top.is_finite()) {
            return Err(Error::invalid(format!("pylon '{}' has non-finite coordinates", p.id)));
        }
    }
    for w in pylons.windows(2) {
        if (w[1].x - w[0].x).hypot(w[1].y - w[0].y) <= MERGE_TOL {
            return Err(Error::invalid(format!(
                "consecutive pylons '{}' and '{}' coincide in plan view",
                w[0].id, w[1].id
            )));
        }
    }
    Ok(())
}

struct RawPoint {
    position: [f64; 3],
    heading: f64,
    pass: Pass,
    at_pylon: bool,
}

/// One pass along `pylons` in list order, offset to the right of travel.
fn pass_points(pylons: &[Pylon], config: &FlightPlanConfig, pass: Pass) -> Vec<RawPoint> {
    let d = config.look_ahead_distance();
    let mut out = Vec::new();
    for (i, seg) in pylons.windows(2).enumerate() {
        let (a, b) = (&seg[0], &seg[1]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len = ex.hypot(ey);
        let (dx, dy) = (ex / len, ey / len);
        let (rx, ry) = (dy, -dx);
        let heading = dy.atan2(dx);
        let n = (len / config.spacing).ceil().max(1.0) as usize;
        let mut ts: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let t_look = (len - d) / len;
        if d > 0.0 && d < len && ts.iter().all(|t| (t - t_look).abs() * len > MERGE_TOL) {
            ts.push(t_look);
            ts.sort_by(f64::total_cmp);
        }
        for (j, &t) in ts.iter().enumerate() {
            if i > 0 && j == 0 {
                continue;
            }
            let position = [
                a.x + t * ex + config.lateral_offset * rx,
                a.y + t * ey + config.lateral_offset * ry,
                a.z_top + t * (b.z_top - a.z_top) + config.height_above_line,
            ];
            out.push(RawPoint {
                position,
                heading,
                pass,
                at_pylon: t == 0.0 || t == 1.0,
            });
        }
    }
    out
}

/// Semicircle around `end` from the right of travel to the left.
fn turn_points(prev: &Pylon, end: &Pylon, config: &FlightPlanConfig) -> Vec<RawPoint> {
    let (ex, ey) = (end.x - prev.x, end.y - prev.y);
    let len = ex.hypot(ey);
    let (dx, dy) = (ex / len, ey / len);
    let (rx, ry) = (dy, -dx);
    let r = config.lateral_offset.max(MIN_TURN_RADIUS);
    let z = end.z_top + config.height_above_line;
    (1..=TURN_POINTS)
        .map(|k| {
            let th = k as f64 * PI / (TURN_POINTS + 1) as f64;
            let (s, c) = th.sin_cos();
            let tx = -s * rx + c * dx;
            let ty = -s * ry + c * dy;
            RawPoint {
                position: [end.x + r * (c * rx + s * dx), end.y + r * (c * ry + s * dy), z],
                heading: ty.atan2(tx),
                pass: Pass::Turn,
                at_pylon: false,
            }
        })
        .collect()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Builds the two-pass corridor plan with speeds from [`speed_profile`].
pub fn plan_trajectory(pylons: &[Pylon], config: &FlightPlanConfig) -> Result<FlightPlan> {
    config.validate()?;
    validate_pylons(pylons)?;
    let reversed: Vec<Pylon> = pylons.iter().rev().cloned().collect();
    let n = pylons.len();

    let mut raw = pass_points(pylons, config, Pass::Forward);
    raw.extend(turn_points(&pylons[n - 2], &pylons[n - 1], config));
    raw.extend(pass_points(&reversed, config, Pass::Backward));

    let mut waypoints: Vec<Waypoint> = Vec::with_capacity(raw.len());
    let mut pylon_stations = Vec::new();
    for p in raw {
        let station = match waypoints.last() {
            None => 0.0,
            Some(last) => {
                let step = dist(last.position, p.position);
                if step <= MERGE_TOL {
                    if p.at_pylon && pylon_stations.last() != Some(&last.station) {
                        pylon_stations.push(last.station);
                    }
                    continue;
                }
                last.station + step
            }
        };
        if p.at_pylon {
            pylon_stations.push(station);
        }
        waypoints.push(Waypoint {
            position: p.position,
            speed: config.v_max,
            heading: p.heading,
            pass: p.pass,
            station,
        });
    }
    let mut plan = FlightPlan {
        waypoints,
        pylon_stations,
    };
    let speeds = speed_profile(&plan, config);
    for (w, s) in plan.waypoints.iter_mut().zip(speeds) {
        w.speed = s;
    }
    Ok(plan)
}

/// Target speeds for the plan's waypoints.
///
/// Waypoints inside a look-ahead window or on the U-turn target `v_min`;
/// the rest target `v_max`. Two sweeps then cap acceleration and
/// deceleration at `max_speed_gradient` per metre, so every window is
/// entered at `v_min` and speeds stay in `[v_min, v_max]`.
pub fn speed_profile(plan: &FlightPlan, config: &FlightPlanConfig) -> Vec<f64> {
    let d = config.look_ahead_distance();
    let wps = &plan.waypoints;
    let mut v: Vec<f64> = wps
        .iter()
        .map(|w| {
            let slow = w.pass == Pass::Turn
                || plan
                    .pylon_stations
                    .iter()
                    .any(|&s| w.station >= s - d - MERGE_TOL && w.station <= s + MERGE_TOL);
            if slow {
                config.v_min
            } else {
                config.v_max
            }
        })
        .collect();
    let g = config.max_speed_gradient;
    for i in 1..v.len() {
        let ds = wps[i].station - wps[i - 1].station;
        v[i] = v[i].min(v[i - 1] + g * ds);
    }
    for i in (0..v.len().saturating_sub(1)).rev() {
        let ds = wps[i + 1].station - wps[i].station;
        v[i] = v[i].min(v[i + 1] + g * ds);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(lateral: f64) -> (Vec<Pylon>, FlightPlanConfig) {
        let pylons = vec![Pylon::new("a", 0.0, 0.0, 30.0), Pylon::new("b", 100.0, 0.0, 30.0)];
        let cfg = FlightPlanConfig {
            lateral_offset: lateral,
            ..Default::default()
        };
        (pylons, cfg)
    }

    #[test]
    fn flat_line_no_offset() {
        let (p, cfg) = flat(0.0);
        let plan = plan_trajectory(&p, &cfg).unwrap();
        let fwd: Vec<_> = plan.pass(Pass::Forward).collect();
        assert_eq!(fwd.first().unwrap().position, [0.0, 0.0, 55.0]);
        assert_eq!(fwd.last().unwrap().position, [100.0, 0.0, 55.0]);
        assert!(plan.waypoints.iter().all(|w| w.position[2] == 55.0));
        let bwd: Vec<_> = plan.pass(Pass::Backward).collect();
        assert_eq!(bwd.first().unwrap().position, [100.0, 0.0, 55.0]);
        assert_eq!(bwd.last().unwrap().position, [0.0, 0.0, 55.0]);
        assert!(fwd.iter().all(|w| w.heading == 0.0));
        assert!(bwd.iter().all(|w| (w.heading.abs() - PI).abs() < 1e-12));
        assert_eq!(plan.pass(Pass::Turn).count(), 5);
    }

    #[test]
    fn flat_line_offset_sides() {
        let (p, cfg) = flat(5.0);
        let plan = plan_trajectory(&p, &cfg).unwrap();
        assert!(plan.pass(Pass::Forward).all(|w| w.position[1] == -5.0));
        assert!(plan.pass(Pass::Backward).all(|w| w.position[1] == 5.0));
        for w in plan.pass(Pass::Turn) {
            let r = (w.position[0] - 100.0).hypot(w.position[1]);
            assert!((r - 5.0).abs() < 1e-12 && w.position[0] > 100.0);
        }
    }

    #[test]
    fn sloped_line_interpolates() {
        let pylons = vec![Pylon::new("a", 0.0, 0.0, 30.0), Pylon::new("b", 100.0, 0.0, 50.0)];
        let cfg = FlightPlanConfig { lateral_offset: 0.0, ..Default::default() };
        let plan = plan_trajectory(&pylons, &cfg).unwrap();
        for w in plan.pass(Pass::Forward) {
            let expect = 30.0 + 20.0 * w.position[0] / 100.0 + 25.0;
            assert!((w.position[2] - expect).abs() < 1e-12);
        }
        let mid = plan.pass(Pass::Forward).find(|w| w.position[0] == 50.0).unwrap();
        assert_eq!(mid.position[2], 65.0);
    }

    #[test]
    fn look_ahead_window() {
        let cfg = FlightPlanConfig::default();
        let d = cfg.look_ahead_distance();
        assert!((d - 20.977).abs() < 1e-3, "{d}");
        let (p, _) = flat(5.0);
        let plan = plan_trajectory(&p, &cfg).unwrap();
        let w = plan
            .pass(Pass::Forward)
            .find(|w| (w.position[0] - (100.0 - d)).abs() < 1e-9)
            .expect("look-ahead waypoint");
        assert_eq!(w.speed, 2.0);
        let cruise = plan.pass(Pass::Forward).find(|w| w.position[0] == 50.0).unwrap();
        assert_eq!(cruise.speed, 10.0);
    }

    #[test]
    fn nadir_limit_starts_at_pylon() {
        let cfg = FlightPlanConfig {
            depression_angle: PI / 2.0 - 1e-12,
            ..Default::default()
        };
        assert!(cfg.look_ahead_distance() < 1e-9);
        let (p, _) = flat(0.0);
        let plan = plan_trajectory(&p, &cfg).unwrap();
        let before = plan.pass(Pass::Forward).find(|w| w.position[0] == 90.0).unwrap();
        assert!(before.speed > cfg.v_min);
        let at = plan.pass(Pass::Forward).find(|w| w.position[0] == 100.0).unwrap();
        assert_eq!(at.speed, cfg.v_min);
    }

    #[test]
    fn long_open_segment_cruises() {
        let pylons = vec![Pylon::new("a", 0.0, 0.0, 30.0), Pylon::new("b", 1000.0, 0.0, 30.0)];
        let plan = plan_trajectory(&pylons, &FlightPlanConfig::default()).unwrap();
        let open: Vec<_> = plan
            .pass(Pass::Forward)
            .filter(|w| w.position[0] >= 100.0 && w.position[0] <= 900.0)
            .collect();
        assert!(!open.is_empty());
        assert!(open.iter().all(|w| w.speed == 10.0));
    }

    #[test]
    fn speeds_bounded_and_ramped() {
        let pylons = vec![
            Pylon::new("a", 0.0, 0.0, 30.0),
            Pylon::new("b", 80.0, 30.0, 42.0),
            Pylon::new("c", 150.0, -10.0, 35.0),
        ];
        let cfg = FlightPlanConfig::default();
        let plan = plan_trajectory(&pylons, &cfg).unwrap();
        for pair in plan.waypoints.windows(2) {
            let ds = pair[1].station - pair[0].station;
            assert!(ds > 0.0);
            assert!((pair[1].speed - pair[0].speed).abs() <= cfg.max_speed_gradient * ds + 1e-12);
        }
        assert!(plan.waypoints.iter().all(|w| w.speed >= 2.0 && w.speed <= 10.0));
    }

    #[test]
    fn errors() {
        let cfg = FlightPlanConfig::default();
        assert!(plan_trajectory(&[Pylon::new("a", 0.0, 0.0, 1.0)], &cfg).is_err());
        let same = [Pylon::new("a", 0.0, 0.0, 1.0), Pylon::new("b", 0.0, 0.0, 9.0)];
        assert!(plan_trajectory(&same, &cfg).is_err());
        let (p, _) = flat(0.0);
        for bad in [
            FlightPlanConfig { depression_angle: PI / 2.0, ..Default::default() },
            FlightPlanConfig { v_min: 11.0, ..Default::default() },
            FlightPlanConfig { height_above_line: 0.0, ..Default::default() },
            FlightPlanConfig { lateral_offset: -1.0, ..Default::default() },
        ] {
            assert!(matches!(plan_trajectory(&p, &bad), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn csv_io() {
        let pylons = read_pylons_csv("id,x,y,z_top\n# comment\nP1, 0, 0, 30\nP2,100,0,30\n").unwrap();
        assert_eq!(pylons[1], Pylon::new("P2", 100.0, 0.0, 30.0));
        assert!(read_pylons_csv("id,x,y,z_top\nP1,0,zero,30\n").is_err());
        let plan = plan_trajectory(&pylons, &FlightPlanConfig::default()).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,z,speed,heading,pass\n0.000000,-5.000000,55.000000,2.000000,"));
        assert_eq!(text.lines().count(), plan.waypoints.len() + 1);
    }
}
