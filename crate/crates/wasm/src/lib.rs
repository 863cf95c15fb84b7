//! Browser bindings for the demo page in `www/`.
//!
//! Three operations are exposed, each returning flat numeric arrays that the
//! page draws on a canvas:
//!
//! * [`distortion_grid`]: where a regular grid of image-plane lines lands
//!   after lens distortion;
//! * [`visibility_scene`]: a depth map of a small synthetic scene and which
//!   points pass the depth test;
//! * [`flight_plan`]: a corridor plan over pylons typed into the page.

use gridfuse::depth::{render_depth_map, VisibilityConfig};
use gridfuse::flight::{plan_trajectory, read_pylons_csv, FlightPlanConfig, Pass};
use gridfuse::geometry::{Camera, CameraIntrinsics, CameraPose};
use wasm_bindgen::prelude::*;

/// Samples along each grid line.
const SAMPLES: usize = 48;

/// Pixel coordinates of `2 * lines` distorted grid lines, `SAMPLES` points
/// each, flattened as `u, v` pairs. Vertical lines come first.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn distortion_grid(
    width: u32,
    height: u32,
    f: f64,
    k1: f64,
    k2: f64,
    k3: f64,
    p1: f64,
    p2: f64,
    lines: usize,
) -> Result<Vec<f64>, JsError> {
    grid(width, height, f, [k1, k2, k3], [p1, p2], lines).map_err(|e| JsError::new(&e))
}

fn grid(width: u32, height: u32, f: f64, radial: [f64; 3], tangential: [f64; 2], lines: usize) -> Result<Vec<f64>, String> {
    if lines < 2 {
        return Err("need at least two grid lines".into());
    }
    let mut k = CameraIntrinsics::ideal(width, height, f).map_err(|e| e.to_string())?;
    k.radial[..3].copy_from_slice(&radial);
    k.tangential[..2].copy_from_slice(&tangential);
    let k = k.validated().map_err(|e| e.to_string())?;

    // Normalized extent of the undistorted frame.
    let hx = width as f64 / 2.0 / f;
    let hy = height as f64 / 2.0 / f;
    let at = |i: usize, n: usize, h: f64| -h + 2.0 * h * i as f64 / (n - 1) as f64;

    let mut out = Vec::with_capacity(2 * lines * SAMPLES * 2);
    for vertical in [true, false] {
        for l in 0..lines {
            for s in 0..SAMPLES {
                let (x, y) = if vertical {
                    (at(l, lines, hx), at(s, SAMPLES, hy))
                } else {
                    (at(s, SAMPLES, hx), at(l, lines, hy))
                };
                let (xd, yd) = k.distort(x, y);
                out.extend_from_slice(&k.to_pixel(xd, yd));
            }
        }
    }
    Ok(out)
}

/// Depth map and per-point visibility for a block standing on flat ground,
/// seen by one camera tilted `tilt_deg` away from nadir.
#[wasm_bindgen]
pub struct VisibilityScene {
    width: u32,
    height: u32,
    depth: Vec<f32>,
    points: Vec<f64>,
    visible: usize,
}

#[wasm_bindgen]
impl VisibilityScene {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major depth in metres; empty cells are `+inf`.
    pub fn depth(&self) -> Vec<f32> {
        self.depth.clone()
    }

    /// `u, v, visible` triples for every in-frame point (`visible` is 0 or 1).
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn visible_count(&self) -> usize {
        self.visible
    }

    pub fn point_count(&self) -> usize {
        self.points.len() / 3
    }
}

#[wasm_bindgen]
pub fn visibility_scene(tilt_deg: f64, tau: f64, buffer: u32) -> Result<VisibilityScene, JsError> {
    scene(tilt_deg, tau, buffer).map_err(|e| JsError::new(&e))
}

fn scene_points() -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    // Ground, 0.5 m spacing over 40 x 30 m.
    for i in 0..=80 {
        for j in 0..=60 {
            let (x, y) = (-20.0 + 0.5 * i as f64, -15.0 + 0.5 * j as f64);
            if !(x.abs() < 4.0 && y.abs() < 4.0) {
                pts.push([x, y, 0.0]);
            }
        }
    }
    // An 8 x 8 x 10 m block: roof and four walls.
    let steps = |a: f64, b: f64, n: usize| (0..=n).map(move |i| a + (b - a) * i as f64 / n as f64);
    for x in steps(-4.0, 4.0, 16) {
        for y in steps(-4.0, 4.0, 16) {
            pts.push([x, y, 10.0]);
        }
        for z in steps(0.0, 10.0, 20) {
            pts.push([x, -4.0, z]);
            pts.push([x, 4.0, z]);
            pts.push([-4.0, x, z]);
            pts.push([4.0, x, z]);
        }
    }
    pts
}

fn scene(tilt_deg: f64, tau: f64, buffer: u32) -> Result<VisibilityScene, String> {
    if !(-60.0..=60.0).contains(&tilt_deg) {
        return Err("tilt must lie within 60 degrees of nadir".into());
    }
    let config = VisibilityConfig::new(tau, buffer).map_err(|e| e.to_string())?;
    let (width, height) = (240u32, 180u32);
    let k = CameraIntrinsics::ideal(width, height, 220.0).map_err(|e| e.to_string())?;
    // Keep the block near the image centre as the camera swings about y.
    let range = 60.0;
    let tilt = tilt_deg.to_radians();
    let position = [range * tilt.sin(), 0.0, range * tilt.cos()];
    let pose = CameraPose::new(position, 0.0, tilt, 0.0).map_err(|e| e.to_string())?;
    let camera = Camera::new("demo", k, pose);

    let pts = scene_points();
    let map = render_depth_map(&camera, &pts, config.buffer_radius);
    let mut points = Vec::new();
    let mut visible = 0;
    for &p in &pts {
        let r = camera.project(p);
        if let Some((col, row)) = r.cell() {
            let v = map
                .is_visible(col as i64, row as i64, r.depth, config.tau_z)
                .map_err(|e| e.to_string())?;
            visible += v as usize;
            points.extend_from_slice(&[r.pixel[0], r.pixel[1], v as u8 as f64]);
        }
    }
    Ok(VisibilityScene {
        width,
        height,
        depth: map.as_slice().iter().map(|&d| d as f32).collect(),
        points,
        visible,
    })
}

/// A planned corridor flight.
#[wasm_bindgen]
pub struct Plan {
    waypoints: Vec<f64>,
    pylons: Vec<f64>,
    length: f64,
}

#[wasm_bindgen]
impl Plan {
    /// `x, y, z, speed, pass` per waypoint; pass is 0 forward, 1 turn, 2 backward.
    pub fn waypoints(&self) -> Vec<f64> {
        self.waypoints.clone()
    }

    /// `x, y, z_top` per pylon.
    pub fn pylons(&self) -> Vec<f64> {
        self.pylons.clone()
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn flight_plan(
    pylons_csv: &str,
    height: f64,
    angle_deg: f64,
    offset: f64,
    v_min: f64,
    v_max: f64,
    spacing: f64,
    max_gradient: f64,
) -> Result<Plan, JsError> {
    let config = FlightPlanConfig {
        height_above_line: height,
        depression_angle: angle_deg.to_radians(),
        lateral_offset: offset,
        v_min,
        v_max,
        spacing,
        max_speed_gradient: max_gradient,
    };
    plan(pylons_csv, &config).map_err(|e| JsError::new(&e))
}

fn plan(pylons_csv: &str, config: &FlightPlanConfig) -> Result<Plan, String> {
    let pylons = read_pylons_csv(pylons_csv).map_err(|e| e.to_string())?;
    let p = plan_trajectory(&pylons, config).map_err(|e| e.to_string())?;
    let waypoints = p
        .waypoints
        .iter()
        .flat_map(|w| {
            let pass = match w.pass {
                Pass::Forward => 0.0,
                Pass::Turn => 1.0,
                Pass::Backward => 2.0,
            };
            [w.position[0], w.position[1], w.position[2], w.speed, pass]
        })
        .collect();
    Ok(Plan {
        waypoints,
        pylons: pylons.iter().flat_map(|p| [p.x, p.y, p.z_top]).collect(),
        length: p.length(),
    })
}
