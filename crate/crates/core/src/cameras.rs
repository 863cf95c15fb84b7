//! Camera list files.
//!
//! A camera file is a JSON array with one object per image:
//!
//! ```json
//! [{"id": "img_0001", "width": 4000, "height": 3000,
//!   "f": 3500.0, "cx": 0.0, "cy": 0.0, "b1": 0.0, "b2": 0.0,
//!   "k1": 0.0, "k2": 0.0, "k3": 0.0, "k4": 0.0, "k5": 0.0,
//!   "p1": 0.0, "p2": 0.0, "p3": 0.0, "p4": 0.0,
//!   "x": 0.0, "y": 0.0, "z": 100.0,
//!   "omega": 0.0, "phi": 0.0, "kappa": 0.0}]
//! ```
//!
//! Every field is required. Lengths are in pixels, positions in world units,
//! and the three angles in degrees.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraIntrinsics, CameraPose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub b1: f64,
    pub b2: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub omega: f64,
    pub phi: f64,
    pub kappa: f64,
}

impl CameraRecord {
    pub fn to_camera(&self) -> Result<Camera> {
        let intrinsics = CameraIntrinsics {
            width: self.width,
            height: self.height,
            f: self.f,
            cx: self.cx,
            cy: self.cy,
            b1: self.b1,
            b2: self.b2,
            radial: [self.k1, self.k2, self.k3, self.k4, self.k5],
            tangential: [self.p1, self.p2, self.p3, self.p4],
        }
        .validated()?;
        let pose = CameraPose::new(
            [self.x, self.y, self.z],
            self.omega.to_radians(),
            self.phi.to_radians(),
            self.kappa.to_radians(),
        )?;
        Ok(Camera::new(self.id.clone(), intrinsics, pose))
    }

    pub fn from_camera(camera: &Camera) -> Self {
        let k = &camera.intrinsics;
        let [x, y, z] = camera.pose.position();
        let [omega, phi, kappa] = camera.pose.angles();
        Self {
            id: camera.id.clone(),
            width: k.width,
            height: k.height,
            f: k.f,
            cx: k.cx,
            cy: k.cy,
            b1: k.b1,
            b2: k.b2,
            k1: k.radial[0],
            k2: k.radial[1],
            k3: k.radial[2],
            k4: k.radial[3],
            k5: k.radial[4],
            p1: k.tangential[0],
            p2: k.tangential[1],
            p3: k.tangential[2],
            p4: k.tangential[3],
            x,
            y,
            z,
            omega: omega.to_degrees(),
            phi: phi.to_degrees(),
            kappa: kappa.to_degrees(),
        }
    }
}

pub fn parse_cameras(json: &str) -> Result<Vec<Camera>> {
    let records: Vec<CameraRecord> =
        serde_json::from_str(json).map_err(|e| Error::data(format!("camera file: {e}")))?;
    let mut ids = BTreeSet::new();
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::data(format!("camera id '{}' appears twice", r.id)));
            }
            r.to_camera()
                .map_err(|e| Error::data(format!("camera {i} ('{}'): {e}", r.id)))
        })
        .collect()
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path)?;
    parse_cameras(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn cameras_to_json(cameras: &[Camera]) -> Result<String> {
    let records: Vec<CameraRecord> = cameras.iter().map(CameraRecord::from_camera).collect();
    serde_json::to_string_pretty(&records).map_err(|e| Error::data(e.to_string()))
}
