//! Frame camera model: Euler-angle extrinsics, polynomial radial and
//! tangential distortion, and the pixel mapping with skew terms.
//!
//! Conventions:
//!
//! * The rotation is `R = Rz(kappa) * Ry(phi) * Rx(omega)` with the sign layout
//!   used by aerial photogrammetry suites (`Rx` has `+sin(omega)` at row 1,
//!   column 2, zero based).
//! * Camera coordinates are `R * (M - S)`; the camera looks down its negative
//!   `Z` axis, so the depth of a point is `-Z_c`.
//! * The radial polynomial is evaluated in the *squared* radius
//!   `r_c = x^2 + y^2`: `1 + k1 r_c + k2 r_c^2 + ... + k5 r_c^5`.
//! * Pixel coordinates are continuous with the origin at the top-left image
//!   corner. A pixel is in frame when `0 <= u < width` and `0 <= v < height`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Interior orientation of a frame camera. All lengths are in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Focal length.
    pub f: f64,
    /// Principal point offset from the image centre.
    pub cx: f64,
    pub cy: f64,
    /// Affinity and skew.
    pub b1: f64,
    pub b2: f64,
    /// Radial coefficients `k1..k5`.
    pub radial: [f64; 5],
    /// Tangential coefficients `p1..p4`.
    pub tangential: [f64; 4],
}

impl CameraIntrinsics {
    /// Distortion-free camera with the principal point at the image centre.
    pub fn ideal(width: u32, height: u32, f: f64) -> Result<Self> {
        Self {
            width,
            height,
            f,
            cx: 0.0,
            cy: 0.0,
            b1: 0.0,
            b2: 0.0,
            radial: [0.0; 5],
            tangential: [0.0; 4],
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "sensor size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.f.is_finite() && self.f > 0.0) {
            return Err(Error::invalid(format!(
                "focal length must be finite and positive, got {}",
                self.f
            )));
        }
        let scalars = [self.cx, self.cy, self.b1, self.b2];
        if !all_finite(&scalars) || !all_finite(&self.radial) || !all_finite(&self.tangential) {
            return Err(Error::invalid("intrinsic coefficients must be finite"));
        }
        Ok(self)
    }

    pub fn has_distortion(&self) -> bool {
        self.radial.iter().chain(&self.tangential).any(|&c| c != 0.0)
    }

    /// Applies lens distortion to normalized image coordinates.
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let [k1, k2, k3, k4, k5] = self.radial;
        let [p1, p2, p3, p4] = self.tangential;
        let r = x * x + y * y;
        let radial = 1.0 + r * (k1 + r * (k2 + r * (k3 + r * (k4 + r * k5))));
        let q = 1.0 + p3 * r + p4 * r * r;
        let dtx = p1 * (r + 2.0 * x * x) + 2.0 * p2 * x * y * q;
        let dty = p2 * (r + 2.0 * y * y) + 2.0 * p1 * x * y * q;
        (x * radial + dtx, y * radial + dty)
    }

    /// Jacobian of [`distort`](Self::distort) with respect to `(x, y)`.
    fn distort_jacobian(&self, x: f64, y: f64) -> Matrix2<f64> {
        let [k1, k2, k3, k4, k5] = self.radial;
        let [p1, p2, p3, p4] = self.tangential;
        let r = x * x + y * y;
        let radial = 1.0 + r * (k1 + r * (k2 + r * (k3 + r * (k4 + r * k5))));
        let d_radial = k1 + r * (2.0 * k2 + r * (3.0 * k3 + r * (4.0 * k4 + r * 5.0 * k5)));
        let q = 1.0 + p3 * r + p4 * r * r;
        let dq = p3 + 2.0 * p4 * r;

        let dxp_dx = radial
            + 2.0 * x * x * d_radial
            + 6.0 * p1 * x
            + 2.0 * p2 * (y * q + 2.0 * x * x * y * dq);
        let dxp_dy =
            2.0 * x * y * d_radial + 2.0 * p1 * y + 2.0 * p2 * (x * q + 2.0 * x * y * y * dq);
        let dyp_dx =
            2.0 * x * y * d_radial + 2.0 * p2 * x + 2.0 * p1 * (y * q + 2.0 * x * x * y * dq);
        let dyp_dy = radial
            + 2.0 * y * y * d_radial
            + 6.0 * p2 * y
            + 2.0 * p1 * (x * q + 2.0 * x * y * y * dq);
        Matrix2::new(dxp_dx, dxp_dy, dyp_dx, dyp_dy)
    }

    /// Inverts [`distort`](Self::distort) with Newton iterations.
    pub fn undistort(&self, xd: f64, yd: f64) -> Result<(f64, f64)> {
        const MAX_ITERATIONS: usize = 50;
        const TOLERANCE: f64 = 1e-14;

        if !(xd.is_finite() && yd.is_finite()) {
            return Err(Error::invalid("distorted coordinates must be finite"));
        }
        if !self.has_distortion() {
            return Ok((xd, yd));
        }
        let target = Vector2::new(xd, yd);
        let mut p = target;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_ITERATIONS {
            let (u, v) = self.distort(p.x, p.y);
            let err = target - Vector2::new(u, v);
            residual = err.amax();
            if residual <= TOLERANCE {
                return Ok((p.x, p.y));
            }
            let step = self
                .distort_jacobian(p.x, p.y)
                .lu()
                .solve(&err)
                .filter(|s| s.iter().all(|c| c.is_finite()));
            match step {
                Some(step) => p += step,
                None => break,
            }
        }
        // Roundoff can stall just above the tolerance; accept that plateau.
        if residual <= 1e-12 {
            Ok((p.x, p.y))
        } else {
            Err(Error::Convergence {
                iterations: MAX_ITERATIONS,
                residual,
            })
        }
    }

    /// Maps distorted normalized coordinates to continuous pixel coordinates.
    pub fn to_pixel(&self, xd: f64, yd: f64) -> [f64; 2] {
        let u = 0.5 * self.width as f64 + self.cx + xd * self.f + xd * self.b1 + yd * self.b2;
        let v = 0.5 * self.height as f64 + self.cy + yd * self.f;
        [u, v]
    }

    /// Inverse of [`to_pixel`](Self::to_pixel).
    pub fn from_pixel(&self, u: f64, v: f64) -> [f64; 2] {
        let yd = (v - 0.5 * self.height as f64 - self.cy) / self.f;
        let xd = (u - 0.5 * self.width as f64 - self.cx - yd * self.b2) / (self.f + self.b1);
        [xd, yd]
    }

    pub fn in_frame(&self, pixel: [f64; 2]) -> bool {
        let [u, v] = pixel;
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

/// Returns `Rz(kappa) * Ry(phi) * Rx(omega)`.
pub fn rotation_from_euler(omega: f64, phi: f64, kappa: f64) -> Result<Matrix3<f64>> {
    if !all_finite(&[omega, phi, kappa]) {
        return Err(Error::invalid("Euler angles must be finite"));
    }
    let (so, co) = omega.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sk, ck) = kappa.sin_cos();
    #[rustfmt::skip]
    let rx = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0,  co,  so,
        0.0, -so,  co,
    );
    #[rustfmt::skip]
    let ry = Matrix3::new(
         cp, 0.0, -sp,
        0.0, 1.0, 0.0,
         sp, 0.0,  cp,
    );
    #[rustfmt::skip]
    let rz = Matrix3::new(
         ck,  sk, 0.0,
        -sk,  ck, 0.0,
        0.0, 0.0, 1.0,
    );
    Ok(rz * ry * rx)
}

/// Recovers `(omega, phi, kappa)` from a rotation built by
/// [`rotation_from_euler`]. `phi` is returned in `[-pi/2, pi/2]`.
pub fn euler_from_rotation(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let phi = r[(2, 0)].clamp(-1.0, 1.0).asin();
    let omega = (-r[(2, 1)]).atan2(r[(2, 2)]);
    let kappa = (-r[(1, 0)]).atan2(r[(0, 0)]);
    (omega, phi, kappa)
}

/// Exterior orientation: projection centre and Euler angles (radians).
///
/// The rotation matrix is derived once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    position: Vector3<f64>,
    angles: [f64; 3],
    rotation: Matrix3<f64>,
}

impl CameraPose {
    pub fn new(position: [f64; 3], omega: f64, phi: f64, kappa: f64) -> Result<Self> {
        if !all_finite(&position) {
            return Err(Error::invalid("camera position must be finite"));
        }
        let rotation = rotation_from_euler(omega, phi, kappa)?;
        Ok(Self {
            position: Vector3::from(position),
            angles: [omega, phi, kappa],
            rotation,
        })
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            angles: [0.0; 3],
            rotation: Matrix3::identity(),
        }
    }

    /// Builds a pose from a world-to-camera rotation. The stored angles are
    /// extracted from `rotation`, and the cached matrix is recomputed from them.
    pub fn from_rotation(position: [f64; 3], rotation: &Matrix3<f64>) -> Result<Self> {
        let (omega, phi, kappa) = euler_from_rotation(rotation);
        Self::new(position, omega, phi, kappa)
    }

    pub fn position(&self) -> [f64; 3] {
        self.position.into()
    }

    /// `(omega, phi, kappa)` in radians.
    pub fn angles(&self) -> [f64; 3] {
        self.angles
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// `R (M - S)`.
    pub fn world_to_camera(&self, point: [f64; 3]) -> [f64; 3] {
        (self.rotation * (Vector3::from(point) - self.position)).into()
    }

    pub fn distance_to(&self, point: [f64; 3]) -> f64 {
        (Vector3::from(point) - self.position).norm()
    }
}

/// Transforms `point` into the camera frame of `pose`.
pub fn world_to_camera(pose: &CameraPose, point: [f64; 3]) -> Result<[f64; 3]> {
    if !all_finite(&point) {
        return Err(Error::invalid("world point must be finite"));
    }
    Ok(pose.world_to_camera(point))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionStatus {
    InFrame,
    OutOfFrame,
    BehindCamera,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    /// Continuous pixel coordinates `(u, v)`; NaN when behind the camera.
    pub pixel: [f64; 2],
    /// Depth along the optical axis, `-Z_c`.
    pub depth: f64,
    pub status: ProjectionStatus,
}

impl ProjectionResult {
    pub fn is_in_frame(&self) -> bool {
        self.status == ProjectionStatus::InFrame
    }

    /// `(col, row)` of the pixel cell containing the projection, when in frame.
    pub fn cell(&self) -> Option<(usize, usize)> {
        self.is_in_frame()
            .then(|| (self.pixel[0].floor() as usize, self.pixel[1].floor() as usize))
    }
}

/// Projects a camera-frame point. Points on or behind the `Z_c = 0` plane are
/// reported as [`ProjectionStatus::BehindCamera`].
pub fn project_camera_point(intrinsics: &CameraIntrinsics, pc: [f64; 3]) -> ProjectionResult {
    let [xc, yc, zc] = pc;
    let depth = -zc;
    if zc >= 0.0 {
        return ProjectionResult {
            pixel: [f64::NAN; 2],
            depth,
            status: ProjectionStatus::BehindCamera,
        };
    }
    let x = -xc / zc;
    let y = -yc / zc;
    let (xd, yd) = intrinsics.distort(x, y);
    let pixel = intrinsics.to_pixel(xd, yd);
    let status = if intrinsics.in_frame(pixel) {
        ProjectionStatus::InFrame
    } else {
        ProjectionStatus::OutOfFrame
    };
    ProjectionResult {
        pixel,
        depth,
        status,
    }
}

/// World point to pixel: camera transform, normalization, distortion and
/// pixel mapping.
pub fn project(
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    point: [f64; 3],
) -> Result<ProjectionResult> {
    let pc = world_to_camera(pose, point)?;
    Ok(project_camera_point(intrinsics, pc))
}

/// A named, fully oriented image.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: String,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl Camera {
    pub fn new(id: impl Into<String>, intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Self {
            id: id.into(),
            intrinsics,
            pose,
        }
    }

    /// Projection without the finiteness check on `point`; non-finite input
    /// yields a non-finite pixel reported as out of frame.
    #[inline]
    pub fn project(&self, point: [f64; 3]) -> ProjectionResult {
        project_camera_point(&self.intrinsics, self.pose.world_to_camera(point))
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }
}
