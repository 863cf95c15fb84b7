//! Multi-view transfer of per-pixel class scores onto 3D points.
//!
//! For every point, each view whose projection is in frame and agrees with
//! the view's depth map contributes its weighted logit vector; the point label
//! is the argmax of the sum. Points without any contributing view get
//! [`IGNORE_LABEL`].

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::classes::IGNORE_LABEL;
use crate::depth::{check_alignment, visible_projection, DepthMap, VisibilityConfig};
use crate::error::{Error, Result};
use crate::geometry::{Camera, ProjectionResult};
use crate::npy;

/// Guard for inverse-distance weights, metres.
pub const MIN_WEIGHT_DISTANCE: f64 = 1e-6;

/// Per-pixel class scores of one image, stored `(H, W, K)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitImage {
    width: usize,
    height: usize,
    classes: usize,
    data: Vec<f32>,
}

impl LogitImage {
    pub fn new(width: usize, height: usize, classes: usize, data: Vec<f32>) -> Result<Self> {
        if !(2..=255).contains(&classes) {
            return Err(Error::invalid(format!(
                "logit images need 2..=255 classes, got {classes}"
            )));
        }
        if data.len() != width * height * classes {
            return Err(Error::invalid(format!(
                "logit buffer has {} values, expected {height}x{width}x{classes}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite logit at flat index {i}")));
        }
        Ok(Self {
            width,
            height,
            classes,
            data,
        })
    }

    /// Image whose pixels all carry a one-hot vector for `class(col, row)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        classes: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f32>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * classes);
        for row in 0..height {
            for col in 0..width {
                let v = f(col, row);
                if v.len() != classes {
                    return Err(Error::invalid("logit vector length differs from K"));
                }
                data.extend_from_slice(&v);
            }
        }
        Self::new(width, height, classes, data)
    }

    pub fn from_npy(array: &npy::NpyArray) -> Result<Self> {
        array.expect_ndim(3)?;
        let data = array.to_f32()?;
        Self::new(array.shape[1], array.shape[0], array.shape[2], data)
    }

    pub fn to_npy(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        npy::write_f32(&mut out, &[self.height, self.width, self.classes], &self.data)?;
        Ok(out)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let start = (row * self.width + col) * self.classes;
        &self.data[start..start + self.classes]
    }

    /// Adds `weight * logits` sampled at `pixel` into `acc`.
    fn accumulate(&self, pixel: [f64; 2], weight: f64, sampling: Sampling, acc: &mut [f64]) {
        match sampling {
            Sampling::Nearest => {
                let (col, row) = (pixel[0].floor() as usize, pixel[1].floor() as usize);
                for (a, &l) in acc.iter_mut().zip(self.pixel(col, row)) {
                    *a += weight * l as f64;
                }
            }
            Sampling::Bilinear => {
                // Interpolate between cell centres, clamping at the border.
                let clamp = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64);
                let u = clamp(pixel[0] - 0.5, self.width);
                let v = clamp(pixel[1] - 0.5, self.height);
                let (c0, r0) = (u.floor() as usize, v.floor() as usize);
                let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
                let (fu, fv) = (u - c0 as f64, v - r0 as f64);
                let taps = [
                    (c0, r0, (1.0 - fu) * (1.0 - fv)),
                    (c1, r0, fu * (1.0 - fv)),
                    (c0, r1, (1.0 - fu) * fv),
                    (c1, r1, fu * fv),
                ];
                for (c, r, t) in taps {
                    for (a, &l) in acc.iter_mut().zip(self.pixel(c, r)) {
                        *a += weight * t * l as f64;
                    }
                }
            }
        }
    }
}

/// How a point's pixel is sampled from a logit image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// The cell containing the projection (floor), same binning as depth maps.
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ViewWeighting {
    #[default]
    Uniform,
    /// `1 / max(d, 1e-6)` with `d` the camera-centre to point distance.
    InverseDistance,
    /// One non-negative weight per view, indexed like the camera list.
    Custom(Vec<f64>),
}

impl ViewWeighting {
    fn validate(&self, n_views: usize) -> Result<()> {
        if let ViewWeighting::Custom(w) = self {
            if w.len() != n_views {
                return Err(Error::invalid(format!(
                    "{} custom weights for {n_views} views",
                    w.len()
                )));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("custom view weights must be finite and >= 0"));
            }
            if !w.iter().any(|v| *v > 0.0) {
                return Err(Error::invalid("at least one custom view weight must be positive"));
            }
        }
        Ok(())
    }

    #[inline]
    fn weight(&self, view: usize, camera: &Camera, point: [f64; 3]) -> f64 {
        match self {
            ViewWeighting::Uniform => 1.0,
            ViewWeighting::InverseDistance => {
                1.0 / camera.pose.distance_to(point).max(MIN_WEIGHT_DISTANCE)
            }
            ViewWeighting::Custom(w) => w[view],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransferConfig {
    pub visibility: VisibilityConfig,
    pub weighting: ViewWeighting,
    pub sampling: Sampling,
}

/// Lowest index among the maxima.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn check_logits(cameras: &[Camera], logits: &[LogitImage]) -> Result<usize> {
    if cameras.len() != logits.len() {
        return Err(Error::invalid(format!(
            "{} cameras but {} logit images",
            cameras.len(),
            logits.len()
        )));
    }
    let k = logits.first().map_or(0, LogitImage::classes);
    for (c, l) in cameras.iter().zip(logits) {
        if l.width() != c.width() || l.height() != c.height() {
            return Err(Error::invalid(format!(
                "logit image {}x{} does not match camera '{}' ({}x{})",
                l.width(),
                l.height(),
                c.id,
                c.width(),
                c.height()
            )));
        }
        if l.classes() != k {
            return Err(Error::invalid(format!(
                "logit image for '{}' has K={} but the first image has K={k}",
                c.id,
                l.classes()
            )));
        }
    }
    Ok(k)
}

/// `sum_{c in views} w_c * logits_c(x_c)`, or `None` when `views` is empty.
///
/// Each view is projected again to find its pixel; views whose projection
/// falls outside the frame are rejected as a dimension error.
pub fn aggregate_logits(
    point: [f64; 3],
    views: &[usize],
    cameras: &[Camera],
    logits: &[LogitImage],
    weighting: &ViewWeighting,
    sampling: Sampling,
) -> Result<Option<Vec<f64>>> {
    let k = check_logits(cameras, logits)?;
    weighting.validate(cameras.len())?;
    if views.is_empty() {
        return Ok(None);
    }
    let mut acc = vec![0.0; k];
    for &v in views {
        let camera = cameras
            .get(v)
            .ok_or_else(|| Error::invalid(format!("view index {v} out of range")))?;
        let r = camera.project(point);
        if !r.is_in_frame() {
            return Err(Error::invalid(format!(
                "point does not project inside view '{}'",
                camera.id
            )));
        }
        let w = weighting.weight(v, camera, point);
        logits[v].accumulate(r.pixel, w, sampling, &mut acc);
    }
    Ok(Some(acc))
}

/// Labels and aggregated scores for every point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutput {
    pub classes: usize,
    /// Argmax label, or 255 without evidence.
    pub labels: Vec<u8>,
    /// Aggregated scores, `N x K` row-major; zero rows without evidence.
    pub scores: Vec<f64>,
    /// Number of views contributing to each point.
    pub view_counts: Vec<u32>,
}

struct Scene<'a> {
    cameras: &'a [Camera],
    depthmaps: &'a [DepthMap],
    logits: &'a [LogitImage],
    config: &'a TransferConfig,
    classes: usize,
}

impl Scene<'_> {
    fn point(&self, p: [f64; 3], acc: &mut [f64]) -> (u8, u32) {
        let tau = self.config.visibility.tau_z;
        let mut count = 0u32;
        let mut weight_sum = 0.0;
        for (i, ((cam, depth), logit)) in self
            .cameras
            .iter()
            .zip(self.depthmaps)
            .zip(self.logits)
            .enumerate()
        {
            let Some(ProjectionResult { pixel, .. }) = visible_projection(cam, depth, p, tau)
            else {
                continue;
            };
            let w = self.config.weighting.weight(i, cam, p);
            if w == 0.0 {
                continue;
            }
            logit.accumulate(pixel, w, self.config.sampling, acc);
            weight_sum += w;
            count += 1;
        }
        if weight_sum > 0.0 {
            (argmax(acc) as u8, count)
        } else {
            (IGNORE_LABEL, 0)
        }
    }
}

/// Runs the full visibility-filtered transfer over `points`.
///
/// Views whose weight is zero do not count as evidence.
pub fn transfer(
    points: &[[f64; 3]],
    cameras: &[Camera],
    depthmaps: &[DepthMap],
    logits: &[LogitImage],
    config: &TransferConfig,
) -> Result<TransferOutput> {
    check_alignment(cameras, depthmaps)?;
    let classes = check_logits(cameras, logits)?;
    config.weighting.validate(cameras.len())?;
    if cameras.is_empty() {
        return Err(Error::invalid("transfer needs at least one view"));
    }
    let scene = Scene {
        cameras,
        depthmaps,
        logits,
        config,
        classes,
    };

    let mut labels = vec![IGNORE_LABEL; points.len()];
    let mut scores = vec![0.0; points.len() * classes];
    let mut view_counts = vec![0u32; points.len()];

    type Slot<'a> = ((&'a [f64; 3], &'a mut u8), (&'a mut [f64], &'a mut u32));
    let run = |((p, label), (acc, count)): Slot<'_>| {
        let (l, c) = scene.point(*p, acc);
        *label = l;
        *count = c;
    };
    #[cfg(feature = "parallel")]
    points
        .par_iter()
        .zip(labels.par_iter_mut())
        .zip(
            scores
                .par_chunks_mut(scene.classes)
                .zip(view_counts.par_iter_mut()),
        )
        .for_each(run);
    #[cfg(not(feature = "parallel"))]
    points
        .iter()
        .zip(labels.iter_mut())
        .zip(scores.chunks_mut(scene.classes).zip(view_counts.iter_mut()))
        .for_each(run);

    Ok(TransferOutput {
        classes,
        labels,
        scores,
        view_counts,
    })
}

/// Per-point argmax labels; 255 where no view contributes.
pub fn transfer_labels(
    points: &[[f64; 3]],
    cameras: &[Camera],
    depthmaps: &[DepthMap],
    logits: &[LogitImage],
    config: &TransferConfig,
) -> Result<Vec<u8>> {
    Ok(transfer(points, cameras, depthmaps, logits, config)?.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::render_depth_map;
    use crate::geometry::{CameraIntrinsics, CameraPose};

    fn nadir_at(id: &str, x: f64, height: f64) -> Camera {
        let k = CameraIntrinsics::ideal(40, 30, 40.0).unwrap();
        Camera::new(id, k, CameraPose::new([x, 0.0, height], 0.0, 0.0, 0.0).unwrap())
    }

    fn constant(cam: &Camera, v: Vec<f32>) -> LogitImage {
        let k = v.len();
        LogitImage::from_fn(cam.width(), cam.height(), k, |_, _| v.clone()).unwrap()
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn single_view_identity() {
        let cam = nadir_at("a", 0.0, 10.0);
        let l = constant(&cam, vec![0.7, 0.3]);
        let agg = aggregate_logits(
            [0.0, 0.0, 0.0],
            &[0],
            &[cam],
            &[l],
            &ViewWeighting::Uniform,
            Sampling::Nearest,
        )
        .unwrap()
        .unwrap();
        assert!((agg[0] - 0.7).abs() < 1e-7 && (agg[1] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn inverse_distance_weights() {
        let a = nadir_at("a", 0.0, 2.0);
        let b = nadir_at("b", 0.0, 4.0);
        let la = constant(&a, vec![1.0, 0.0]);
        let lb = constant(&b, vec![0.0, 1.0]);
        let agg = aggregate_logits(
            [0.0, 0.0, 0.0],
            &[0, 1],
            &[a, b],
            &[la, lb],
            &ViewWeighting::InverseDistance,
            Sampling::Nearest,
        )
        .unwrap()
        .unwrap();
        assert_eq!(agg, vec![0.5, 0.25]);
    }

    #[test]
    fn empty_view_set_is_no_evidence() {
        let a = nadir_at("a", 0.0, 2.0);
        let la = constant(&a, vec![1.0, 0.0]);
        let r = aggregate_logits(
            [0.0; 3],
            &[],
            &[a],
            &[la],
            &ViewWeighting::Uniform,
            Sampling::Nearest,
        );
        assert_eq!(r.unwrap(), None);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let a = nadir_at("a", 0.0, 2.0);
        let small = LogitImage::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let r = aggregate_logits(
            [0.0; 3],
            &[0],
            &[a],
            &[small],
            &ViewWeighting::Uniform,
            Sampling::Nearest,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn custom_weights_validated() {
        assert!(ViewWeighting::Custom(vec![0.0, 0.0]).validate(2).is_err());
        assert!(ViewWeighting::Custom(vec![-1.0, 2.0]).validate(2).is_err());
        assert!(ViewWeighting::Custom(vec![1.0]).validate(2).is_err());
        assert!(ViewWeighting::Custom(vec![0.0, 2.0]).validate(2).is_ok());
    }

    #[test]
    fn transfer_single_view_and_behind() {
        let cam = nadir_at("a", 0.0, 10.0);
        let pts = [[0.0, 0.0, 0.0], [0.0, 0.0, 50.0]];
        let depth = render_depth_map(&cam, &pts, 0);
        let mut v = vec![0.0f32; 5];
        v[3] = 2.0;
        let logits = constant(&cam, v);
        let out = transfer(
            &pts,
            &[cam],
            &[depth],
            &[logits],
            &TransferConfig::default(),
        )
        .unwrap();
        assert_eq!(out.labels, vec![3, 255]);
        assert_eq!(out.view_counts, vec![1, 0]);
        assert_eq!(&out.scores[5..], &[0.0; 5]);
    }

    #[test]
    fn bilinear_at_cell_centre_equals_nearest() {
        let img = LogitImage::from_fn(4, 4, 2, |c, r| vec![c as f32, r as f32]).unwrap();
        let mut a = vec![0.0; 2];
        let mut b = vec![0.0; 2];
        img.accumulate([2.5, 1.5], 1.0, Sampling::Nearest, &mut a);
        img.accumulate([2.5, 1.5], 1.0, Sampling::Bilinear, &mut b);
        assert_eq!(a, b);
        let mut c = vec![0.0; 2];
        img.accumulate([2.0, 1.5], 1.0, Sampling::Bilinear, &mut c);
        assert_eq!(c, vec![1.5, 1.0]);
    }

    #[test]
    fn logit_npy_round_trip() {
        let img = LogitImage::from_fn(3, 2, 4, |c, r| vec![c as f32, r as f32, 0.5, -1.0]).unwrap();
        let back = LogitImage::from_npy(&npy::from_bytes(&img.to_npy().unwrap()).unwrap()).unwrap();
        assert_eq!(back, img);
    }
}
