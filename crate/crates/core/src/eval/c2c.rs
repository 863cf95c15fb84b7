//! Exact nearest-neighbour distances between point clouds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Static 3-d tree over a point set, stored as a permuted array where each
/// subrange's middle element is the splitting node.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut points = points.to_vec();
        Self::arrange(&mut points, 0);
        Self { points }
    }

    fn arrange(pts: &mut [[f64; 3]], depth: usize) {
        if pts.len() <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        let (left, right) = pts.split_at_mut(mid);
        Self::arrange(left, depth + 1);
        Self::arrange(&mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closest stored point and its squared distance.
    pub fn nearest(&self, q: [f64; 3]) -> Option<([f64; 3], f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.points.len(), 0, q, &mut best);
        (best.0 != usize::MAX).then(|| (self.points[best.0], best.1))
    }

    fn search(&self, lo: usize, hi: usize, depth: usize, q: [f64; 3], best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d2 = dist2(p, q);
        if d2 < best.1 {
            *best = (mid, d2);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, depth + 1, q, best);
        if diff * diff <= best.1 {
            self.search(far.0, far.1, depth + 1, q, best);
        }
    }
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceSummary {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

impl DistanceSummary {
    pub fn from_distances(d: &[f64]) -> Option<Self> {
        if d.is_empty() {
            return None;
        }
        let mut s = d.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            count: s.len(),
            min: s[0],
            mean: s.iter().sum::<f64>() / s.len() as f64,
            p50: quantile(&s, 0.5),
            p90: quantile(&s, 0.9),
            p95: quantile(&s, 0.95),
            p99: quantile(&s, 0.99),
            max: s[s.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudDistances {
    /// One distance per point of the query cloud, in its order.
    pub distances: Vec<f64>,
    /// `None` when the query cloud is empty.
    pub summary: Option<DistanceSummary>,
}

/// Distance from every point of `a` to its nearest neighbour in `b`.
pub fn cloud_to_cloud(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<CloudDistances> {
    if b.is_empty() {
        return Err(Error::invalid("reference cloud is empty"));
    }
    if a.iter().chain(b).any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid("clouds must have finite coordinates"));
    }
    let tree = KdTree::build(b);
    let query = |p: &[f64; 3]| tree.nearest(*p).map_or(f64::NAN, |(_, d2)| d2.sqrt());
    #[cfg(feature = "parallel")]
    let distances: Vec<f64> = a.par_iter().map(query).collect();
    #[cfg(not(feature = "parallel"))]
    let distances: Vec<f64> = a.iter().map(query).collect();
    let summary = DistanceSummary::from_distances(&distances);
    Ok(CloudDistances { distances, summary })
}
