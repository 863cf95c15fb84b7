//! Min-depth rasterization of point clouds and depth-consistency visibility.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, ProjectionResult};
use crate::npy;

/// Rows per rasterization tile. Each tile is reduced by exactly one worker.
const TILE_ROWS: usize = 32;

pub const DEFAULT_BUFFER_RADIUS: u32 = 2;
pub const DEFAULT_TAU_Z: f64 = 0.15;

/// Per-camera grid of minimal depths. Empty cells hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    buffer_radius: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize, buffer_radius: u32) -> Self {
        Self {
            width,
            height,
            buffer_radius,
            data: vec![f64::INFINITY; width * height],
        }
    }

    /// Wraps a row-major grid. Finite entries must be positive; NaN is rejected.
    pub fn from_grid(
        width: usize,
        height: usize,
        buffer_radius: u32,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "depth grid has {} cells, expected {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|d| d.is_nan() || **d <= 0.0) {
            return Err(Error::data(format!("depth map holds invalid depth {bad}")));
        }
        Ok(Self {
            width,
            height,
            buffer_radius,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn buffer_radius(&self) -> u32 {
        self.buffer_radius
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        (col < self.width && row < self.height).then(|| self.data[row * self.width + col])
    }

    /// True iff the rendered depth at `(col, row)` is within `tau_z` of `z`.
    /// Empty cells never match.
    pub fn is_visible(&self, col: i64, row: i64, z: f64, tau_z: f64) -> Result<bool> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return Err(Error::invalid(format!(
                "pixel ({col}, {row}) outside {}x{} depth map",
                self.width, self.height
            )));
        }
        Ok(self.visible_at(col as usize, row as usize, z, tau_z))
    }

    #[inline]
    pub(crate) fn visible_at(&self, col: usize, row: usize, z: f64, tau_z: f64) -> bool {
        let d = self.data[row * self.width + col];
        // inf - z is inf, which never satisfies the bound.
        (d - z).abs() <= tau_z
    }

    /// `(H, W)` little-endian `f4` NPY encoding; `+inf` is preserved.
    pub fn to_npy(&self) -> Result<Vec<u8>> {
        let data: Vec<f32> = self.data.iter().map(|&d| d as f32).collect();
        let mut out = Vec::new();
        npy::write_f32(&mut out, &[self.height, self.width], &data)?;
        Ok(out)
    }

    pub fn from_npy(array: &npy::NpyArray, buffer_radius: u32) -> Result<Self> {
        array.expect_ndim(2)?;
        if !matches!(array.dtype, npy::Dtype::F32 | npy::Dtype::F64) {
            return Err(Error::data(format!(
                "depth maps must be float arrays, found {}",
                array.dtype.descr()
            )));
        }
        Self::from_grid(array.shape[1], array.shape[0], buffer_radius, array.to_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityConfig {
    /// Depth tolerance in metres.
    pub tau_z: f64,
    /// Half-width of the square splat used when rendering depth maps.
    pub buffer_radius: u32,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            tau_z: DEFAULT_TAU_Z,
            buffer_radius: DEFAULT_BUFFER_RADIUS,
        }
    }
}

impl VisibilityConfig {
    pub fn new(tau_z: f64, buffer_radius: u32) -> Result<Self> {
        if !(tau_z.is_finite() && tau_z > 0.0) {
            return Err(Error::invalid(format!("tau_z must be positive, got {tau_z}")));
        }
        Ok(Self {
            tau_z,
            buffer_radius,
        })
    }
}

#[derive(Clone, Copy)]
struct Splat {
    col: u32,
    row: u32,
    depth: f64,
}

fn project_splats(camera: &Camera, points: &[[f64; 3]]) -> Vec<Splat> {
    let to_splat = |p: &[f64; 3]| {
        let r = camera.project(*p);
        r.cell().map(|(col, row)| Splat {
            col: col as u32,
            row: row as u32,
            depth: r.depth,
        })
    };
    #[cfg(feature = "parallel")]
    {
        points.par_iter().filter_map(to_splat).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().filter_map(to_splat).collect()
    }
}

fn rasterize_tile(
    tile: &mut [f64],
    first_row: usize,
    width: usize,
    radius: usize,
    splats: &[Splat],
    members: &[u32],
) {
    let rows = tile.len() / width;
    for &idx in members {
        let s = splats[idx as usize];
        let (col, row) = (s.col as usize, s.row as usize);
        let r0 = row.saturating_sub(radius).max(first_row);
        let r1 = (row + radius).min(first_row + rows - 1);
        let c0 = col.saturating_sub(radius);
        let c1 = (col + radius).min(width - 1);
        for r in r0..=r1 {
            let line = &mut tile[(r - first_row) * width..(r - first_row + 1) * width];
            for cell in &mut line[c0..=c1] {
                if s.depth < *cell {
                    *cell = s.depth;
                }
            }
        }
    }
}

/// Renders the min-depth map of `points` seen from `camera`.
///
/// Every in-frame point writes its depth into the `(2r+1)^2` neighbourhood of
/// the cell containing its projection (floor of the continuous pixel),
/// clipped to the image. The grid is split into row tiles, each reduced by a
/// single worker, so the result does not depend on scheduling.
pub fn render_depth_map(camera: &Camera, points: &[[f64; 3]], buffer_radius: u32) -> DepthMap {
    let (width, height) = (camera.width(), camera.height());
    let radius = buffer_radius as usize;
    let mut map = DepthMap::empty(width, height, buffer_radius);
    let splats = project_splats(camera, points);
    if splats.is_empty() {
        return map;
    }

    let n_tiles = height.div_ceil(TILE_ROWS);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n_tiles];
    for (i, s) in splats.iter().enumerate() {
        let row = s.row as usize;
        let t0 = row.saturating_sub(radius) / TILE_ROWS;
        let t1 = (row + radius).min(height - 1) / TILE_ROWS;
        for bucket in &mut buckets[t0..=t1] {
            bucket.push(i as u32);
        }
    }

    let tile_len = TILE_ROWS * width;
    #[cfg(feature = "parallel")]
    let tiles = map.data.par_chunks_mut(tile_len);
    #[cfg(not(feature = "parallel"))]
    let tiles = map.data.chunks_mut(tile_len);
    tiles.enumerate().for_each(|(t, tile)| {
        rasterize_tile(tile, t * TILE_ROWS, width, radius, &splats, &buckets[t]);
    });
    map
}

/// Projection plus depth-consistency test of one point in one view. Returns
/// the projection when the view passes both checks.
#[inline]
pub(crate) fn visible_projection(
    camera: &Camera,
    depth: &DepthMap,
    point: [f64; 3],
    tau_z: f64,
) -> Option<ProjectionResult> {
    let r = camera.project(point);
    let (col, row) = r.cell()?;
    depth.visible_at(col, row, r.depth, tau_z).then_some(r)
}

pub(crate) fn check_alignment(cameras: &[Camera], depthmaps: &[DepthMap]) -> Result<()> {
    if cameras.len() != depthmaps.len() {
        return Err(Error::invalid(format!(
            "{} cameras but {} depth maps",
            cameras.len(),
            depthmaps.len()
        )));
    }
    for (c, d) in cameras.iter().zip(depthmaps) {
        if c.width() != d.width() || c.height() != d.height() {
            return Err(Error::invalid(format!(
                "depth map {}x{} does not match camera '{}' ({}x{})",
                d.width(),
                d.height(),
                c.id,
                c.width(),
                c.height()
            )));
        }
    }
    Ok(())
}

/// Indices of the views in which `point` projects in frame and agrees with
/// the rendered depth to within `tau_z`.
pub fn visible_views(
    point: [f64; 3],
    cameras: &[Camera],
    depthmaps: &[DepthMap],
    config: &VisibilityConfig,
) -> Result<Vec<usize>> {
    check_alignment(cameras, depthmaps)?;
    Ok(cameras
        .iter()
        .zip(depthmaps)
        .enumerate()
        .filter_map(|(i, (c, d))| visible_projection(c, d, point, config.tau_z).map(|_| i))
        .collect())
}
