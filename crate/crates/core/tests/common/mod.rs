//! Brute-force reference implementations and scene generators shared by the
//! integration tests.

#![allow(dead_code)]

use gridfuse::fusion::FusionSample;
use gridfuse::geometry::{Camera, CameraIntrinsics, CameraPose};
use gridfuse::transfer::LogitImage;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Rz(kappa) Ry(phi) Rx(omega)` multiplied out by hand.
pub fn ref_rotation(omega: f64, phi: f64, kappa: f64) -> [[f64; 3]; 3] {
    let (so, co) = omega.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sk, ck) = kappa.sin_cos();
    [
        [ck * cp, ck * sp * so + sk * co, -ck * sp * co + sk * so],
        [-sk * cp, -sk * sp * so + ck * co, sk * sp * co + ck * so],
        [sp, -cp * so, cp * co],
    ]
}

/// Scalar projection: `Some((pixel, depth))` unless the point is behind.
pub fn ref_project(camera: &Camera, m: [f64; 3]) -> Option<([f64; 2], f64)> {
    let [o, p, k] = camera.pose.angles();
    let r = ref_rotation(o, p, k);
    let s = camera.pose.position();
    let d = [m[0] - s[0], m[1] - s[1], m[2] - s[2]];
    let pc: Vec<f64> = (0..3).map(|i| r[i][0] * d[0] + r[i][1] * d[1] + r[i][2] * d[2]).collect();
    if pc[2] >= 0.0 {
        return None;
    }
    let x = -pc[0] / pc[2];
    let y = -pc[1] / pc[2];
    let c = &camera.intrinsics;
    let rr = x * x + y * y;
    let mut dr = 1.0;
    let mut pow = 1.0;
    for kk in c.radial {
        pow *= rr;
        dr += kk * pow;
    }
    let [p1, p2, p3, p4] = c.tangential;
    let q = 1.0 + p3 * rr + p4 * rr * rr;
    let xd = x * dr + p1 * (rr + 2.0 * x * x) + 2.0 * p2 * x * y * q;
    let yd = y * dr + p2 * (rr + 2.0 * y * y) + 2.0 * p1 * x * y * q;
    let u = c.width as f64 / 2.0 + c.cx + xd * c.f + xd * c.b1 + yd * c.b2;
    let v = c.height as f64 / 2.0 + c.cy + yd * c.f;
    Some(([u, v], -pc[2]))
}

/// Cell of an in-frame projection, using the library projection.
fn cell_of(camera: &Camera, p: [f64; 3]) -> Option<(i64, i64, f64)> {
    let r = camera.project(p);
    let (u, v) = (r.pixel[0], r.pixel[1]);
    let inside = r.is_in_frame();
    inside.then(|| (u.floor() as i64, v.floor() as i64, r.depth))
}

/// Per-pixel minimum over every point whose cell lies within `radius`
/// (Chebyshev distance) of the pixel; `+inf` where none does.
pub fn brute_depth(camera: &Camera, points: &[[f64; 3]], radius: u32) -> Vec<f64> {
    let (w, h) = (camera.width(), camera.height());
    let cells: Vec<(i64, i64, f64)> = points.iter().filter_map(|p| cell_of(camera, *p)).collect();
    let r = radius as i64;
    let mut out = vec![f64::INFINITY; w * h];
    for row in 0..h as i64 {
        for col in 0..w as i64 {
            let mut best = f64::INFINITY;
            for &(c, rr, d) in &cells {
                if (c - col).abs() <= r && (rr - row).abs() <= r && d < best {
                    best = d;
                }
            }
            out[row as usize * w + col as usize] = best;
        }
    }
    out
}

/// Per-point, per-view loop: project, floor, compare with the depth map,
/// accumulate `w * logit` in view order, argmax with low-index ties.
pub fn brute_transfer(
    points: &[[f64; 3]],
    cameras: &[Camera],
    depth: &[Vec<f64>],
    logits: &[LogitImage],
    weights: &[f64],
    tau: f64,
) -> Vec<u8> {
    let k = logits[0].classes();
    points
        .iter()
        .map(|&p| {
            let mut acc = vec![0.0f64; k];
            let mut any = false;
            for (v, cam) in cameras.iter().enumerate() {
                let Some((col, row, z)) = cell_of(cam, p) else { continue };
                let d = depth[v][row as usize * cam.width() + col as usize];
                if !((d - z).abs() <= tau) || weights[v] == 0.0 {
                    continue;
                }
                any = true;
                let l = logits[v].pixel(col as usize, row as usize);
                for c in 0..k {
                    acc[c] += weights[v] * l[c] as f64;
                }
            }
            if !any {
                return 255;
            }
            let mut best = 0;
            for c in 1..k {
                if acc[c] > acc[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}

/// `counts[g][p]` by scanning all `N` pairs once per matrix cell.
pub fn brute_confusion(pred: &[u8], gt: &[u8], k: usize) -> Vec<u64> {
    let mut out = vec![0u64; k * k];
    for g in 0..k {
        for p in 0..k {
            out[g * k + p] = pred
                .iter()
                .zip(gt)
                .filter(|(&pp, &gg)| gg as usize == g && pp as usize == p)
                .count() as u64;
        }
    }
    out
}

pub fn brute_nearest(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<f64> {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| {
                    let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Camera at `position` looking down, tilted by up to `tilt` radians.
pub fn random_down_camera(
    rng: &mut ChaCha8Rng,
    id: &str,
    width: u32,
    height: u32,
    f: f64,
    position: [f64; 3],
    tilt: f64,
) -> Camera {
    let mut k = CameraIntrinsics::ideal(width, height, f).unwrap();
    k.cx = rng.gen_range(-2.0..2.0);
    k.cy = rng.gen_range(-2.0..2.0);
    k.radial[0] = rng.gen_range(-0.05..0.05);
    k.tangential[0] = rng.gen_range(-1e-3..1e-3);
    let pose = CameraPose::new(
        position,
        rng.gen_range(-tilt..tilt),
        rng.gen_range(-tilt..tilt),
        rng.gen_range(-3.1..3.1),
    )
    .unwrap();
    Camera::new(id, k.validated().unwrap(), pose)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, lo: [f64; 3], hi: [f64; 3]) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| std::array::from_fn(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>()))
        .collect()
}

pub fn random_logits(rng: &mut ChaCha8Rng, camera: &Camera, k: usize) -> LogitImage {
    LogitImage::from_fn(camera.width(), camera.height(), k, |_, _| {
        (0..k).map(|_| rng.gen_range(-3.0f32..3.0)).collect()
    })
    .unwrap()
}

/// Class `c` draws image-branch logits around `3 e_c` and point-branch
/// logits around `3 e_{(c+1) mod K}`, each with isotropic noise `sigma`.
pub fn separable_fusion_task(k: usize, per_class: usize, sigma: f64, seed: u64) -> Vec<FusionSample> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::with_capacity(k * per_class);
    for _ in 0..per_class {
        for c in 0..k {
            let img = (0..k)
                .map(|i| if i == c { 3.0 } else { 0.0 } + noise.sample(&mut r))
                .collect();
            let pt = (0..k)
                .map(|i| if i == (c + 1) % k { 3.0 } else { 0.0 } + noise.sample(&mut r))
                .collect();
            out.push(FusionSample::new(img, pt, c as u8));
        }
    }
    out
}
