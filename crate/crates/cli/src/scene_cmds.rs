use std::collections::BTreeMap;

use gridfuse::depth::{render_depth_map, DepthMap, VisibilityConfig};
use gridfuse::geometry::{Camera, ProjectionStatus};
use gridfuse::transfer::{transfer as run_transfer, LogitImage, Sampling, TransferConfig, ViewWeighting};
use rayon::prelude::*;
use serde_json::json;

use crate::failure::{flag, Failure, Outcome};
use crate::manifest::{self, Manifest};
use crate::{io, DepthmapArgs, ProjectArgs, SamplingArg, Shared, TransferArgs, WeightingArg};

/// Camera index, status, pixel and depth of one projection.
type Hit = (usize, ProjectionStatus, [f64; 2], f64);

pub fn project(args: &ProjectArgs, _shared: &Shared) -> Outcome {
    let cameras = io::read_cameras(&args.cameras)?;
    let cloud = io::read_cloud(&args.cloud)?;

    let rows: Vec<Vec<Hit>> = cloud
        .positions
        .par_iter()
        .map(|&p| {
            cameras
                .iter()
                .enumerate()
                .map(|(c, cam)| {
                    let r = cam.project(p);
                    (c, r.status, r.pixel, r.depth)
                })
                .filter(|(_, status, _, _)| args.all || *status == ProjectionStatus::InFrame)
                .collect()
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: &[&str] = if args.all {
        &["point", "camera", "u", "v", "depth", "status"]
    } else {
        &["point", "camera", "u", "v", "depth"]
    };
    let csv_err = |e: csv::Error| Failure::Internal(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    let mut in_frame = 0usize;
    for (i, hits) in rows.iter().enumerate() {
        for &(c, status, px, depth) in hits {
            in_frame += (status == ProjectionStatus::InFrame) as usize;
            let mut rec = vec![i.to_string(), cameras[c].id.clone(), px[0].to_string(), px[1].to_string(), depth.to_string()];
            if args.all {
                rec.push(format!("{status:?}"));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    io::write(&args.out, &bytes)?;
    println!(
        "{} points, {} cameras, {in_frame} in-frame projections",
        cloud.len(),
        cameras.len()
    );

    let mut m = Manifest::new("project", json!(args));
    m.input(&args.cameras)?;
    m.input(&args.cloud)?;
    m.output(&args.out)?;
    m.results = json!({ "points": cloud.len(), "cameras": cameras.len(), "in_frame": in_frame });
    m.write(&manifest::path_for(&args.out))
}

fn render_all(cameras: &[Camera], points: &[[f64; 3]], buffer: u32) -> Vec<DepthMap> {
    cameras.iter().map(|c| render_depth_map(c, points, buffer)).collect()
}

pub fn depthmap(args: &DepthmapArgs, shared: &Shared) -> Outcome {
    let buffer = shared.buffer(args.buffer);
    flag(VisibilityConfig::new(shared.tau(None), buffer))?;
    let cameras = io::read_cameras(&args.cameras)?;
    for c in &cameras {
        io::file_stem_for(&c.id).map_err(|e| e.at(&args.cameras))?;
    }
    let cloud = io::read_cloud(&args.cloud)?;
    let maps = render_all(&cameras, &cloud.positions, buffer);

    io::create_dir(&args.out)?;
    let mut m = Manifest::new("depthmap", json!({ "args": args, "buffer": buffer }));
    m.input(&args.cameras)?;
    m.input(&args.cloud)?;
    let mut filled = BTreeMap::new();
    for (c, d) in cameras.iter().zip(&maps) {
        let path = args.out.join(format!("{}.npy", c.id));
        io::write(&path, &d.to_npy()?)?;
        m.output(&path)?;
        let n = d.as_slice().iter().filter(|v| v.is_finite()).count();
        filled.insert(c.id.clone(), n);
        println!("{}: {}x{}, {n} pixels with depth", c.id, d.width(), d.height());
    }
    m.results = json!({ "filled_pixels": filled });
    m.write(&manifest::path_for(&args.out))
}

fn custom_weights(args: &TransferArgs, cameras: &[Camera]) -> Outcome<Vec<f64>> {
    let path = args
        .weights
        .as_ref()
        .ok_or_else(|| Failure::usage("--weighting custom needs --weights"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(e).at(path))?;
    let table: BTreeMap<String, f64> = serde_json::from_str(&text)
        .map_err(|e| Failure::data(format!("expected a JSON object of camera id to weight: {e}")).at(path))?;
    if let Some(extra) = table.keys().find(|k| !cameras.iter().any(|c| &c.id == *k)) {
        return Err(Failure::data(format!("weight given for unknown camera '{extra}'")).at(path));
    }
    cameras
        .iter()
        .map(|c| {
            table
                .get(&c.id)
                .copied()
                .ok_or_else(|| Failure::data(format!("no weight for camera '{}'", c.id)).at(path))
        })
        .collect()
}

pub fn transfer(args: &TransferArgs, shared: &Shared) -> Outcome {
    let tau = shared.tau(args.tau);
    let buffer = shared.buffer(args.buffer);
    let visibility = flag(VisibilityConfig::new(tau, buffer))?;
    let weighting_mode = shared.weighting(args.weighting)?;
    let sampling_mode = shared.sampling(args.sampling)?;
    if args.weights.is_some() && weighting_mode != WeightingArg::Custom {
        return Err(Failure::usage("--weights is only used with --weighting custom"));
    }

    let cameras = io::read_cameras(&args.cameras)?;
    let weighting = match weighting_mode {
        WeightingArg::Uniform => ViewWeighting::Uniform,
        WeightingArg::InverseDistance => ViewWeighting::InverseDistance,
        WeightingArg::Custom => ViewWeighting::Custom(custom_weights(args, &cameras)?),
    };
    let sampling = match sampling_mode {
        SamplingArg::Nearest => Sampling::Nearest,
        SamplingArg::Bilinear => Sampling::Bilinear,
    };

    let available = io::npy_files(&args.logits)?;
    let mut logits = Vec::with_capacity(cameras.len());
    let mut logit_paths = Vec::with_capacity(cameras.len());
    for c in &cameras {
        let path = available.get(&c.id).ok_or_else(|| {
            Failure::data(format!("no score image '{}.npy' for camera '{}'", c.id, c.id)).at(&args.logits)
        })?;
        let img = LogitImage::from_npy(&io::read_npy(path)?).map_err(|e| Failure::from(e).at(path))?;
        if img.width() != c.width() || img.height() != c.height() {
            return Err(Failure::data(format!(
                "score image is {}x{} but camera '{}' is {}x{}",
                img.width(),
                img.height(),
                c.id,
                c.width(),
                c.height()
            ))
            .at(path));
        }
        logits.push(img);
        logit_paths.push(path.clone());
    }
    let k = logits[0].classes();
    if let Some((i, l)) = logits.iter().enumerate().find(|(_, l)| l.classes() != k) {
        return Err(Failure::data(format!("K={} where the first image has K={k}", l.classes())).at(&logit_paths[i]));
    }

    let cloud = io::read_cloud(&args.cloud)?;
    let maps = render_all(&cameras, &cloud.positions, buffer);
    let config = TransferConfig { visibility, weighting, sampling };
    let out = run_transfer(&cloud.positions, &cameras, &maps, &logits, &config)?;

    io::create_dir(&args.out)?;
    let labels_path = args.out.join("labels.npy");
    io::write(&labels_path, &io::npy_u8(&out.labels)?)?;
    let counts_path = args.out.join("view_counts.npy");
    let counts: Vec<i32> = out.view_counts.iter().map(|&c| c as i32).collect();
    io::write(&counts_path, &io::npy_i32(&counts)?)?;
    let scores_path = args.out.join("scores.npy");
    if args.scores {
        io::write(&scores_path, &io::npy_f64(&[cloud.len(), k], &out.scores)?)?;
    }

    let labelled = out.labels.iter().filter(|&&l| l != gridfuse::IGNORE_LABEL).count();
    println!(
        "{} points, {} views, K={k}: {labelled} labelled, {} without a visible view",
        cloud.len(),
        cameras.len(),
        cloud.len() - labelled
    );

    let mut m = Manifest::new(
        "transfer",
        json!({
            "args": args,
            "tau": tau,
            "buffer": buffer,
            "weighting": weighting_mode,
            "sampling": sampling_mode,
        }),
    );
    m.input(&args.cameras)?;
    m.input(&args.cloud)?;
    for p in &logit_paths {
        m.input(p)?;
    }
    if let Some(w) = &args.weights {
        m.input(w)?;
    }
    m.output(&labels_path)?;
    m.output(&counts_path)?;
    if args.scores {
        m.output(&scores_path)?;
    }
    m.results = json!({ "points": cloud.len(), "views": cameras.len(), "classes": k, "labelled": labelled });
    m.write(&manifest::path_for(&args.out))
}
