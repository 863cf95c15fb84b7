use std::fs;
use std::path::{Path, PathBuf};

use gridfuse::eval::{
    cloud_to_cloud, miou, read_submission, split_statistics, validate_submission, write_submission, ConfusionMatrix,
    SplitAssignment, SplitTable, SubmissionRules, ZoneLabels,
};
use gridfuse::classes::CLASS_NAMES;
use gridfuse::{ClassMapping, IGNORE_LABEL, NUM_CLASSES};
use serde_json::json;

use crate::failure::{Failure, Outcome};
use crate::manifest::{self, Manifest};
use crate::{io, C2cArgs, EvalArgs, Shared, StatsArgs, SubmitArgs};

fn is_npy(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("npy"))
}

fn is_zip(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("zip"))
}

/// Per-zone labels from a directory of `<zone>.npy` files.
fn read_zone_dir(dir: &Path) -> Outcome<Vec<ZoneLabels>> {
    let files = io::npy_files(dir)?;
    if files.is_empty() {
        return Err(Failure::data("no .npy label files found").at(dir));
    }
    files
        .into_iter()
        .map(|(zone, path)| Ok(ZoneLabels::new(zone, io::read_labels(&path)?)))
        .collect()
}

fn read_predictions(path: &Path) -> Outcome<Vec<ZoneLabels>> {
    if path.is_dir() {
        read_zone_dir(path)
    } else if is_zip(path) {
        let bytes = fs::read(path).map_err(|e| Failure::from(e).at(path))?;
        read_submission(&bytes).map_err(|e| Failure::from(e).at(path))
    } else if is_npy(path) {
        Ok(vec![ZoneLabels::new("", io::read_labels(path)?)])
    } else {
        Err(Failure::usage("predictions must be a .zip archive, a directory or a .npy file").at(path))
    }
}

fn read_ground_truth(path: &Path) -> Outcome<Vec<ZoneLabels>> {
    if path.is_dir() {
        read_zone_dir(path)
    } else if is_npy(path) {
        Ok(vec![ZoneLabels::new("", io::read_labels(path)?)])
    } else {
        Err(Failure::usage("ground truth must be a directory or a .npy file").at(path))
    }
}

fn class_name(k: usize, c: usize) -> &'static str {
    if k == NUM_CLASSES {
        CLASS_NAMES[c]
    } else {
        ""
    }
}

pub fn eval(args: &EvalArgs, shared: &Shared) -> Outcome {
    let k = shared.classes(args.classes);
    if !(1..=255).contains(&k) {
        return Err(Failure::usage("--classes must lie in 1..=255"));
    }
    let mapping_path = shared.mapping(args.gt_mapping.as_ref());
    let mapping = if args.grouped_gt {
        Some(ClassMapping::grouped())
    } else {
        io::read_mapping(mapping_path.as_deref())?
    };

    let mut gt = read_ground_truth(&args.gt)?;
    let pred = read_predictions(&args.pred)?;
    if let Some(m) = &mapping {
        for z in &mut gt {
            z.labels = m.remap(&z.labels).map_err(|e| Failure::data(format!("zone '{}': {e}", z.zone)))?;
        }
    }

    let single = gt.len() == 1 && gt[0].zone.is_empty();
    let pred = if single != (pred.len() == 1 && pred[0].zone.is_empty()) {
        return Err(Failure::usage("--pred and --gt must both be single .npy files or both hold named zones"));
    } else {
        pred
    };
    let mut rules = SubmissionRules::new(gt.iter().map(|z| z.zone.clone()).collect());
    rules.num_classes = k;
    rules.lengths = gt.iter().map(|z| (z.zone.clone(), z.labels.len())).collect();
    validate_submission(&pred, &rules).map_err(|e| Failure::from(e).at(&args.pred))?;

    let mut cm = ConfusionMatrix::new(k, IGNORE_LABEL)?;
    for g in &gt {
        let p = pred.iter().find(|p| p.zone == g.zone).expect("validated zone set");
        let zone_cm = gridfuse::eval::confusion(&p.labels, &g.labels, k, IGNORE_LABEL)
            .map_err(|e| Failure::data(format!("zone '{}': {e}", g.zone)))?;
        cm.merge(&zone_cm)?;
    }
    let report = miou(&cm)?;

    println!("{:>5}  {:<24}  {:>8}", "class", "name", "IoU (%)");
    for (c, iou) in report.per_class.iter().enumerate() {
        let v = iou.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
        println!("{c:>5}  {:<24}  {v:>8}", class_name(k, c));
    }
    println!("mIoU: {:.2} % over {} classes, {} scored points", 100.0 * report.mean, report.included().count(), cm.total());

    if let Some(out) = &args.out {
        let confusion: Vec<&[u64]> = cm.counts().chunks(k).collect();
        let results = json!({
            "miou": report.mean,
            "per_class_iou": report.per_class,
            "confusion": confusion,
            "abstained": (0..k).map(|c| cm.abstained(c)).collect::<Vec<_>>(),
            "zones": gt.iter().map(|z| &z.zone).collect::<Vec<_>>(),
        });
        let text = serde_json::to_string_pretty(&results).map_err(|e| Failure::Internal(e.to_string()))?;
        io::write(out, (text + "\n").as_bytes())?;
        let mut m = Manifest::new("eval", json!({ "args": args, "classes": k, "mapping": mapping_path }));
        m.input(&args.pred)?;
        m.input(&args.gt)?;
        if let Some(p) = &mapping_path {
            m.input(p)?;
        }
        m.output(out)?;
        m.results = results;
        m.write(&manifest::path_for(out))?;
    }
    Ok(())
}

fn assignment(path: Option<&PathBuf>) -> Outcome<SplitAssignment> {
    match path {
        None => Ok(SplitAssignment::bundled()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::from(e).at(p))?;
            SplitAssignment::parse(&text).map_err(|e| Failure::from(e).at(p))
        }
    }
}

pub fn stats(args: &StatsArgs, shared: &Shared) -> Outcome {
    let k = shared.classes(args.classes);
    let mapping_path = shared.mapping(args.mapping.as_ref());
    let table = match (&args.labels, &args.counts) {
        (_, Some(counts)) => {
            if args.merge_val || args.splits.is_some() || mapping_path.is_some() {
                log::warn!("--splits, --merge-val and --mapping do not apply to --counts");
            }
            let text = fs::read_to_string(counts).map_err(|e| Failure::from(e).at(counts))?;
            SplitTable::from_csv(&text).map_err(|e| Failure::from(e).at(counts))?
        }
        (Some(dir), None) => {
            let mut split = assignment(args.splits.as_ref())?;
            if args.merge_val {
                split = split.merged("val", "train");
            }
            let mapping = io::read_mapping(mapping_path.as_deref())?;
            let mut zones = read_zone_dir(dir)?;
            if let Some(m) = &mapping {
                for z in &mut zones {
                    z.labels = m.remap(&z.labels).map_err(|e| Failure::data(format!("zone '{}': {e}", z.zone)))?;
                }
            }
            split_statistics(zones.iter().map(|z| (z.zone.as_str(), z.labels.as_slice())), &split, k)
                .map_err(|e| Failure::from(e).at(dir))?
        }
        (None, None) => unreachable!("clap requires --labels or --counts"),
    };
    print!("{}", table.render());

    if let Some(out) = &args.out {
        io::write(out, table.to_csv().as_bytes())?;
        let mut m = Manifest::new("stats", json!({ "args": args, "classes": k, "mapping": mapping_path }));
        for p in [&args.labels, &args.counts, &args.splits, &mapping_path].into_iter().flatten() {
            m.input(p)?;
        }
        m.output(out)?;
        m.write(&manifest::path_for(out))?;
    }
    Ok(())
}

pub fn submit(args: &SubmitArgs, shared: &Shared) -> Outcome {
    let k = shared.classes(args.classes);
    let split = assignment(args.splits.as_ref())?;
    let zones: Vec<String> = split.zones_in(&args.subset).into_iter().map(String::from).collect();
    if zones.is_empty() {
        return Err(Failure::usage(format!("subset '{}' has no zones", args.subset)));
    }
    let pred = read_zone_dir(&args.pred)?;
    let mut rules = SubmissionRules::new(zones);
    rules.num_classes = k;
    validate_submission(&pred, &rules).map_err(|e| Failure::from(e).at(&args.pred))?;
    let bytes = write_submission(&pred, k)?;
    io::write(&args.out, &bytes)?;
    let points: usize = pred.iter().map(|z| z.labels.len()).sum();
    println!("{} zones, {points} points -> {}", pred.len(), args.out.display());

    let mut m = Manifest::new("submit", json!({ "args": args, "classes": k }));
    m.input(&args.pred)?;
    if let Some(p) = &args.splits {
        m.input(p)?;
    }
    m.output(&args.out)?;
    m.write(&manifest::path_for(&args.out))
}

pub fn c2c(args: &C2cArgs, _shared: &Shared) -> Outcome {
    let a = io::read_cloud(&args.a)?;
    let b = io::read_cloud(&args.b)?;
    let r = cloud_to_cloud(&a.positions, &b.positions)?;
    let summary = match &r.summary {
        Some(s) => {
            println!("points  {}", s.count);
            for (name, v) in [
                ("min", s.min),
                ("mean", s.mean),
                ("p50", s.p50),
                ("p90", s.p90),
                ("p95", s.p95),
                ("p99", s.p99),
                ("max", s.max),
            ] {
                println!("{name:<6}  {v:.6}");
            }
            json!({
                "count": s.count, "min": s.min, "mean": s.mean, "p50": s.p50,
                "p90": s.p90, "p95": s.p95, "p99": s.p99, "max": s.max,
            })
        }
        None => {
            println!("query cloud is empty");
            serde_json::Value::Null
        }
    };
    if let Some(out) = &args.out {
        io::write(out, &io::npy_f64(&[r.distances.len()], &r.distances)?)?;
        let mut m = Manifest::new("c2c", json!(args));
        m.input(&args.a)?;
        m.input(&args.b)?;
        m.output(out)?;
        m.results = summary;
        m.write(&manifest::path_for(out))?;
    }
    Ok(())
}
