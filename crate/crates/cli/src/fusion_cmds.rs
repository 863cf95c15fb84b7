use std::path::Path;

use gridfuse::fusion::{softmax, train_fusion, ClassWeighting, FusionModel, FusionSample, TrainConfig};
use rayon::prelude::*;
use serde_json::json;

use crate::failure::{flag, Failure, Outcome};
use crate::manifest::{self, Manifest};
use crate::{io, ClassWeightingArg, FusePredictArgs, FuseTrainArgs, Shared};

/// Class count, image-branch rows and point-branch rows.
type ScorePair = (usize, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Reads the two score arrays and checks that they pair up row by row.
fn read_pair(image: &Path, point: &Path) -> Outcome<ScorePair> {
    let (ki, img) = io::read_rows(image)?;
    let (kp, pts) = io::read_rows(point)?;
    if ki != kp {
        return Err(Failure::data(format!("{} has K={ki} but {} has K={kp}", image.display(), point.display())));
    }
    if img.len() != pts.len() {
        return Err(Failure::data(format!(
            "{} has {} rows but {} has {}",
            image.display(),
            img.len(),
            point.display(),
            pts.len()
        )));
    }
    Ok((ki, img, pts))
}

pub fn train(args: &FuseTrainArgs, shared: &Shared) -> Outcome {
    let seed = shared.seed(args.seed);
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        momentum: args.momentum,
        seed,
        hidden: args.hidden.clone(),
        class_weighting: match args.class_weighting {
            ClassWeightingArg::None => ClassWeighting::None,
            ClassWeightingArg::InverseFrequency => ClassWeighting::InverseFrequency,
        },
    };
    flag(config.validate())?;
    if args.hidden.contains(&0) {
        return Err(Failure::usage("--hidden widths must be positive"));
    }

    let (width, img, pts) = read_pair(&args.image_logits, &args.point_logits)?;
    let k = args.classes.or(shared.config.classes).unwrap_or(width);
    if k != width {
        return Err(Failure::data(format!("score arrays have K={width} but {k} classes were requested")));
    }
    let labels = io::read_labels(&args.labels)?;
    if labels.len() != img.len() {
        return Err(Failure::data(format!("{} labels for {} score rows", labels.len(), img.len())).at(&args.labels));
    }
    if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= k && l != gridfuse::IGNORE_LABEL) {
        return Err(Failure::data(format!("label {l} at index {i} outside 0..{k}")).at(&args.labels));
    }
    let samples: Vec<FusionSample> = img
        .into_iter()
        .zip(pts)
        .zip(&labels)
        .map(|((a, b), &l)| FusionSample::new(a, b, l))
        .collect();

    let (model, report) = train_fusion(&samples, k, &config)?;
    model.save(&args.out).map_err(|e| Failure::from(e).at(&args.out))?;
    println!(
        "{} samples ({} ignored), {} parameters, loss {:.6} -> {:.6}, training accuracy {:.4}",
        report.samples_used,
        report.samples_ignored,
        model.param_count(),
        report.loss_history[0],
        report.loss_history[report.loss_history.len() - 1],
        report.final_accuracy
    );

    let mut m = Manifest::new("fuse-train", json!({ "args": args, "seed": seed, "classes": k }));
    m.input(&args.image_logits)?;
    m.input(&args.point_logits)?;
    m.input(&args.labels)?;
    m.output(&args.out)?;
    m.results = json!({
        "parameters": model.param_count(),
        "samples_used": report.samples_used,
        "samples_ignored": report.samples_ignored,
        "final_accuracy": report.final_accuracy,
        "loss_history": report.loss_history,
    });
    m.write(&manifest::path_for(&args.out))
}

pub fn predict(args: &FusePredictArgs, _shared: &Shared) -> Outcome {
    let model = FusionModel::load(&args.model).map_err(|e| Failure::from(e).at(&args.model))?;
    let (k, img, pts) = read_pair(&args.image_logits, &args.point_logits)?;
    if k != model.classes() {
        return Err(Failure::data(format!("score arrays have K={k} but the model expects K={}", model.classes())));
    }
    let scores: Vec<Vec<f64>> = img
        .par_iter()
        .zip(&pts)
        .map(|(a, b)| {
            let mut input = a.clone();
            input.extend_from_slice(b);
            model.forward(&input)
        })
        .collect::<Result<_, _>>()?;
    let labels: Vec<u8> = scores.iter().map(|s| gridfuse::transfer::argmax(s) as u8).collect();
    io::write(&args.out, &io::npy_u8(&labels)?)?;
    if let Some(p) = &args.probabilities {
        let probs: Vec<f64> = scores.iter().flat_map(|s| softmax(s)).collect();
        io::write(p, &io::npy_f64(&[labels.len(), k], &probs)?)?;
    }
    println!("{} points labelled with K={k}", labels.len());

    let mut m = Manifest::new("fuse-predict", json!(args));
    m.input(&args.model)?;
    m.input(&args.image_logits)?;
    m.input(&args.point_logits)?;
    m.output(&args.out)?;
    if let Some(p) = &args.probabilities {
        m.output(p)?;
    }
    m.write(&manifest::path_for(&args.out))
}
