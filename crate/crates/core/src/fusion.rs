//! Late fusion of image-branch and point-branch class scores.
//!
//! A small fully connected network takes the concatenation
//! `[image_logits, point_logits]` (width `2K`) and returns `K` class scores.
//! Hidden layers use the rectifier; the output layer is linear and trained
//! with softmax cross-entropy.
//!
//! Checkpoints use a little-endian binary layout:
//!
//! | field | type |
//! |---|---|
//! | magic | 8 bytes, `GFUSEMLP` |
//! | version | `u32`, currently 1 |
//! | layer count | `u32` |
//! | per layer: inputs, outputs | `u32`, `u32` |
//! | per layer: weights | `outputs * inputs` `f64`, row-major |
//! | per layer: biases | `outputs` `f64` |

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classes::IGNORE_LABEL;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GFUSEMLP";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

/// One affine layer: `y = W x + b`, with `W` of shape `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: DMatrix::zeros(outputs, inputs),
            bias: DVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Number of parameters of a `2k -> hidden... -> k` network.
pub fn param_count(k: usize, hidden: &[usize]) -> usize {
    let mut widths = vec![2 * k];
    widths.extend_from_slice(hidden);
    widths.push(k);
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    layers: Vec<Layer>,
}

impl FusionModel {
    /// Checks that layer widths chain from `2K` to `K` and all parameters are finite.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let (first, last) = match (layers.first(), layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::invalid("a fusion model needs at least one layer")),
        };
        if last.outputs() < 2 || first.inputs() != 2 * last.outputs() {
            return Err(Error::invalid(format!(
                "fusion model maps {} inputs to {} outputs; expected 2K -> K with K >= 2",
                first.inputs(),
                last.outputs()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::invalid(format!(
                    "layer {i} has {} outputs but layer {} has {} inputs",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::invalid(format!("layer {i} bias length mismatch")));
            }
            if !l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    /// He-initialised network with zero biases.
    pub fn init(k: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(k, hidden, &mut rng)
    }

    fn init_with(k: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("fusion needs K >= 2"));
        }
        if hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        let mut widths = vec![2 * k];
        widths.extend_from_slice(hidden);
        widths.push(k);
        let layers = widths
            .windows(2)
            .map(|w| {
                let scale = (2.0 / w[0] as f64).sqrt();
                let mut layer = Layer::zeros(w[0], w[1]);
                // Row-major fill so the draw order matches the checkpoint layout.
                for r in 0..w[1] {
                    for c in 0..w[0] {
                        let z: f64 = StandardNormal.sample(rng);
                        layer.weight[(r, c)] = scale * z;
                    }
                }
                layer
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::outputs)
            .collect()
    }

    /// Class scores for one concatenated `2K` input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != 2 * self.classes() {
            return Err(Error::invalid(format!(
                "fusion input has {} values, expected {}",
                input.len(),
                2 * self.classes()
            )));
        }
        let x = DMatrix::from_column_slice(input.len(), 1, input);
        Ok(self.forward_batch(x).column(0).iter().copied().collect())
    }

    /// Scores for a batch whose columns are samples.
    fn forward_batch(&self, mut a: DMatrix<f64>) -> DMatrix<f64> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = affine(layer, &a);
            if i < last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        a
    }

    /// Argmax predictions for concatenated inputs.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<u8>> {
        let x = self.input_matrix(inputs.iter().map(Vec::as_slice))?;
        let scores = self.forward_batch(x);
        Ok(scores
            .column_iter()
            .map(|c| argmax_col(c.as_slice()) as u8)
            .collect())
    }

    fn input_matrix<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<DMatrix<f64>> {
        let width = 2 * self.classes();
        let n = rows.len();
        let mut x = DMatrix::zeros(width, n);
        for (j, r) in rows.enumerate() {
            if r.len() != width {
                return Err(Error::invalid(format!(
                    "sample {j} has {} inputs, expected {width}",
                    r.len()
                )));
            }
            x.column_mut(j).copy_from_slice(r);
        }
        Ok(x)
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.inputs() as u32).to_le_bytes())?;
            w.write_all(&(l.outputs() as u32).to_le_bytes())?;
        }
        for l in &self.layers {
            for r in 0..l.outputs() {
                for c in 0..l.inputs() {
                    w.write_all(&l.weight[(r, c)].to_le_bytes())?;
                }
            }
            for b in l.bias.iter() {
                w.write_all(&b.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::data("checkpoint too short"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::data("not a fusion checkpoint (bad magic)"));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::data(format!("unsupported checkpoint version {version}")));
        }
        let count = read_u32(r)? as usize;
        if count == 0 || count > 64 {
            return Err(Error::data(format!("implausible layer count {count}")));
        }
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            let i = read_u32(r)? as usize;
            let o = read_u32(r)? as usize;
            if i == 0 || o == 0 || i.saturating_mul(o) > 1 << 28 {
                return Err(Error::data(format!("implausible layer shape {o}x{i}")));
            }
            dims.push((i, o));
        }
        let mut layers = Vec::with_capacity(count);
        for (i, o) in dims {
            let mut layer = Layer::zeros(i, o);
            for row in 0..o {
                for col in 0..i {
                    layer.weight[(row, col)] = read_f64(r)?;
                }
            }
            for b in layer.bias.iter_mut() {
                *b = read_f64(r)?;
            }
            layers.push(layer);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::data("trailing bytes after checkpoint"));
        }
        Self::from_layers(layers).map_err(|e| Error::data(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_checkpoint(&mut bytes.as_slice())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::data("checkpoint truncated"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::data("checkpoint truncated"))?;
    Ok(f64::from_le_bytes(b))
}

fn affine(layer: &Layer, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = &layer.weight * a;
    for mut col in z.column_iter_mut() {
        col += &layer.bias;
    }
    z
}

fn argmax_col(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Class scores for one point from its two logit vectors.
pub fn fuse_forward(model: &FusionModel, image_logits: &[f64], point_logits: &[f64]) -> Result<Vec<f64>> {
    let k = model.classes();
    if image_logits.len() != k || point_logits.len() != k {
        return Err(Error::invalid(format!(
            "fusion inputs have lengths {} and {}, model expects K={k}",
            image_logits.len(),
            point_logits.len()
        )));
    }
    let input: Vec<f64> = image_logits.iter().chain(point_logits).copied().collect();
    model.forward(&input)
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSample {
    pub image_logits: Vec<f64>,
    pub point_logits: Vec<f64>,
    pub label: u8,
}

impl FusionSample {
    pub fn new(image_logits: Vec<f64>, point_logits: Vec<f64>, label: u8) -> Self {
        Self {
            image_logits,
            point_logits,
            label,
        }
    }

    pub fn input(&self) -> Vec<f64> {
        self.image_logits
            .iter()
            .chain(&self.point_logits)
            .copied()
            .collect()
    }
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

struct Batch {
    x: DMatrix<f64>,
    labels: Vec<usize>,
    /// Per-sample loss weights, normalised to sum to one.
    weights: Vec<f64>,
}

fn build_batch(
    model: &FusionModel,
    samples: &[&FusionSample],
    class_weights: Option<&[f64]>,
) -> Result<Batch> {
    if samples.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let k = model.classes();
    let mut x = DMatrix::zeros(2 * k, samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for (j, s) in samples.iter().enumerate() {
        if s.image_logits.len() != k || s.point_logits.len() != k {
            return Err(Error::invalid(format!(
                "sample {j} has logit lengths {} and {}, expected K={k}",
                s.image_logits.len(),
                s.point_logits.len()
            )));
        }
        if s.label as usize >= k {
            return Err(Error::invalid(format!(
                "sample {j} has label {} outside 0..{k}",
                s.label
            )));
        }
        let mut col = x.column_mut(j);
        for (i, v) in s.image_logits.iter().chain(&s.point_logits).enumerate() {
            col[i] = *v;
        }
        labels.push(s.label as usize);
    }
    let raw: Vec<f64> = match class_weights {
        Some(w) => labels.iter().map(|&l| w[l]).collect(),
        None => vec![1.0; labels.len()],
    };
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("batch has zero total class weight"));
    }
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok(Batch { x, labels, weights })
}

/// Weighted mean cross-entropy and, optionally, its gradient.
fn loss_and_grad(model: &FusionModel, batch: &Batch, want_grad: bool) -> (f64, Option<Gradients>) {
    let last = model.layers.len() - 1;
    let mut acts = Vec::with_capacity(model.layers.len() + 1);
    acts.push(batch.x.clone());
    for (i, layer) in model.layers.iter().enumerate() {
        let mut z = affine(layer, acts.last().unwrap());
        if i < last {
            z.apply(|v| *v = v.max(0.0));
        }
        acts.push(z);
    }
    let scores = acts.pop().unwrap();

    let mut loss = 0.0;
    let mut delta = DMatrix::zeros(scores.nrows(), scores.ncols());
    for (j, col) in scores.column_iter().enumerate() {
        let p = softmax(col.as_slice());
        let y = batch.labels[j];
        let w = batch.weights[j];
        // log p_y via log-sum-exp to stay finite for saturated scores.
        let m = col.max();
        let lse = m + col.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        loss += w * (lse - col[y]);
        for (i, pi) in p.into_iter().enumerate() {
            delta[(i, j)] = w * (pi - if i == y { 1.0 } else { 0.0 });
        }
    }
    if !want_grad {
        return (loss, None);
    }

    let mut grads: Vec<Layer> = Vec::with_capacity(model.layers.len());
    for (i, layer) in model.layers.iter().enumerate().rev() {
        let a_prev = &acts[i];
        let weight = &delta * a_prev.transpose();
        let bias = delta.column_sum();
        if i > 0 {
            let mut back = layer.weight.transpose() * &delta;
            back.zip_apply(a_prev, |d, a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = back;
        }
        grads.push(Layer { weight, bias });
    }
    grads.reverse();
    (loss, Some(Gradients { layers: grads }))
}

/// Mean softmax cross-entropy over `batch`.
pub fn fusion_loss(model: &FusionModel, batch: &[FusionSample]) -> Result<f64> {
    let refs: Vec<&FusionSample> = batch.iter().collect();
    let b = build_batch(model, &refs, None)?;
    Ok(loss_and_grad(model, &b, false).0)
}

/// Exact gradient of the mean softmax cross-entropy over `batch`.
pub fn fuse_gradient(model: &FusionModel, batch: &[FusionSample]) -> Result<Gradients> {
    let refs: Vec<&FusionSample> = batch.iter().collect();
    let b = build_batch(model, &refs, None)?;
    Ok(loss_and_grad(model, &b, true).1.unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassWeighting {
    #[default]
    None,
    /// `n / (present_classes * n_c)` for each present class.
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub class_weighting: ClassWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
            momentum: 0.9,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            class_weighting: ClassWeighting::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-data loss before training followed by one entry per epoch.
    pub loss_history: Vec<f64>,
    pub final_accuracy: f64,
    pub samples_used: usize,
    pub samples_ignored: usize,
}

/// Trains a fresh model on `samples`; samples labelled 255 are skipped.
pub fn train_fusion(
    samples: &[FusionSample],
    k: usize,
    config: &TrainConfig,
) -> Result<(FusionModel, TrainReport)> {
    config.validate()?;
    let used: Vec<&FusionSample> = samples.iter().filter(|s| s.label != IGNORE_LABEL).collect();
    let ignored = samples.len() - used.len();
    if used.is_empty() {
        return Err(Error::invalid("no labelled samples to train on"));
    }

    let mut counts = vec![0usize; k];
    for s in &used {
        if s.label as usize >= k {
            return Err(Error::invalid(format!("label {} outside 0..{k}", s.label)));
        }
        counts[s.label as usize] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        log::warn!("fusion training data contains a single class; the model will be degenerate");
    }
    let class_weights: Option<Vec<f64>> = match config.class_weighting {
        ClassWeighting::None => None,
        ClassWeighting::InverseFrequency => Some(
            counts
                .iter()
                .map(|&c| {
                    if c == 0 {
                        0.0
                    } else {
                        used.len() as f64 / (present as f64 * c as f64)
                    }
                })
                .collect(),
        ),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = FusionModel::init_with(k, &config.hidden, &mut rng)?;
    let full = build_batch(&model, &used, class_weights.as_deref())?;
    let mut velocity: Vec<Layer> = model
        .layers
        .iter()
        .map(|l| Layer::zeros(l.inputs(), l.outputs()))
        .collect();

    let mut loss_history = Vec::with_capacity(config.epochs + 1);
    loss_history.push(loss_and_grad(&model, &full, false).0);
    let mut order: Vec<usize> = (0..used.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch_refs: Vec<&FusionSample> = chunk.iter().map(|&i| used[i]).collect();
            let batch = build_batch(&model, &batch_refs, class_weights.as_deref())?;
            let grads = loss_and_grad(&model, &batch, true).1.unwrap();
            for ((layer, vel), g) in model.layers.iter_mut().zip(&mut velocity).zip(grads.layers) {
                vel.weight *= config.momentum;
                vel.weight -= config.learning_rate * g.weight;
                vel.bias *= config.momentum;
                vel.bias -= config.learning_rate * g.bias;
                layer.weight += &vel.weight;
                layer.bias += &vel.bias;
            }
        }
        let loss = loss_and_grad(&model, &full, false).0;
        if !loss.is_finite() {
            return Err(Error::Convergence {
                iterations: loss_history.len(),
                residual: loss,
            });
        }
        loss_history.push(loss);
    }

    let scores = model.forward_batch(full.x.clone());
    let correct = scores
        .column_iter()
        .zip(&full.labels)
        .filter(|(c, &y)| argmax_col(c.as_slice()) == y)
        .count();
    let final_accuracy = correct as f64 / used.len() as f64;
    log::info!(
        "fusion training: {} samples, {} epochs, final loss {:.6}, accuracy {:.4}",
        used.len(),
        config.epochs,
        loss_history.last().unwrap(),
        final_accuracy
    );
    Ok((
        model,
        TrainReport {
            loss_history,
            final_accuracy,
            samples_used: used.len(),
            samples_ignored: ignored,
        },
    ))
}
