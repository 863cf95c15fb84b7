//! Confusion counting and intersection-over-union.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Shard size for parallel counting. Integer sums make the merge order irrelevant.
const SHARD: usize = 1 << 16;

/// `K x K` counts indexed `(ground truth, prediction)`.
///
/// Points whose ground truth is the ignore label are never counted. Points
/// with a real ground truth but an ignored prediction are recorded as
/// abstentions for their ground-truth class and count as false negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    ignore: u8,
    counts: Vec<u64>,
    abstained: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize, ignore: u8) -> Result<Self> {
        if k == 0 || k > ignore as usize {
            return Err(Error::invalid(format!(
                "class count {k} must lie in 1..={ignore} so the ignore label stays out of range"
            )));
        }
        Ok(Self {
            k,
            ignore,
            counts: vec![0; k * k],
            abstained: vec![0; k],
        })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn ignore_label(&self) -> u8 {
        self.ignore
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.k + pred]
    }

    pub fn abstained(&self, gt: usize) -> u64 {
        self.abstained[gt]
    }

    /// Every counted point, abstentions included.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.abstained.iter().sum::<u64>()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.k).filter(|&g| g != c).map(|g| self.get(g, c)).sum()
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.k).filter(|&p| p != c).map(|p| self.get(c, p)).sum::<u64>() + self.abstained[c]
    }

    fn check(&self, what: &str, index: usize, label: u8) -> Result<()> {
        if label as usize >= self.k && label != self.ignore {
            return Err(Error::data(format!(
                "{what} label {label} at index {index} outside 0..{} and not {}",
                self.k, self.ignore
            )));
        }
        Ok(())
    }

    /// Adds label pairs starting at global index `offset` (used in error messages).
    fn accumulate(&mut self, pred: &[u8], gt: &[u8], offset: usize) -> Result<()> {
        for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
            self.check("predicted", offset + i, p)?;
            self.check("ground-truth", offset + i, g)?;
            if g == self.ignore {
                continue;
            }
            if p == self.ignore {
                self.abstained[g as usize] += 1;
            } else {
                self.counts[g as usize * self.k + p as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn add(&mut self, pred: &[u8], gt: &[u8]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} ground-truth labels",
                pred.len(),
                gt.len()
            )));
        }
        self.accumulate(pred, gt, 0)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k || other.ignore != self.ignore {
            return Err(Error::invalid("cannot merge confusion matrices of different shapes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.abstained.iter_mut().zip(&other.abstained) {
            *a += b;
        }
        Ok(())
    }

    /// Row-major `K x K` counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Counts `(gt, pred)` pairs, sharded across threads when enabled.
pub fn confusion(pred: &[u8], gt: &[u8], k: usize, ignore: u8) -> Result<ConfusionMatrix> {
    let empty = ConfusionMatrix::new(k, ignore)?;
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground-truth labels",
            pred.len(),
            gt.len()
        )));
    }
    let shard = |(i, (p, g)): (usize, (&[u8], &[u8]))| -> Result<ConfusionMatrix> {
        let mut cm = empty.clone();
        cm.accumulate(p, g, i * SHARD)?;
        Ok(cm)
    };
    #[cfg(feature = "parallel")]
    let shards: Vec<Result<ConfusionMatrix>> = pred
        .par_chunks(SHARD)
        .zip(gt.par_chunks(SHARD))
        .enumerate()
        .map(shard)
        .collect();
    #[cfg(not(feature = "parallel"))]
    let shards: Vec<Result<ConfusionMatrix>> = pred
        .chunks(SHARD)
        .zip(gt.chunks(SHARD))
        .enumerate()
        .map(shard)
        .collect();
    let mut total = empty;
    for s in shards {
        total.merge(&s?)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    /// `None` for classes with no ground truth, no prediction and no abstention.
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

impl IouReport {
    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_class
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
    }
}

/// Per-class `TP / (TP + FP + FN)` and their mean over classes that occur.
pub fn miou(cm: &ConfusionMatrix) -> Result<IouReport> {
    if cm.total() == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let per_class: Vec<Option<f64>> = (0..cm.classes())
        .map(|c| {
            let tp = cm.true_positives(c);
            let denom = tp + cm.false_positives(c) + cm.false_negatives(c);
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let excluded: Vec<usize> = (0..per_class.len()).filter(|&c| per_class[c].is_none()).collect();
    if !excluded.is_empty() {
        log::info!("classes {excluded:?} absent from ground truth and predictions; excluded from the mean IoU");
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(IouReport { per_class, mean })
}
