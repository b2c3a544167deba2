//! Segmentation and road-class evaluation metrics.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::types::{ClassId, RoadClass, SegmentationMask};

/// Per-class true positive, false positive and false negative pixel counts,
/// indexed by [`ClassId::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: [u64; 3],
    pub fp: [u64; 3],
    #[serde(rename = "fn")]
    pub fn_: [u64; 3],
}

impl ConfusionCounts {
    pub fn total_pixels(&self) -> u64 {
        self.tp.iter().sum::<u64>() + self.fn_.iter().sum::<u64>()
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        for c in 0..3 {
            self.tp[c] += o.tp[c];
            self.fp[c] += o.fp[c];
            self.fn_[c] += o.fn_[c];
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

pub fn confusion(pred: &SegmentationMask, gt: &SegmentationMask) -> Result<ConfusionCounts> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(invalid_arg(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if p == g {
            c.tp[p.index()] += 1;
        } else {
            c.fp[p.index()] += 1;
            c.fn_[g.index()] += 1;
        }
    }
    Ok(c)
}

/// `TP / (TP + FP + FN)`, or `None` when the class never occurs in either
/// mask.
pub fn iou(counts: &ConfusionCounts, class: ClassId) -> Option<f64> {
    let c = class.index();
    let denom = counts.tp[c] + counts.fp[c] + counts.fn_[c];
    (denom > 0).then(|| counts.tp[c] as f64 / denom as f64)
}

/// Unweighted mean IoU over the classes that occur.
pub fn miou(counts: &ConfusionCounts) -> Result<f64> {
    let present: Vec<f64> = ClassId::ALL.iter().filter_map(|&c| iou(counts, c)).collect();
    if present.is_empty() {
        return Err(Error::InvalidInput("no class occurs in prediction or ground truth".into()));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Fraction of exactly matching road-class labels.
pub fn accuracy(pred: &[RoadClass], gt: &[RoadClass]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(invalid_arg(format!("{} predictions for {} labels", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(invalid_arg("accuracy of an empty label list"));
    }
    let hits = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}
