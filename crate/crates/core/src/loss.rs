//! Multi-task training objective: class-weighted cross-entropy, ENet-style
//! class weights, homoscedastic-uncertainty task weighting in log-σ form,
//! and polynomial learning-rate decay. Gradients are closed-form.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::scalar::Scalar;
use crate::types::SegmentationMask;

/// Regularizer `k` in `w_c = 1 / log(k + p_c)`.
pub const DEFAULT_ENET_K: f64 = 1.02;
/// Exponent of the polynomial learning-rate decay.
pub const DEFAULT_POLY_POWER: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    fn log<T: Scalar>(self, x: T) -> T {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// Per-class loss weights, optionally with the class frequencies and
/// regularizer they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights<T: Scalar> {
    weights: Vec<T>,
    k: Option<T>,
    probabilities: Vec<T>,
}

impl<T: Scalar> ClassWeights<T> {
    /// All-ones weights for `classes` classes.
    pub fn uniform(classes: usize) -> Self {
        Self { weights: vec![T::one(); classes], k: None, probabilities: Vec::new() }
    }

    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(invalid_arg("class weights must be positive and finite"));
        }
        Ok(Self { weights, k: None, probabilities: Vec::new() })
    }

    /// `w_c = 1 / ln(k + p_c)`.
    pub fn enet(probabilities: &[T], k: T) -> Result<Self> {
        Self::enet_with_base(probabilities, k, LogBase::Natural)
    }

    pub fn enet_with_base(probabilities: &[T], k: T, base: LogBase) -> Result<Self> {
        if !(k > T::one()) || !k.is_finite() {
            return Err(invalid_arg(format!("regularizer k must exceed 1, got {k}")));
        }
        if probabilities.is_empty() {
            return Err(invalid_arg("no class probabilities given"));
        }
        if probabilities.iter().any(|p| !(*p >= T::zero() && *p <= T::one())) {
            return Err(invalid_arg("class probabilities must lie in [0, 1]"));
        }
        let sum = probabilities.iter().fold(T::zero(), |a, &p| a + p);
        if (sum - T::one()).abs() > T::PROB_SUM_TOL {
            return Err(invalid_arg(format!("class probabilities sum to {sum}, not 1")));
        }
        let weights = probabilities.iter().map(|&p| T::one() / base.log(k + p)).collect();
        Ok(Self { weights, k: Some(k), probabilities: probabilities.to_vec() })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn k(&self) -> Option<T> {
        self.k
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// ENet class weights `1 / ln(k + p_c)` as a plain vector.
pub fn enet_weights<T: Scalar>(probabilities: &[T], k: T) -> Result<Vec<T>> {
    Ok(ClassWeights::enet(probabilities, k)?.weights)
}

fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &z| m.max(z));
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &e| a + e);
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-w_t · ln softmax(logits)_t` for one sample.
///
/// # Panics
/// If `target` is out of range for `logits` or `w`.
pub fn weighted_ce<T: Scalar>(logits: &[T], target: usize, w: &ClassWeights<T>) -> T {
    assert!(target < logits.len() && target < w.len(), "target {target} out of range");
    let max = logits.iter().fold(T::neg_infinity(), |m, &z| m.max(z));
    let sum = logits.iter().fold(T::zero(), |a, &z| a + (z - max).exp());
    let log_p = logits[target] - max - sum.ln();
    -w.weights[target] * log_p
}

/// Gradient of [`weighted_ce`] with respect to the logits:
/// `w_t · (softmax − onehot_t)`.
pub fn weighted_ce_grad<T: Scalar>(logits: &[T], target: usize, w: &ClassWeights<T>) -> Vec<T> {
    assert!(target < logits.len() && target < w.len(), "target {target} out of range");
    let mut probs = softmax(logits);
    probs[target] = probs[target] - T::one();
    let wt = w.weights[target];
    probs.into_iter().map(|g| g * wt).collect()
}

/// Mean per-pixel weighted cross-entropy. `logits` is channel-major
/// (`classes × height × width`); targets are the mask class codes.
pub fn segmentation_ce<T: Scalar>(logits: &[T], classes: usize, target: &SegmentationMask, w: &ClassWeights<T>) -> Result<T> {
    let n = target.width() * target.height();
    if classes == 0 || logits.len() != classes * n {
        return Err(invalid_arg(format!(
            "logit map has {} values, expected {classes}x{}x{}",
            logits.len(),
            target.height(),
            target.width()
        )));
    }
    if w.len() != classes {
        return Err(invalid_arg(format!("{} class weights for {classes} classes", w.len())));
    }
    if let Some(c) = target.data().iter().find(|c| c.index() >= classes) {
        return Err(invalid_arg(format!("target class {} has no logit channel", c.code())));
    }
    let mut pixel = vec![T::zero(); classes];
    let mut acc = T::zero();
    for (i, c) in target.data().iter().enumerate() {
        for (k, v) in pixel.iter_mut().enumerate() {
            *v = logits[k * n + i];
        }
        acc = acc + weighted_ce(&pixel, c.index(), w);
    }
    Ok(acc / T::of(n as f64))
}

/// Per-task losses: segmentation (mean over pixels) and road-type
/// classification.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms<T> {
    pub segmentation: T,
    pub classification: T,
}

/// Learned `log σ` per task, both starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyParams<T> {
    pub log_sigma_seg: T,
    pub log_sigma_cls: T,
}

/// `e^{−2 s_fs} L_fs + e^{−2 s_c} L_c + s_fs + s_c`.
pub fn total_loss<T: Scalar>(t: &LossTerms<T>, u: &UncertaintyParams<T>) -> T {
    let two = T::of(2.0);
    (-two * u.log_sigma_seg).exp() * t.segmentation
        + (-two * u.log_sigma_cls).exp() * t.classification
        + u.log_sigma_seg
        + u.log_sigma_cls
}

/// `(∂L/∂s_fs, ∂L/∂s_c)` of [`total_loss`].
pub fn total_loss_grad<T: Scalar>(t: &LossTerms<T>, u: &UncertaintyParams<T>) -> (T, T) {
    let two = T::of(2.0);
    (
        -two * (-two * u.log_sigma_seg).exp() * t.segmentation + T::one(),
        -two * (-two * u.log_sigma_cls).exp() * t.classification + T::one(),
    )
}

/// Minimizer of [`total_loss`] in one `log σ` for a fixed positive task loss.
pub fn stationary_log_sigma<T: Scalar>(task_loss: T) -> T {
    T::of(0.5) * (T::of(2.0) * task_loss).ln()
}

/// `base_lr · (1 − epoch / total_epochs)^power`.
pub fn poly_lr<T: Scalar>(epoch: usize, total_epochs: usize, base_lr: T, power: T) -> Result<T> {
    if total_epochs == 0 {
        return Err(invalid_arg("total_epochs must be positive"));
    }
    if epoch > total_epochs {
        return Err(invalid_arg(format!("epoch {epoch} beyond schedule of {total_epochs}")));
    }
    if !(base_lr > T::zero()) {
        return Err(invalid_arg("base learning rate must be positive"));
    }
    let frac = T::one() - T::of(epoch as f64) / T::of(total_epochs as f64);
    Ok(base_lr * frac.powf(power))
}
