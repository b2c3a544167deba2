//! Central finite-difference verification of the closed-form loss gradients.
//!
//! Only loss *values* are differentiated numerically here, so the check is
//! independent of the analytic gradient code it audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::{total_loss, total_loss_grad, weighted_ce, weighted_ce_grad, ClassWeights, LossTerms, UncertaintyParams, DEFAULT_ENET_K};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// `|a − b| / max(1, |a|, |b|)`: relative for large values, absolute for
/// components below one.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += step;
    xm[i] -= step;
    (f(&xp) - f(&xm)) / (2.0 * step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub cases: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Max relative error of `weighted_ce_grad` over all cases and components.
    pub weighted_ce_grad: f64,
    /// Max relative error of `total_loss_grad` over all cases and components.
    pub total_loss_grad: f64,
    pub passed: bool,
}

/// Random class-weight vector derived from a random class distribution.
fn random_weights(rng: &mut ChaCha8Rng, classes: usize) -> ClassWeights<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.gen_range(0.0..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| r / sum).collect();
    // absorb rounding so the distribution sums to one
    let tail: f64 = p[1..].iter().sum();
    p[0] = (1.0 - tail).max(0.0);
    ClassWeights::enet(&p, DEFAULT_ENET_K).expect("valid random distribution")
}

/// Runs `cases` seeded configurations for each gradient.
pub fn run(cases: usize, seed: u64, step: f64, tolerance: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ce_err = 0f64;
    let mut total_err = 0f64;
    for _ in 0..cases {
        let classes = rng.gen_range(2..=8);
        let logits: Vec<f64> = (0..classes).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let target = rng.gen_range(0..classes);
        let w = random_weights(&mut rng, classes);
        let analytic = weighted_ce_grad(&logits, target, &w);
        for (i, &a) in analytic.iter().enumerate() {
            let fd = central_difference(|z| weighted_ce(z, target, &w), &logits, i, step);
            ce_err = ce_err.max(relative_error(a, fd));
        }

        let terms = LossTerms { segmentation: rng.gen_range(0.01..5.0), classification: rng.gen_range(0.01..5.0) };
        let s = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let loss_at = |x: &[f64]| total_loss(&terms, &UncertaintyParams { log_sigma_seg: x[0], log_sigma_cls: x[1] });
        let (ga, gb) = total_loss_grad(&terms, &UncertaintyParams { log_sigma_seg: s[0], log_sigma_cls: s[1] });
        for (i, a) in [ga, gb].into_iter().enumerate() {
            total_err = total_err.max(relative_error(a, central_difference(loss_at, &s, i, step)));
        }
    }
    GradCheckReport {
        cases,
        seed,
        step,
        tolerance,
        weighted_ce_grad: ce_err,
        total_loss_grad: total_err,
        passed: ce_err <= tolerance && total_err <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_check_passes() {
        let r = run(200, 7, DEFAULT_STEP, DEFAULT_TOLERANCE);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // d/dx x² at 3 is 6; claiming 5 must register as a large error.
        let fd = central_difference(|x| x[0] * x[0], &[3.0], 0, DEFAULT_STEP);
        assert!(relative_error(5.0, fd) > 0.1);
        assert!(relative_error(6.0, fd) < 1e-8);
    }
}
