use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Outcome of the thresholded detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Decision {
    In,
    Out,
}

/// Largest λ such that the fraction of `scores` with `s >= λ` is at least
/// `target_rate`. The result is always one of the scores.
pub fn calibrate_threshold(scores: &[f64], target_rate: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if !(target_rate > 0.0 && target_rate <= 1.0) {
        return Err(Error::InvalidRate(target_rate));
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let keeps = |m: usize| m as f64 / n as f64 >= target_rate;
    let mut m = (libm::ceil(target_rate * n as f64) as usize).clamp(1, n);
    while m > 1 && keeps(m - 1) {
        m -= 1;
    }
    while m < n && !keeps(m) {
        m += 1;
    }
    Ok(sorted[m - 1])
}

/// `In` iff `score >= lambda`.
pub fn detect(scores: &[f64], lambda: f64) -> Vec<Decision> {
    scores
        .iter()
        .map(|&s| {
            if s >= lambda {
                Decision::In
            } else {
                Decision::Out
            }
        })
        .collect()
}
