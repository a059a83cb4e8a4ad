use super::{Method, ScoreVector};
use crate::error::{Error, Result};
use crate::matrix::LogitMatrix;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// `ln Σ exp(v_j / t)` with the maximum factored out. Returns the max and the
/// log-sum-exp.
pub(crate) fn log_sum_exp(v: &[f64], t: f64) -> (f64, f64) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = v.iter().map(|x| libm::exp((x - m) / t)).sum();
    (m, m / t + libm::log(s))
}

/// Maximum softmax probability per row.
pub fn score_msp(logits: &LogitMatrix) -> Result<ScoreVector> {
    let scores = logits
        .iter_rows()
        .map(|row| {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|x| libm::exp(x - m)).sum();
            1.0 / s
        })
        .collect();
    ScoreVector::new(Method::Msp, scores)
}

/// Negative free energy `T · ln Σ_j exp(f_j / T)` per row.
pub fn score_energy(logits: &LogitMatrix, temperature: f64) -> Result<ScoreVector> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let scores = logits
        .iter_rows()
        .map(|row| {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|x| libm::exp((x - m) / temperature)).sum();
            m + temperature * libm::log(s)
        })
        .collect();
    ScoreVector::new(Method::Energy, scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(row: &[f64]) -> LogitMatrix {
        LogitMatrix::from_rows(&[row]).unwrap()
    }

    #[test]
    fn msp_examples() {
        assert_eq!(score_msp(&one(&[0.0, 0.0])).unwrap().as_slice(), &[0.5]);
        let s = score_msp(&one(&[libm::log(3.0), 0.0, 0.0]))
            .unwrap()
            .as_slice()[0];
        assert!((s - 0.6).abs() < 1e-15);
        let s = score_msp(&one(&[1000.0, 0.0])).unwrap().as_slice()[0];
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let s = score_energy(&one(&[1.0; 4]), 1.0).unwrap().as_slice()[0];
        assert!((s - (1.0 + libm::log(4.0))).abs() < 1e-15);
        assert!((s - 2.3863).abs() < 1e-4);
        let s = score_energy(&one(&[2.0, 0.0]), 1.0).unwrap().as_slice()[0];
        let direct = libm::log(libm::exp(2.0) + libm::exp(0.0));
        assert!((s - direct).abs() < 1e-12);
        let base = score_energy(&one(&[0.3, -1.2, 2.5]), 0.7)
            .unwrap()
            .as_slice()[0];
        let shifted = score_energy(&one(&[5.3, 3.8, 7.5]), 0.7)
            .unwrap()
            .as_slice()[0];
        assert!((shifted - base - 5.0).abs() < 1e-12);
    }

    #[test]
    fn energy_rejects_bad_temperature() {
        assert_eq!(
            score_energy(&one(&[0.0, 1.0]), 0.0).unwrap_err(),
            Error::NonPositiveTemperature(0.0)
        );
        assert!(score_energy(&one(&[0.0, 1.0]), -2.0).is_err());
    }

    #[test]
    fn lse_helper() {
        let (m, l) = log_sum_exp(&[1.0, 1.0], 1.0);
        assert_eq!(m, 1.0);
        assert!((l - (1.0 + libm::log(2.0))).abs() < 1e-15);
    }
}
