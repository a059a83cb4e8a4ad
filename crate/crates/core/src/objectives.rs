//! Reference cross-entropy and supervised contrastive losses with analytic
//! gradients. There is no optimizer here; these exist so gradients and loss
//! values can be checked.

use alloc::vec::Vec;

use crate::detector::log_sum_exp;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, EmbeddingMatrix, LogitMatrix};

/// Default SupCon weight in the joint objective.
pub const DEFAULT_SUPCON_WEIGHT: f64 = 2.0;

/// A loss value and its gradient with respect to the (row-major) input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Mean negative log-likelihood of the true class under the row softmax.
/// The gradient is `(softmax - onehot) / N`.
pub fn ce_loss(logits: &LogitMatrix, labels: &[u32]) -> Result<LossGrad> {
    let (n, c) = (logits.rows(), logits.classes());
    if labels.len() != n {
        return Err(Error::LabelCountMismatch {
            rows: n,
            found: labels.len(),
        });
    }
    let mut grad = alloc::vec![0.0; n * c];
    let mut loss = 0.0;
    for (row, (f, &y)) in logits.iter_rows().zip(labels).enumerate() {
        if y as usize >= c {
            return Err(Error::LabelOutOfRange {
                row,
                label: y,
                classes: c as u32,
            });
        }
        // The arg-max term contributes exactly 1 to the shifted sum; log1p of
        // the rest keeps confident rows accurate.
        let top = (0..c).fold(0, |best, j| if f[j] > f[best] { j } else { best });
        let m = f[top];
        let rest: f64 = (0..c)
            .filter(|&j| j != top)
            .map(|j| libm::exp(f[j] - m))
            .sum();
        loss += (m - f[y as usize]) + libm::log1p(rest);
        let g = &mut grad[row * c..(row + 1) * c];
        for (gj, &fj) in g.iter_mut().zip(f) {
            *gj = libm::exp(fj - m) / (1.0 + rest) / n as f64;
        }
        g[y as usize] -= 1.0 / n as f64;
    }
    Ok(LossGrad {
        loss: loss / n as f64,
        grad,
    })
}

/// Embeddings, labels and temperature for [`supcon_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct SupConBatch {
    embeddings: EmbeddingMatrix,
    labels: Vec<u32>,
    tau: f64,
}

impl SupConBatch {
    pub fn new(embeddings: EmbeddingMatrix, labels: Vec<u32>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::NonPositiveTemperature(tau));
        }
        if labels.len() != embeddings.rows() {
            return Err(Error::LabelCountMismatch {
                rows: embeddings.rows(),
                found: labels.len(),
            });
        }
        if embeddings.rows() < 2 {
            return Err(Error::BatchTooSmall {
                required: 2,
                found: embeddings.rows(),
            });
        }
        Ok(Self {
            embeddings,
            labels,
            tau,
        })
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Supervised contrastive loss on L2-normalized embeddings.
///
/// For anchor `i`, positives `P(i)` are the other samples with its label and
/// the contrast set `A(i)` is every other sample. Anchors without positives
/// are skipped and the mean runs over the remaining anchors. The gradient is
/// taken with respect to the raw (unnormalized) embeddings.
pub fn supcon_loss(batch: &SupConBatch) -> Result<LossGrad> {
    let x = &batch.embeddings;
    let (n, d) = (x.rows(), x.dim());
    let tau = batch.tau;

    let norms: Vec<f64> = x.iter_rows().map(norm).collect();
    if let Some(row) = norms.iter().position(|&r| r == 0.0) {
        return Err(Error::ZeroNormRow { row });
    }
    let z: Vec<Vec<f64>> = x
        .iter_rows()
        .zip(&norms)
        .map(|(r, &l)| r.iter().map(|v| v / l).collect())
        .collect();

    let positives: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && batch.labels[j] == batch.labels[i])
                .count()
        })
        .collect();
    let anchors = positives.iter().filter(|&&p| p > 0).count();
    if anchors == 0 {
        return Err(Error::NoPositivePairs);
    }
    let weight = 1.0 / anchors as f64;

    let mut sims = alloc::vec![0.0; n];
    let mut others = Vec::with_capacity(n - 1);
    let mut gz = alloc::vec![alloc::vec![0.0; d]; n];
    let mut loss = 0.0;
    for i in 0..n {
        if positives[i] == 0 {
            continue;
        }
        for j in 0..n {
            sims[j] = dot(&z[i], &z[j]) / tau;
        }
        others.clear();
        others.extend((0..n).filter(|&j| j != i).map(|j| sims[j]));
        let (_, lse) = log_sum_exp(&others, 1.0);
        let n_pos = positives[i] as f64;
        let pos_mean: f64 = (0..n)
            .filter(|&j| j != i && batch.labels[j] == batch.labels[i])
            .map(|j| sims[j])
            .sum::<f64>()
            / n_pos;
        loss += lse - pos_mean;

        for a in (0..n).filter(|&a| a != i) {
            let mut g = libm::exp(sims[a] - lse);
            if batch.labels[a] == batch.labels[i] {
                g -= 1.0 / n_pos;
            }
            let g = g * weight / tau;
            for k in 0..d {
                gz[i][k] += g * z[a][k];
                gz[a][k] += g * z[i][k];
            }
        }
    }

    let mut grad = Vec::with_capacity(n * d);
    for ((zi, gi), &len) in z.iter().zip(&gz).zip(&norms) {
        let radial = dot(zi, gi);
        grad.extend(zi.iter().zip(gi).map(|(zk, gk)| (gk - zk * radial) / len));
    }
    Ok(LossGrad {
        loss: loss * weight,
        grad,
    })
}

/// `ce_loss + alpha · supcon_loss`, with the CE labels taken from the batch.
pub fn joint_supcon_ce(logits: &LogitMatrix, batch: &SupConBatch, alpha: f64) -> Result<f64> {
    if logits.rows() != batch.labels.len() {
        return Err(Error::LabelCountMismatch {
            rows: logits.rows(),
            found: batch.labels.len(),
        });
    }
    let ce = ce_loss(logits, &batch.labels)?.loss;
    if alpha == 0.0 {
        return Ok(ce);
    }
    Ok(ce + alpha * supcon_loss(batch)?.loss)
}

/// Finite-difference gradient checking used by the `loss-check` command.
pub mod gradcheck {
    use alloc::vec::Vec;

    /// Central differences `(f(x + h eᵢ) - f(x - h eᵢ)) / 2h`.
    pub fn central_difference<F>(x: &[f64], h: f64, mut f: F) -> Vec<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                probe[i] = x[i] + h;
                let up = f(&probe);
                probe[i] = x[i] - h;
                let down = f(&probe);
                probe[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Largest `|a - b| / max(|a|, |b|, floor)` over the components.
    pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_logits_cost_ln_c() {
        let l = LogitMatrix::from_rows(&[[0.5; 4], [0.5; 4]]).unwrap();
        let r = ce_loss(&l, &[0, 3]).unwrap();
        assert!((r.loss - libm::log(4.0)).abs() < 1e-15);
    }

    #[test]
    fn confident_logit_cost() {
        let l = LogitMatrix::from_rows(&[[10.0, -10.0]]).unwrap();
        let r = ce_loss(&l, &[0]).unwrap();
        // -log σ(20) = log(1 + e^-20)
        let direct = libm::log1p(libm::exp(-20.0));
        assert!((r.loss - direct).abs() < 1e-12 * direct);
        assert!((r.loss - 2.06e-9).abs() < 1e-11);
    }

    #[test]
    fn ce_label_out_of_range() {
        let l = LogitMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(
            ce_loss(&l, &[2]).unwrap_err(),
            Error::LabelOutOfRange {
                row: 0,
                label: 2,
                classes: 2
            }
        );
    }

    #[test]
    fn two_sample_same_class_is_zero() {
        let x = EmbeddingMatrix::from_rows(&[[1.0, 2.0, 0.5], [-0.3, 0.8, 1.0]]).unwrap();
        let b = SupConBatch::new(x, vec![4, 4], 0.1).unwrap();
        let r = supcon_loss(&b).unwrap();
        assert_eq!(r.loss, 0.0);
    }

    #[test]
    fn supcon_errors() {
        let x = EmbeddingMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(
            SupConBatch::new(x.clone(), vec![0, 1], 0.0).unwrap_err(),
            Error::NonPositiveTemperature(0.0)
        );
        let b = SupConBatch::new(x, vec![0, 1], 0.5).unwrap();
        assert_eq!(supcon_loss(&b).unwrap_err(), Error::NoPositivePairs);
        let one = EmbeddingMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(SupConBatch::new(one, vec![0], 0.5).is_err());
    }

    #[test]
    fn anchors_without_positives_are_skipped() {
        // Sample 2 is alone in its class; only anchors 0 and 1 contribute.
        let x = EmbeddingMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let b = SupConBatch::new(x, vec![0, 0, 1], 1.0).unwrap();
        let r = supcon_loss(&b).unwrap();
        // Anchor 0: sims to 1 and 2 are 0 and -1; anchor 1: sims to 0 and 2 are 0 and 0.
        let a0 = libm::log(1.0 + libm::exp(-1.0));
        let a1 = libm::log(2.0);
        assert!((r.loss - (a0 + a1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn joint_objective_composition() {
        let l = LogitMatrix::from_rows(&[[0.2, 1.0], [1.5, -0.5]]).unwrap();
        let x = EmbeddingMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let b = SupConBatch::new(x, vec![1, 1], 0.7).unwrap();
        let ce = ce_loss(&l, &[1, 1]).unwrap().loss;
        assert_eq!(joint_supcon_ce(&l, &b, 0.0).unwrap(), ce);
        assert_eq!(joint_supcon_ce(&l, &b, DEFAULT_SUPCON_WEIGHT).unwrap(), ce);
    }
}
