//! Scoring functions and the thresholded detector.
//!
//! All scores are oriented so that a larger value means "more
//! in-distribution": the Mahalanobis and kNN distances are negated.

mod gaussian;
mod knn;
mod output;
mod threshold;

use alloc::vec::Vec;
use core::fmt;

pub use gaussian::{fit_gaussian, score_maha, GaussianModel, DEFAULT_EPS_SCALE};
pub use knn::{score_knn, KnnIndex, DEFAULT_K};
pub(crate) use output::log_sum_exp;
pub use output::{score_energy, score_msp, DEFAULT_TEMPERATURE};
pub use threshold::{calibrate_threshold, detect, Decision};

use crate::error::{Error, Result};
use crate::matrix::{EmbeddingMatrix, LabeledEmbeddings};
use crate::metrics::{auroc, fpr95, FprMode};

/// Which scoring function produced a [`ScoreVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Maha,
    Knn,
    Msp,
    Energy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Maha, Method::Knn, Method::Msp, Method::Energy];

    pub fn name(self) -> &'static str {
        match self {
            Method::Maha => "maha",
            Method::Knn => "knn",
            Method::Msp => "msp",
            Method::Energy => "energy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Output-based methods read classifier logits instead of embeddings.
    pub fn needs_logits(self) -> bool {
        matches!(self, Method::Msp | Method::Energy)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-sample detection scores, higher = more in-distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    method: Method,
    scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(method: Method, scores: Vec<f64>) -> Result<Self> {
        if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteValue { row, col: 0 });
        }
        Ok(Self { method, scores })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.scores
    }
}

impl AsRef<[f64]> for ScoreVector {
    fn as_ref(&self) -> &[f64] {
        &self.scores
    }
}

/// Evaluates `f` on every row of `m`. Each row writes its own slot, so the
/// parallel and sequential paths agree bit for bit.
pub(crate) fn map_rows<F>(m: &EmbeddingMatrix, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        m.as_slice().par_chunks_exact(m.dim()).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        m.iter_rows().map(f).collect()
    }
}

/// One row of a k ablation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub k: usize,
    pub auroc: f64,
    pub fpr95: f64,
}

/// Runs the kNN detector once per `k` against `reference` and evaluates it.
pub fn sweep_k(
    reference: &LabeledEmbeddings,
    id_test: &EmbeddingMatrix,
    ood_test: &EmbeddingMatrix,
    ks: &[usize],
    fpr_mode: FprMode,
) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = reference.rows();
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::InvalidK { k, max: n });
    }
    let mut index = KnnIndex::new(reference.embeddings(), ks[0])?;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        index.set_k(k)?;
        let id = score_knn(&index, id_test)?;
        let ood = score_knn(&index, ood_test)?;
        rows.push(SweepRow {
            k,
            auroc: auroc(id.as_slice(), ood.as_slice())?,
            fpr95: fpr95(id.as_slice(), ood.as_slice(), fpr_mode)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn clusters() -> (LabeledEmbeddings, EmbeddingMatrix, EmbeddingMatrix) {
        // Two ID classes near +x and +y, OOD near -x.
        let train = EmbeddingMatrix::from_rows(&[
            [1.0, 0.01],
            [1.0, -0.01],
            [1.0, 0.02],
            [0.01, 1.0],
            [-0.01, 1.0],
            [0.02, 1.0],
        ])
        .unwrap();
        let train = LabeledEmbeddings::new(train, vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let id = EmbeddingMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.015]]).unwrap();
        let ood = EmbeddingMatrix::from_rows(&[[-1.0, 0.0], [-1.0, -0.2], [-0.5, -1.0]]).unwrap();
        (train, id, ood)
    }

    #[test]
    fn separated_clusters_are_perfect_for_every_k() {
        let (train, id, ood) = clusters();
        let rows = sweep_k(&train, &id, &ood, &[1, 2, 3], FprMode::OodRecall).unwrap();
        for r in rows {
            assert_eq!(r.auroc, 1.0, "k = {}", r.k);
            assert_eq!(r.fpr95, 0.0);
        }
    }

    #[test]
    fn single_k_matches_direct_run() {
        let (train, id, ood) = clusters();
        let rows = sweep_k(&train, &id, &ood, &[1], FprMode::IdTpr).unwrap();
        let index = KnnIndex::new(train.embeddings(), 1).unwrap();
        let s_id = score_knn(&index, &id).unwrap();
        let s_ood = score_knn(&index, &ood).unwrap();
        assert_eq!(
            rows[0].auroc,
            auroc(s_id.as_slice(), s_ood.as_slice()).unwrap()
        );
        assert_eq!(
            rows[0].fpr95,
            fpr95(s_id.as_slice(), s_ood.as_slice(), FprMode::IdTpr).unwrap()
        );
    }

    #[test]
    fn k_beyond_reference_is_rejected() {
        let (train, id, ood) = clusters();
        assert_eq!(
            sweep_k(&train, &id, &ood, &[1, 7], FprMode::OodRecall),
            Err(Error::InvalidK { k: 7, max: 6 })
        );
        assert_eq!(
            sweep_k(&train, &id, &ood, &[], FprMode::OodRecall),
            Err(Error::EmptyInput)
        );
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_name(m.name()), Some(m));
        }
        assert_eq!(Method::from_name("cosine"), None);
    }
}
