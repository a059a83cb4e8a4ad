//! Threshold-free detection metrics over ID/OOD score vectors.
//!
//! Inputs are scores oriented "higher = in-distribution". Following the usual
//! OOD protocol the detection statistic is `-S` and OOD is the positive class
//! unless a function says otherwise.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::detector::{calibrate_threshold, Method, ScoreVector};
use crate::error::{Error, Result};

/// Recall level used by FPR95.
pub const RECALL_LEVEL: f64 = 0.95;

/// Which population is held at 95% recall when computing FPR95.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FprMode {
    /// Threshold keeps 95% of ID samples; report the share of OOD accepted.
    IdTpr,
    /// Threshold detects 95% of OOD samples; report the share of ID flagged.
    #[default]
    OodRecall,
}

impl FprMode {
    pub fn name(self) -> &'static str {
        match self {
            FprMode::IdTpr => "id-tpr",
            FprMode::OodRecall => "ood-recall",
        }
    }
}

impl fmt::Display for FprMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FprMode {
    type Err = &'static str;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "id-tpr" => Ok(FprMode::IdTpr),
            "ood-recall" => Ok(FprMode::OodRecall),
            _ => Err("expected `id-tpr` or `ood-recall`"),
        }
    }
}

/// Positive class for precision-recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positive {
    /// ID positive, ranked by `S`.
    In,
    /// OOD positive, ranked by `-S`.
    Out,
}

fn non_empty(id: &[f64], ood: &[f64]) -> Result<()> {
    if id.is_empty() || ood.is_empty() {
        Err(Error::EmptyScores)
    } else {
        Ok(())
    }
}

/// Score groups in ascending order as `(score, id_count, ood_count)`.
fn tie_groups(id: &[f64], ood: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut all: Vec<(f64, bool)> = id
        .iter()
        .map(|&s| (s, false))
        .chain(ood.iter().map(|&s| (s, true)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for (s, is_ood) in all {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if is_ood {
                    g.2 += 1
                } else {
                    g.1 += 1
                }
            }
            _ => groups.push(if is_ood { (s, 0, 1) } else { (s, 1, 0) }),
        }
    }
    groups
}

/// Probability that an OOD sample gets a higher detection statistic than an
/// ID sample, ties counting one half (Mann-Whitney U / (n_id · n_ood)).
///
/// Computed so that `auroc(a, b) + auroc(b, a) == 1.0` holds exactly.
pub fn auroc(id: &[f64], ood: &[f64]) -> Result<f64> {
    non_empty(id, ood)?;
    let (mut wins, mut losses, mut ties) = (0u128, 0u128, 0u128);
    let (mut ood_below, mut id_below) = (0u128, 0u128);
    for (_, n_id, n_ood) in tie_groups(id, ood) {
        let (n_id, n_ood) = (n_id as u128, n_ood as u128);
        wins += n_id * ood_below;
        losses += n_ood * id_below;
        ties += n_id * n_ood;
        ood_below += n_ood;
        id_below += n_id;
    }
    let p = 2 * wins + ties;
    let q = 2 * losses + ties;
    let total = (p + q) as f64;
    Ok(if p >= q {
        1.0 - q as f64 / total
    } else {
        p as f64 / total
    })
}

/// Non-interpolated average precision, `Σ (R_t - R_{t-1}) · P_t` over the
/// distinct thresholds in decreasing order.
pub fn aupr(id: &[f64], ood: &[f64], positive: Positive) -> Result<f64> {
    non_empty(id, ood)?;
    let groups = tie_groups(id, ood);
    type Pick = fn(&(f64, u64, u64)) -> (u64, u64);
    let (n_pos, pick): (u64, Pick) = match positive {
        // Ascending S == descending -S: walk groups in stored order.
        Positive::Out => (ood.len() as u64, |g| (g.2, g.1)),
        Positive::In => (id.len() as u64, |g| (g.1, g.2)),
    };
    let ordered: Vec<(u64, u64)> = match positive {
        Positive::Out => groups.iter().map(pick).collect(),
        Positive::In => groups.iter().rev().map(pick).collect(),
    };
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    for (pos, neg) in ordered {
        tp += pos;
        fp += neg;
        if pos > 0 {
            ap += (pos as f64 / n_pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

/// False positive rate when one population is held at 95% recall.
pub fn fpr95(id: &[f64], ood: &[f64], mode: FprMode) -> Result<f64> {
    non_empty(id, ood)?;
    let hits = match mode {
        FprMode::IdTpr => {
            let lambda = calibrate_threshold(id, RECALL_LEVEL)?;
            ood.iter().filter(|&&s| s >= lambda).count()
        }
        FprMode::OodRecall => {
            let stat: Vec<f64> = ood.iter().map(|s| -s).collect();
            let t = calibrate_threshold(&stat, RECALL_LEVEL)?;
            id.iter().filter(|&&s| -s >= t).count()
        }
    };
    let denom = match mode {
        FprMode::IdTpr => ood.len(),
        FprMode::OodRecall => id.len(),
    };
    Ok(hits as f64 / denom as f64)
}

/// Settings for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalConfig {
    pub fpr_mode: FprMode,
    /// Share of ID scores kept above the reported threshold λ.
    pub target_id_tpr: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fpr_mode: FprMode::OodRecall,
            target_id_tpr: RECALL_LEVEL,
        }
    }
}

/// Metrics for one detector on one ID/OOD pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub method: Method,
    pub auroc: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
    pub fpr95: f64,
    pub fpr_mode: FprMode,
    pub lambda: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

pub fn evaluate(id: &ScoreVector, ood: &ScoreVector, config: &EvalConfig) -> Result<EvalReport> {
    let (a, b) = (id.as_slice(), ood.as_slice());
    non_empty(a, b)?;
    Ok(EvalReport {
        method: id.method(),
        auroc: auroc(a, b)?,
        aupr_in: aupr(a, b, Positive::In)?,
        aupr_out: aupr(a, b, Positive::Out)?,
        fpr95: fpr95(a, b, config.fpr_mode)?,
        fpr_mode: config.fpr_mode,
        lambda: calibrate_threshold(a, config.target_id_tpr)?,
        n_id: a.len(),
        n_ood: b.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    // Brute-force references, independent of the sorted implementations.

    fn auroc_pairs(id: &[f64], ood: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &i in id {
            for &o in ood {
                // detection statistic -S, OOD positive
                if -o > -i {
                    acc += 1.0;
                } else if o == i {
                    acc += 0.5;
                }
            }
        }
        acc / (id.len() * ood.len()) as f64
    }

    fn aupr_enumerate(id: &[f64], ood: &[f64], positive: Positive) -> f64 {
        let (pos, neg): (Vec<f64>, Vec<f64>) = match positive {
            Positive::In => (id.to_vec(), ood.to_vec()),
            Positive::Out => (
                ood.iter().map(|s| -s).collect(),
                id.iter().map(|s| -s).collect(),
            ),
        };
        let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut ap, mut prev_recall) = (0.0, 0.0);
        for t in thresholds {
            let tp = pos.iter().filter(|&&s| s >= t).count() as f64;
            let fp = neg.iter().filter(|&&s| s >= t).count() as f64;
            let recall = tp / pos.len() as f64;
            if tp > 0.0 {
                ap += (recall - prev_recall) * tp / (tp + fp);
            }
            prev_recall = recall;
        }
        ap
    }

    #[test]
    fn perfect_separation() {
        let id = [3.0, 4.0, 5.0];
        let ood = [-1.0, 0.0, 1.0, 2.0];
        assert_eq!(auroc(&id, &ood).unwrap(), 1.0);
        assert_eq!(aupr(&id, &ood, Positive::Out).unwrap(), 1.0);
        assert_eq!(aupr(&id, &ood, Positive::In).unwrap(), 1.0);
        assert_eq!(fpr95(&id, &ood, FprMode::IdTpr).unwrap(), 0.0);
        assert_eq!(fpr95(&id, &ood, FprMode::OodRecall).unwrap(), 0.0);
    }

    #[test]
    fn auroc_with_a_tie() {
        // Statistics (higher = OOD) {0.1, 0.4} vs {0.4, 0.9}; scores are their negation.
        let id = [-0.1, -0.4];
        let ood = [-0.4, -0.9];
        assert_eq!(auroc_pairs(&id, &ood), 0.875);
        assert_eq!(auroc(&id, &ood).unwrap(), 0.875);
        assert_eq!(auroc(&ood, &id).unwrap(), 0.125);
    }

    #[test]
    fn identical_scores_give_prevalence() {
        let id = [1.0; 3];
        let ood = [1.0; 5];
        assert_eq!(aupr(&id, &ood, Positive::Out).unwrap(), 5.0 / 8.0);
        assert_eq!(aupr(&id, &ood, Positive::In).unwrap(), 3.0 / 8.0);
        assert_eq!(auroc(&id, &ood).unwrap(), 0.5);
    }

    #[test]
    fn four_point_aupr_matches_enumeration() {
        let id = [0.9, 0.2];
        let ood = [0.5, 0.1];
        for p in [Positive::In, Positive::Out] {
            let got = aupr(&id, &ood, p).unwrap();
            assert!((got - aupr_enumerate(&id, &ood, p)).abs() < 1e-12);
        }
        // ID positive ranked 0.9, 0.5, 0.2, 0.1: AP = ½·1 + ½·⅔
        assert!((aupr(&id, &ood, Positive::In).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn same_multiset_fpr_near_ninety_five() {
        let s: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(fpr95(&s, &s, FprMode::IdTpr).unwrap(), 0.95);
        assert_eq!(fpr95(&s, &s, FprMode::OodRecall).unwrap(), 0.95);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(auroc(&[], &[1.0]), Err(Error::EmptyScores));
        assert_eq!(aupr(&[1.0], &[], Positive::In), Err(Error::EmptyScores));
        assert_eq!(fpr95(&[], &[], FprMode::IdTpr), Err(Error::EmptyScores));
    }

    #[test]
    fn report_bundle() {
        let id = ScoreVector::new(Method::Knn, vec![0.0, -0.1, -0.05]).unwrap();
        let ood = ScoreVector::new(Method::Knn, vec![-1.0, -1.2]).unwrap();
        let r = evaluate(&id, &ood, &EvalConfig::default()).unwrap();
        assert_eq!(
            (r.auroc, r.aupr_in, r.aupr_out, r.fpr95),
            (1.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(r.lambda, -0.1);
        assert_eq!((r.n_id, r.n_ood), (3, 2));
        assert_eq!(r.method, Method::Knn);

        let one_id = ScoreVector::new(Method::Maha, vec![2.0]).unwrap();
        let one_ood = ScoreVector::new(Method::Maha, vec![1.0]).unwrap();
        let r = evaluate(&one_id, &one_ood, &EvalConfig::default()).unwrap();
        assert_eq!((r.auroc, r.fpr95), (1.0, 0.0));
    }

    #[test]
    fn fpr_mode_parses() {
        assert_eq!("id-tpr".parse::<FprMode>(), Ok(FprMode::IdTpr));
        assert_eq!("ood-recall".parse::<FprMode>(), Ok(FprMode::OodRecall));
        assert!("both".parse::<FprMode>().is_err());
    }
}
