//! Slow reference implementations used only by tests. Nothing here calls the
//! code paths it checks: matrices are inverted explicitly, neighbours are found
//! by fully sorting, and ranking metrics are computed by pairwise counting or
//! by scanning every candidate threshold.
#![allow(dead_code)]

use nalgebra::DMatrix;
use oodkit_core::synth::CounterRng;
use oodkit_core::{EmbeddingMatrix, LabeledEmbeddings};

pub fn random_matrix(
    rng: &mut CounterRng,
    rows: usize,
    cols: usize,
    scale: f64,
) -> EmbeddingMatrix {
    let data = (0..rows * cols).map(|_| scale * rng.normal()).collect();
    EmbeddingMatrix::new(rows, cols, data).unwrap()
}

/// Balanced labels `0..classes` repeated.
pub fn cyclic_labels(n: usize, classes: u32) -> Vec<u32> {
    (0..n).map(|i| i as u32 % classes).collect()
}

/// `-min_c (x-μ_c)ᵀ (Σ + εI)⁻¹ (x-μ_c)` with an explicit dense inverse.
pub fn maha_dense(
    train: &LabeledEmbeddings,
    queries: &EmbeddingMatrix,
    eps_scale: f64,
) -> Vec<f64> {
    let d = train.dim();
    let c = train.classes() as usize;
    let x = train.embeddings();
    let mut mu = vec![DMatrix::<f64>::zeros(d, 1); c];
    let mut counts = vec![0.0; c];
    for i in 0..x.rows() {
        let y = train.labels()[i] as usize;
        mu[y] += DMatrix::from_row_slice(d, 1, x.row(i));
        counts[y] += 1.0;
    }
    for (m, n) in mu.iter_mut().zip(&counts) {
        *m /= *n;
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..x.rows() {
        let dev = DMatrix::from_row_slice(d, 1, x.row(i)) - &mu[train.labels()[i] as usize];
        cov += &dev * dev.transpose();
    }
    cov /= x.rows() as f64;
    let eps = eps_scale * cov.trace() / d as f64;
    let prec = (cov + DMatrix::identity(d, d) * eps)
        .try_inverse()
        .expect("invertible");
    (0..queries.rows())
        .map(|q| {
            let v = DMatrix::from_row_slice(d, 1, queries.row(q));
            let best = mu
                .iter()
                .map(|m| {
                    let dev = &v - m;
                    (dev.transpose() * &prec * &dev)[(0, 0)]
                })
                .fold(f64::INFINITY, f64::min);
            -best
        })
        .collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// k-th nearest normalized neighbour distance, found by sorting all distances.
pub fn knn_full_sort(reference: &EmbeddingMatrix, queries: &EmbeddingMatrix, k: usize) -> Vec<f64> {
    let refs: Vec<Vec<f64>> = reference.iter_rows().map(unit).collect();
    queries
        .iter_rows()
        .map(|q| {
            let q = unit(q);
            let mut all: Vec<(f64, usize)> = refs
                .iter()
                .enumerate()
                .map(|(j, r)| (q.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum(), j))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            0.0 - all[k - 1].0.sqrt()
        })
        .collect()
}

/// Pairwise Mann-Whitney count with OOD positive and statistic `-S`.
pub fn auroc_pairs(id: &[f64], ood: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &i in id {
        for &o in ood {
            if o < i {
                acc += 1.0;
            } else if o == i {
                acc += 0.5;
            }
        }
    }
    acc / (id.len() * ood.len()) as f64
}

/// Average precision by evaluating precision/recall at every distinct
/// threshold of the positive-class statistic.
pub fn aupr_enumerate(pos: &[f64], neg: &[f64]) -> f64 {
    let mut t: Vec<f64> = pos.iter().chain(neg).copied().collect();
    t.sort_by(|a, b| b.partial_cmp(a).unwrap());
    t.dedup();
    let (mut ap, mut prev) = (0.0, 0.0);
    for th in t {
        let tp = pos.iter().filter(|&&s| s >= th).count() as f64;
        let fp = neg.iter().filter(|&&s| s >= th).count() as f64;
        let recall = tp / pos.len() as f64;
        if tp > 0.0 {
            ap += (recall - prev) * tp / (tp + fp);
        }
        prev = recall;
    }
    ap
}

/// Largest candidate threshold keeping at least `rate` of `keep` at or above it.
fn scan_threshold(keep: &[f64], rate: f64) -> f64 {
    let n = keep.len() as f64;
    keep.iter()
        .copied()
        .filter(|&l| keep.iter().filter(|&&s| s >= l).count() as f64 / n >= rate)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// FPR at 95% ID true-positive rate, threshold found by scanning.
pub fn fpr95_id_tpr_scan(id: &[f64], ood: &[f64]) -> f64 {
    let l = scan_threshold(id, 0.95);
    ood.iter().filter(|&&s| s >= l).count() as f64 / ood.len() as f64
}

/// FPR at 95% OOD recall (statistic `-S`), threshold found by scanning.
pub fn fpr95_ood_recall_scan(id: &[f64], ood: &[f64]) -> f64 {
    let stat_ood: Vec<f64> = ood.iter().map(|s| -s).collect();
    let t = scan_threshold(&stat_ood, 0.95);
    id.iter().filter(|&&s| -s >= t).count() as f64 / id.len() as f64
}

/// Central finite differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Component-wise relative error with a small absolute floor in the denominator.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Random score sets with deliberate ties: values drawn from a small grid
/// part of the time.
pub fn tied_scores(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.uniform() < 0.4 {
                rng.below(7) as f64 * 0.5 - 1.5
            } else {
                rng.normal()
            }
        })
        .collect()
}
