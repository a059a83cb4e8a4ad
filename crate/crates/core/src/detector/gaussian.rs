use alloc::vec::Vec;

use super::{map_rows, Method, ScoreVector};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::matrix::{EmbeddingMatrix, LabeledEmbeddings};

/// Default ridge, relative to the mean covariance eigenvalue.
pub const DEFAULT_EPS_SCALE: f64 = 1e-6;

/// Class-conditional Gaussians sharing one covariance.
///
/// The precision `(Σ + εI)⁻¹` is kept implicitly as the Cholesky factor of
/// `Σ + εI`; queries and centroids are whitened with a triangular solve.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    dim: usize,
    classes: usize,
    centroids: Vec<f64>,
    whitened_centroids: Vec<f64>,
    covariance: Vec<f64>,
    factor: Cholesky,
    shrinkage: f64,
}

impl GaussianModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn centroid(&self, class: usize) -> &[f64] {
        &self.centroids[class * self.dim..(class + 1) * self.dim]
    }

    /// Pooled maximum-likelihood covariance before shrinkage, row-major.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// The absolute ridge ε added to the diagonal.
    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// Explicit precision matrix, row-major and symmetric.
    pub fn precision(&self) -> Vec<f64> {
        self.factor.inverse()
    }

    /// Squared Mahalanobis distance from `x` to the nearest centroid.
    pub fn min_distance(&self, x: &[f64]) -> f64 {
        let mut w = x.to_vec();
        self.factor.forward_solve(&mut w);
        self.whitened_centroids
            .chunks_exact(self.dim)
            .map(|mu| {
                w.iter()
                    .zip(mu)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Fits per-class means and the pooled covariance
/// `Σ = (1/N) Σᵢ (xᵢ - μ_yᵢ)(xᵢ - μ_yᵢ)ᵀ`, then factors `Σ + εI` with
/// `ε = eps_scale · tr(Σ)/d`. When `Σ` is exactly zero, `ε = eps_scale`.
pub fn fit_gaussian(train: &LabeledEmbeddings, eps_scale: f64) -> Result<GaussianModel> {
    if !(eps_scale >= 0.0) || !eps_scale.is_finite() {
        return Err(Error::InvalidShrinkage(eps_scale));
    }
    let d = train.dim();
    let c = train.classes() as usize;
    let counts = train.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::ClassTooSmall {
            class: class as u32,
            count,
        });
    }

    let x = train.embeddings();
    let mut centroids = alloc::vec![0.0; c * d];
    for (row, &label) in x.iter_rows().zip(train.labels()) {
        let mu = &mut centroids[label as usize * d..(label as usize + 1) * d];
        mu.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    for (mu, &n) in centroids.chunks_exact_mut(d).zip(&counts) {
        mu.iter_mut().for_each(|m| *m /= n as f64);
    }

    let mut cov = alloc::vec![0.0; d * d];
    let mut dev = alloc::vec![0.0; d];
    for (row, &label) in x.iter_rows().zip(train.labels()) {
        let mu = &centroids[label as usize * d..(label as usize + 1) * d];
        dev.iter_mut()
            .zip(row.iter().zip(mu))
            .for_each(|(o, (v, m))| *o = v - m);
        for i in 0..d {
            let di = dev[i];
            for j in 0..=i {
                cov[i * d + j] += di * dev[j];
            }
        }
    }
    let n = x.rows() as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let shrinkage = if trace > 0.0 {
        eps_scale * trace / d as f64
    } else {
        eps_scale
    };
    let mut regularized = cov.clone();
    for i in 0..d {
        regularized[i * d + i] += shrinkage;
    }
    let factor = Cholesky::factor(&regularized, d).ok_or(Error::SingularCovariance)?;

    let mut whitened_centroids = centroids.clone();
    for mu in whitened_centroids.chunks_exact_mut(d) {
        factor.forward_solve(mu);
    }

    Ok(GaussianModel {
        dim: d,
        classes: c,
        centroids,
        whitened_centroids,
        covariance: cov,
        factor,
        shrinkage,
    })
}

/// `S(x) = -min_c (x - μ_c)ᵀ (Σ + εI)⁻¹ (x - μ_c)`.
pub fn score_maha(model: &GaussianModel, queries: &EmbeddingMatrix) -> Result<ScoreVector> {
    if queries.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            found: queries.dim(),
        });
    }
    let scores = map_rows(queries, |x| 0.0 - model.min_distance(x));
    ScoreVector::new(Method::Maha, scores)
}
