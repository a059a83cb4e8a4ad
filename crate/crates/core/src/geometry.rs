//! Angular statistics of an embedding space: how spread the class centroids
//! are, how tight each class is around its centroid, and how far an OOD set
//! sits from the ID centroids compared with the ID test set.
//!
//! Every statistic works on L2-normalized embeddings, uses unit-length class
//! centroids, clamps cosines into `[-1, 1]` and reports the mean angle in
//! degrees.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, normalize_in_place, EmbeddingMatrix, LabeledEmbeddings};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeometryReport {
    /// `None` when there is a single class.
    pub dispersion_deg: Option<f64>,
    pub compactness_deg: f64,
    pub separability_deg: f64,
    pub classes: u32,
    pub n_id: usize,
    pub n_ood: usize,
}

impl GeometryReport {
    pub fn compute(
        train: &LabeledEmbeddings,
        id_test: &EmbeddingMatrix,
        ood_test: &EmbeddingMatrix,
    ) -> Result<Self> {
        let dispersion_deg = match dispersion(train) {
            Ok(v) => Some(v),
            Err(Error::TooFewClasses { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            dispersion_deg,
            compactness_deg: compactness(train)?,
            separability_deg: separability(train, id_test, ood_test)?,
            classes: train.classes(),
            n_id: id_test.rows(),
            n_ood: ood_test.rows(),
        })
    }
}

fn angle_deg(cos: f64) -> f64 {
    libm::acos(cos.clamp(-1.0, 1.0)).to_degrees()
}

fn unit_rows(m: &EmbeddingMatrix) -> Result<Vec<Vec<f64>>> {
    m.iter_rows()
        .enumerate()
        .map(|(row, r)| {
            let mut v = r.to_vec();
            if normalize_in_place(&mut v) {
                Ok(v)
            } else {
                Err(Error::ZeroNormRow { row })
            }
        })
        .collect()
}

/// Unit-length class centroids of the normalized training embeddings.
pub fn class_centroids(train: &LabeledEmbeddings) -> Result<Vec<Vec<f64>>> {
    let d = train.dim();
    let mut sums = alloc::vec![alloc::vec![0.0; d]; train.classes() as usize];
    for (z, &y) in unit_rows(train.embeddings())?.iter().zip(train.labels()) {
        sums[y as usize]
            .iter_mut()
            .zip(z)
            .for_each(|(s, v)| *s += v);
    }
    for (class, mu) in sums.iter_mut().enumerate() {
        if !normalize_in_place(mu) {
            return Err(Error::DegenerateCentroid {
                class: class as u32,
            });
        }
    }
    Ok(sums)
}

/// Mean pairwise angle between distinct class centroids.
pub fn dispersion(train: &LabeledEmbeddings) -> Result<f64> {
    let c = train.classes();
    if c < 2 {
        return Err(Error::TooFewClasses {
            required: 2,
            found: c,
        });
    }
    let mu = class_centroids(train)?;
    let mut total = 0.0;
    for i in 0..mu.len() {
        for j in 0..mu.len() {
            if i != j {
                total += angle_deg(dot(&mu[i], &mu[j]));
            }
        }
    }
    let pairs = (mu.len() * (mu.len() - 1)) as f64;
    Ok(total / pairs)
}

/// Mean angle between each training sample and its own class centroid.
pub fn compactness(train: &LabeledEmbeddings) -> Result<f64> {
    let mu = class_centroids(train)?;
    let z = unit_rows(train.embeddings())?;
    let total: f64 = z
        .iter()
        .zip(train.labels())
        .map(|(z, &y)| angle_deg(dot(z, &mu[y as usize])))
        .sum();
    Ok(total / z.len() as f64)
}

fn mean_nearest_angle(mu: &[Vec<f64>], m: &EmbeddingMatrix) -> Result<f64> {
    let z = unit_rows(m)?;
    let total: f64 = z
        .iter()
        .map(|z| {
            let best = mu
                .iter()
                .map(|c| dot(z, c))
                .fold(f64::NEG_INFINITY, f64::max);
            angle_deg(best)
        })
        .sum();
    Ok(total / z.len() as f64)
}

/// Mean nearest-centroid angle of the OOD set minus that of the ID test set.
/// Positive when OOD samples sit farther from every class centroid.
pub fn separability(
    train: &LabeledEmbeddings,
    id_test: &EmbeddingMatrix,
    ood_test: &EmbeddingMatrix,
) -> Result<f64> {
    let mu = class_centroids(train)?;
    Ok(mean_nearest_angle(&mu, ood_test)? - mean_nearest_angle(&mu, id_test)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labeled(rows: &[[f64; 2]], labels: &[u32]) -> LabeledEmbeddings {
        LabeledEmbeddings::infer_classes(EmbeddingMatrix::from_rows(rows).unwrap(), labels.to_vec())
            .unwrap()
    }

    #[test]
    fn orthogonal_centroids() {
        let t = labeled(
            &[[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]],
            &[0, 0, 1, 1],
        );
        assert!((dispersion(&t).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(compactness(&t).unwrap(), 0.0);
    }

    #[test]
    fn identical_centroids() {
        let t = labeled(
            &[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [0.5, 0.5]],
            &[0, 0, 1, 1],
        );
        assert!(dispersion(&t).unwrap().abs() < 1e-6);
    }

    #[test]
    fn antipodal_class_is_degenerate() {
        let t = labeled(
            &[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 2.0]],
            &[0, 0, 1, 1],
        );
        assert_eq!(
            compactness(&t).unwrap_err(),
            Error::DegenerateCentroid { class: 0 }
        );
        assert_eq!(
            dispersion(&t).unwrap_err(),
            Error::DegenerateCentroid { class: 0 }
        );
    }

    #[test]
    fn single_class_has_no_dispersion() {
        let t = labeled(&[[1.0, 0.0], [1.0, 0.1]], &[0, 0]);
        assert_eq!(
            dispersion(&t).unwrap_err(),
            Error::TooFewClasses {
                required: 2,
                found: 1
            }
        );
        let x = EmbeddingMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let o = EmbeddingMatrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let r = GeometryReport::compute(&t, &x, &o).unwrap();
        assert_eq!(r.dispersion_deg, None);
        assert!(r.separability_deg > 80.0);
    }

    #[test]
    fn separability_cases() {
        let t = labeled(
            &[[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]],
            &[0, 0, 1, 1],
        );
        let id = EmbeddingMatrix::from_rows(&[[1.0, 0.0], [0.0, 5.0]]).unwrap();
        assert_eq!(separability(&t, &id, &id).unwrap(), 0.0);
        let t3 = LabeledEmbeddings::infer_classes(
            EmbeddingMatrix::from_rows(&[
                [1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ])
            .unwrap(),
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let id = EmbeddingMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        let ood = EmbeddingMatrix::from_rows(&[[0.0, 0.0, 1.0], [0.0, 0.0, -4.0]]).unwrap();
        assert!((separability(&t3, &id, &ood).unwrap() - 90.0).abs() < 1e-12);
    }
}
