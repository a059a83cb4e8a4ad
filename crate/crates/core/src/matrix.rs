//! Dense containers for embeddings, labels and logits.
//!
//! Values are held as `f64`. The on-disk format stores `f32`, so matrices
//! destined for disk should hold `f32`-representable values if an exact round
//! trip matters.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major `n x d` matrix of finite values, one embedding per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn check_dense(rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if data.len() != rows * cols {
        return Err(Error::ShapeMismatch {
            expected: rows * cols,
            found: data.len(),
        });
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            row: pos / cols,
            col: pos % cols,
        });
    }
    Ok(())
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dense(rows, cols, &data)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Applies `f` to every row, producing a matrix with `out_dim` columns.
    pub fn map_rows<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut data = alloc::vec![0.0; self.rows * out_dim];
        for (src, dst) in self.iter_rows().zip(data.chunks_exact_mut(out_dim.max(1))) {
            f(src, dst);
        }
        Self::new(self.rows, out_dim, data)
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }
}

/// Embeddings paired with class labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    embeddings: EmbeddingMatrix,
    labels: Vec<u32>,
    classes: u32,
}

impl LabeledEmbeddings {
    /// Validates that labels are in range and every class has at least two
    /// members.
    pub fn new(embeddings: EmbeddingMatrix, labels: Vec<u32>, classes: u32) -> Result<Self> {
        if labels.len() != embeddings.rows() {
            return Err(Error::LabelCountMismatch {
                rows: embeddings.rows(),
                found: labels.len(),
            });
        }
        if classes == 0 {
            return Err(Error::TooFewClasses {
                required: 1,
                found: 0,
            });
        }
        let mut counts = alloc::vec![0usize; classes as usize];
        for (row, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    classes,
                });
            }
            counts[label as usize] += 1;
        }
        if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::ClassTooSmall {
                class: class as u32,
                count,
            });
        }
        Ok(Self {
            embeddings,
            labels,
            classes,
        })
    }

    /// Like [`LabeledEmbeddings::new`] with the class count inferred as
    /// `max(label) + 1`.
    pub fn infer_classes(embeddings: EmbeddingMatrix, labels: Vec<u32>) -> Result<Self> {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self::new(embeddings, labels, classes)
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn rows(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.classes as usize];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn into_parts(self) -> (EmbeddingMatrix, Vec<u32>, u32) {
        (self.embeddings, self.labels, self.classes)
    }
}

/// Row-major `n x C` classifier logits, `C >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    rows: usize,
    classes: usize,
    data: Vec<f64>,
}

impl LogitMatrix {
    pub fn new(rows: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        check_dense(rows, classes, &data)?;
        if classes < 2 {
            return Err(Error::TooFewClasses {
                required: 2,
                found: classes as u32,
            });
        }
        Ok(Self {
            rows,
            classes,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = EmbeddingMatrix::from_rows(rows)?;
        let (rows, cols) = (m.rows(), m.dim());
        Self::new(rows, cols, m.into_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales `v` to unit Euclidean norm in place. Returns `false` for a zero vector.
pub(crate) fn normalize_in_place(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Rescales every row to unit Euclidean norm.
pub fn l2_normalize(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let mut data = m.data.clone();
    for (row, chunk) in data.chunks_exact_mut(m.cols).enumerate() {
        if !normalize_in_place(chunk) {
            return Err(Error::ZeroNormRow { row });
        }
    }
    Ok(EmbeddingMatrix {
        rows: m.rows,
        cols: m.cols,
        data,
    })
}
