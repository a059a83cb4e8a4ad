use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{Method, ScoreVector};
use crate::error::{Error, Result};
use crate::matrix::{l2_normalize, EmbeddingMatrix};

pub const DEFAULT_K: usize = 1;

// Queries sharing one pass over the reference rows.
const QUERY_BLOCK: usize = 16;

/// Exact brute-force index over L2-normalized reference embeddings.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    reference: EmbeddingMatrix,
    k: usize,
}

impl KnnIndex {
    /// Normalizes `reference` and checks `1 <= k <= n`.
    pub fn new(reference: &EmbeddingMatrix, k: usize) -> Result<Self> {
        let reference = l2_normalize(reference)?;
        let mut index = Self { reference, k: 1 };
        index.set_k(k)?;
        Ok(index)
    }

    pub fn set_k(&mut self, k: usize) -> Result<()> {
        let n = self.reference.rows();
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, max: n });
        }
        self.k = k;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    pub fn reference(&self) -> &EmbeddingMatrix {
        &self.reference
    }

    /// Scores one block of already normalized query rows into `out`.
    fn score_block(&self, queries: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let n = self.reference.rows();
        let nq = out.len();
        let mut dist: Vec<(f64, usize)> = alloc::vec![(0.0, 0); nq * n];
        for (j, r) in self.reference.iter_rows().enumerate() {
            for (qi, q) in queries.chunks_exact(d).enumerate() {
                let s: f64 = q.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
                dist[qi * n + j] = (s, j);
            }
        }
        for (qi, slot) in out.iter_mut().enumerate() {
            let row = &mut dist[qi * n..(qi + 1) * n];
            let (_, kth, _) = row.select_nth_unstable_by(self.k - 1, by_distance_then_index);
            *slot = 0.0 - libm::sqrt(kth.0);
        }
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// `S(x) = -‖z - z_k‖₂` where `z` is the normalized query and `z_k` its k-th
/// nearest normalized reference row (ties go to the lower row index).
pub fn score_knn(index: &KnnIndex, queries: &EmbeddingMatrix) -> Result<ScoreVector> {
    if queries.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            found: queries.dim(),
        });
    }
    let queries = l2_normalize(queries)?;
    let d = queries.dim();
    let mut scores = alloc::vec![0.0; queries.rows()];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        queries
            .as_slice()
            .par_chunks(QUERY_BLOCK * d)
            .zip(scores.par_chunks_mut(QUERY_BLOCK))
            .for_each(|(q, out)| index.score_block(q, out));
    }
    #[cfg(not(feature = "parallel"))]
    queries
        .as_slice()
        .chunks(QUERY_BLOCK * d)
        .zip(scores.chunks_mut(QUERY_BLOCK))
        .for_each(|(q, out)| index.score_block(q, out));
    ScoreVector::new(Method::Knn, scores)
}
