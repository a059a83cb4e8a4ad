//! Out-of-distribution detection over pre-computed embedding matrices.
//!
//! The crate is `no_std` (it needs `alloc`) and carries only the numerical
//! pieces: embedding containers, the Mahalanobis and k-nearest-neighbour
//! detectors, softmax/energy output scores, ranking metrics (AUROC, AUPR,
//! FPR95), embedding geometry statistics, the CE/SupCon reference losses and a
//! seeded Gaussian-mixture generator. File formats and the command line live
//! in the `oodkit` crate.
//!
//! Every score follows one orientation: higher means more in-distribution, and
//! a sample is flagged as in-distribution iff its score is at least the
//! threshold.
//!
//! # Features
//! * `std` - implements nothing extra by itself; required by `parallel`.
//! * `parallel` - scores query rows on the rayon thread pool. Results are
//!   bitwise identical to the sequential path.
//! * `serde` - derives `Serialize`/`Deserialize` for reports and configs.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod detector;
mod error;
pub mod geometry;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod objectives;
pub mod synth;

pub use detector::{
    calibrate_threshold, detect, fit_gaussian, score_energy, score_knn, score_maha, score_msp,
    sweep_k, Decision, GaussianModel, KnnIndex, Method, ScoreVector, SweepRow, DEFAULT_EPS_SCALE,
    DEFAULT_K, DEFAULT_TEMPERATURE,
};
pub use error::{Error, Result};
pub use geometry::{compactness, dispersion, separability, GeometryReport};
pub use matrix::{l2_normalize, EmbeddingMatrix, LabeledEmbeddings, LogitMatrix};
pub use metrics::{aupr, auroc, evaluate, fpr95, EvalConfig, EvalReport, FprMode, Positive};
