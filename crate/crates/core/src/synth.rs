//! Seeded Gaussian-mixture embeddings and class rebalancing.
//!
//! # Random stream contract
//!
//! Output is a pure function of the mixture description and seed. Each stream is keyed by
//! `key = mix64(seed ^ mix64(stream + GOLDEN))`; its `i`-th draw (from 1) is
//! `mix64(key + i·GOLDEN)` with wrapping arithmetic, where `mix64` is the
//! SplitMix64 finalizer and `GOLDEN = 0x9E3779B97F4A7C15`. A uniform is
//! `((x >> 11) + 0.5) · 2⁻⁵³` and a standard normal uses one Box-Muller
//! branch, `sqrt(-2 ln u₁) · cos(2π u₂)`, consuming two draws. Component `j`
//! reads stream `2j` for training rows and `2j + 1` for test rows, row by row
//! and coordinate by coordinate. Sampled values are rounded to `f32`.
//! [`rebalance`] reads stream `u64::MAX`, two draws per output row (class,
//! then row within the class).

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::{EmbeddingMatrix, LabeledEmbeddings, LogitMatrix};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator; see the module docs for the exact stream layout.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix64(seed ^ mix64(stream.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Uniform integer in `0..n`, `n >= 1`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// What a mixture component contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ComponentLabel {
    Class(u32),
    Ood,
}

/// One isotropic Gaussian.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub mean: Vec<f64>,
    pub sigma: f64,
    /// Training rows for a class component, test rows for an OOD component.
    pub count: usize,
    pub label: ComponentLabel,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureSpec {
    pub dim: usize,
    pub components: Vec<Component>,
    /// ID test rows drawn from every class component.
    pub id_test_per_component: usize,
    pub seed: u64,
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: LabeledEmbeddings,
    pub id_test: EmbeddingMatrix,
    pub ood_test: EmbeddingMatrix,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dimension must be positive"));
        }
        if self.id_test_per_component == 0 {
            return Err(Error::InvalidSpec("id_test_per_component must be positive"));
        }
        for c in &self.components {
            if c.mean.len() != self.dim {
                return Err(Error::InvalidSpec("component mean length differs from dim"));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidSpec("component mean is not finite"));
            }
            if !(c.sigma > 0.0) || !c.sigma.is_finite() {
                return Err(Error::InvalidSpec("sigma must be positive and finite"));
            }
            if c.count == 0 {
                return Err(Error::InvalidSpec("component count must be positive"));
            }
        }
        if !self
            .components
            .iter()
            .any(|c| c.label == ComponentLabel::Ood)
        {
            return Err(Error::InvalidSpec("at least one OOD component is required"));
        }
        if !self
            .components
            .iter()
            .any(|c| matches!(c.label, ComponentLabel::Class(_)))
        {
            return Err(Error::InvalidSpec("at least one ID component is required"));
        }
        Ok(())
    }
}

fn sample_into(out: &mut Vec<f64>, c: &Component, rows: usize, rng: &mut CounterRng) {
    for _ in 0..rows {
        for &m in &c.mean {
            out.push((m + c.sigma * rng.normal()) as f32 as f64);
        }
    }
}

/// Draws training, ID test and OOD test matrices from `spec`.
pub fn generate(spec: &MixtureSpec) -> Result<SynthData> {
    spec.validate()?;
    let d = spec.dim;
    let (mut train, mut labels, mut id_test, mut ood_test) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (j, c) in spec.components.iter().enumerate() {
        let j = j as u64;
        let mut train_rng = CounterRng::new(spec.seed, 2 * j);
        let mut test_rng = CounterRng::new(spec.seed, 2 * j + 1);
        match c.label {
            ComponentLabel::Class(y) => {
                sample_into(&mut train, c, c.count, &mut train_rng);
                labels.extend(core::iter::repeat_n(y, c.count));
                sample_into(&mut id_test, c, spec.id_test_per_component, &mut test_rng);
            }
            ComponentLabel::Ood => sample_into(&mut ood_test, c, c.count, &mut test_rng),
        }
    }
    let train = EmbeddingMatrix::new(labels.len(), d, train)?;
    Ok(SynthData {
        train: LabeledEmbeddings::infer_classes(train, labels)?,
        id_test: EmbeddingMatrix::new(id_test.len() / d, d, id_test)?,
        ood_test: EmbeddingMatrix::new(ood_test.len() / d, d, ood_test)?,
    })
}

/// Named cluster layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Regime {
    /// All ID classes share one domain cluster; OOD is a separate cluster.
    OodPretrained,
    /// ID classes are spread out; OOD sits between neighbouring classes.
    OodFinetuned,
    /// OOD clusters sit right next to the ID class clusters.
    SameDomainOverlap,
}

impl Regime {
    pub const ALL: [Regime; 3] = [
        Regime::OodPretrained,
        Regime::OodFinetuned,
        Regime::SameDomainOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::OodPretrained => "ood-pretrained",
            Regime::OodFinetuned => "ood-finetuned",
            Regime::SameDomainOverlap => "same-domain-overlap",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = &'static str;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or("expected ood-pretrained, ood-finetuned or same-domain-overlap")
    }
}

/// Geometry scales, all in absolute units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeParams {
    pub sigma: f64,
    /// Distance between the ID domain center and the OOD center.
    pub domain_gap: f64,
    /// Pairwise distance between class centers in the fine-tuned layout.
    pub class_gap: f64,
    /// Offset of each class from the shared domain center.
    pub class_offset: f64,
    /// Distance between an ID class center and its OOD neighbour in the
    /// overlap layout.
    pub overlap_offset: f64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            domain_gap: 20.0,
            class_gap: 20.0,
            class_offset: 1.0,
            overlap_offset: 0.5,
        }
    }
}

fn axis(dim: usize, k: usize, scale: f64) -> Vec<f64> {
    let mut v = alloc::vec![0.0; dim];
    v[k] = scale;
    v
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Splits `total` rows as evenly as possible over `parts` components.
fn split(total: usize, parts: usize) -> impl Iterator<Item = usize> {
    (0..parts).map(move |i| total / parts + usize::from(i < total % parts))
}

/// Builds a mixture for `regime` with `classes` ID classes of `per_class`
/// training rows each. Every class also gets `max(1, per_class / 5)` ID test
/// rows and the OOD set has as many rows as the ID test set.
///
/// Axis 0 carries the ID domain direction, axis 1 the OOD direction and axes
/// `2..2 + classes` the per-class directions, so `dim >= classes + 2`.
pub fn preset(
    regime: Regime,
    params: &RegimeParams,
    classes: usize,
    per_class: usize,
    dim: usize,
    seed: u64,
) -> Result<MixtureSpec> {
    if classes < 2 {
        return Err(Error::InvalidSpec("presets need at least two classes"));
    }
    if per_class < 10 {
        return Err(Error::InvalidSpec(
            "presets need at least ten rows per class",
        ));
    }
    if dim < classes + 2 {
        return Err(Error::InvalidSpec("presets need dim >= classes + 2"));
    }
    let p = params;
    if [
        p.sigma,
        p.domain_gap,
        p.class_gap,
        p.class_offset,
        p.overlap_offset,
    ]
    .iter()
    .any(|v| !(*v > 0.0) || !v.is_finite())
    {
        return Err(Error::InvalidSpec("regime scales must be positive"));
    }
    let n_test = (per_class / 5).max(1);
    let n_ood = classes * n_test;
    let domain = axis(dim, 0, p.domain_gap);
    let shared_domain_class = |c: usize| add(&domain, &axis(dim, 2 + c, p.class_offset));
    let id = |c: usize, mean: Vec<f64>| Component {
        mean,
        sigma: p.sigma,
        count: per_class,
        label: ComponentLabel::Class(c as u32),
    };
    let ood = |mean: Vec<f64>, count: usize| Component {
        mean,
        sigma: p.sigma,
        count,
        label: ComponentLabel::Ood,
    };

    let mut components: Vec<Component> = Vec::new();
    match regime {
        Regime::OodPretrained => {
            components.extend((0..classes).map(|c| id(c, shared_domain_class(c))));
            // Rotated 60° away from the domain axis: chord length == domain_gap.
            let mut centre = axis(dim, 0, 0.5 * p.domain_gap);
            centre[1] = 0.5 * libm::sqrt(3.0) * p.domain_gap;
            components.push(ood(centre, n_ood));
        }
        Regime::OodFinetuned => {
            let r = p.class_gap / core::f64::consts::SQRT_2;
            let centres: Vec<Vec<f64>> = (0..classes).map(|c| axis(dim, 2 + c, r)).collect();
            components.extend(centres.iter().cloned().enumerate().map(|(c, m)| id(c, m)));
            let pairs = if classes == 2 { 1 } else { classes };
            for (i, count) in split(n_ood, pairs).enumerate() {
                let (a, b) = (&centres[i], &centres[(i + 1) % classes]);
                components.push(ood(
                    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect(),
                    count,
                ));
            }
        }
        Regime::SameDomainOverlap => {
            components.extend((0..classes).map(|c| id(c, shared_domain_class(c))));
            for (c, count) in split(n_ood, classes).enumerate() {
                let shift = axis(dim, 1, p.overlap_offset);
                components.push(ood(add(&shared_domain_class(c), &shift), count));
            }
        }
    }
    Ok(MixtureSpec {
        dim,
        components,
        id_test_per_component: n_test,
        seed,
    })
}

/// Logits of a nearest-class-mean head fitted on `train`:
/// `f_c(x) = -½ ‖x - μ_c‖²`. Gives output-based scores something to work on
/// for synthetic data.
pub fn nearest_centroid_logits(
    train: &LabeledEmbeddings,
    queries: &EmbeddingMatrix,
) -> Result<LogitMatrix> {
    let d = train.dim();
    if queries.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: queries.dim(),
        });
    }
    let c = train.classes() as usize;
    let mut means = alloc::vec![0.0; c * d];
    for (row, &y) in train.embeddings().iter_rows().zip(train.labels()) {
        let mu = &mut means[y as usize * d..(y as usize + 1) * d];
        mu.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    for (mu, n) in means.chunks_exact_mut(d).zip(train.class_counts()) {
        mu.iter_mut().for_each(|m| *m /= n as f64);
    }
    let mut logits = Vec::with_capacity(queries.rows() * c);
    for x in queries.iter_rows() {
        for mu in means.chunks_exact(d) {
            let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            logits.push(-0.5 * sq);
        }
    }
    LogitMatrix::new(queries.rows(), c, logits)
}

/// Default exponent for [`rebalance`].
pub const DEFAULT_REBALANCE_ALPHA: f64 = 0.5;

/// Sampling probability per class present in `labels`, `p ∝ q^alpha` where
/// `q` is the empirical class frequency. Returned in ascending label order.
pub fn class_probabilities(labels: &[u32], alpha: f64) -> Result<Vec<(u32, f64)>> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidExponent(alpha));
    }
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for y in sorted {
        match counts.last_mut() {
            Some((last, n)) if *last == y => *n += 1,
            _ => counts.push((y, 1)),
        }
    }
    let n = labels.len() as f64;
    let weights: Vec<f64> = counts
        .iter()
        .map(|&(_, c)| libm::pow(c as f64 / n, alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(counts
        .iter()
        .zip(weights)
        .map(|(&(y, _), w)| (y, w / total))
        .collect())
}

/// Draws `target_n` row indices with replacement: a class with probability
/// from [`class_probabilities`], then a row uniformly within it.
pub fn rebalance(labels: &[u32], alpha: f64, target_n: usize, seed: u64) -> Result<Vec<usize>> {
    let probs = class_probabilities(labels, alpha)?;
    if target_n == 0 {
        return Err(Error::EmptyInput);
    }
    let members: Vec<Vec<usize>> = probs
        .iter()
        .map(|&(y, _)| (0..labels.len()).filter(|&i| labels[i] == y).collect())
        .collect();
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &(_, p) in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut rng = CounterRng::new(seed, u64::MAX);
    Ok((0..target_n)
        .map(|_| {
            let u = rng.uniform() * acc;
            let class = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(probs.len() - 1);
            let rows = &members[class];
            rows[rng.below(rows.len())]
        })
        .collect())
}
