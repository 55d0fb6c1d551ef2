use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingMatrix, NewsItem};
use crate::error::{Error, Result};
use crate::seed;

/// Parameters of [`make_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_pos: 200,
            n_neg: 200,
            dim: 16,
            separation: 8.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn generate(&self) -> Result<SyntheticData> {
        make_synthetic(self.n_pos, self.n_neg, self.dim, self.separation, self.seed)
    }
}

/// A generated dataset: items `syn-00000…` with ground-truth labels, their
/// vectors, and the labels as a dense vector.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub embeddings: EmbeddingMatrix,
    pub truth: Vec<u8>,
}

/// Two unit-variance isotropic Gaussian clusters whose means lie
/// `separation` apart along the diagonal direction, in shuffled order.
pub fn make_synthetic(
    n_pos: usize,
    n_neg: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<SyntheticData> {
    if n_pos < 1 || n_neg < 1 {
        return Err(Error::param(
            "synthetic class sizes",
            "both classes need at least one item",
        ));
    }
    if dim < 1 {
        return Err(Error::param("synthetic.dim", "must be at least 1"));
    }
    if separation < 0.0 || !separation.is_finite() {
        return Err(Error::param(
            "synthetic.separation",
            format!("{separation} must be finite and nonnegative"),
        ));
    }
    let mut rng = seed::rng(seed);
    let mut truth: Vec<u8> = std::iter::repeat_n(1, n_pos)
        .chain(std::iter::repeat_n(0, n_neg))
        .collect();
    truth.shuffle(&mut rng);

    // Means at ±(separation/2)·u with u the unit diagonal.
    let offset = separation / 2.0 / (dim as f64).sqrt();
    let n = truth.len();
    let mut x = Array2::zeros((n, dim));
    for (mut row, &label) in x.rows_mut().into_iter().zip(&truth) {
        let center = if label == 1 { offset } else { -offset };
        for v in row.iter_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            *v = center + noise;
        }
    }
    let items = truth
        .iter()
        .enumerate()
        .map(|(i, &label)| NewsItem {
            id: format!("syn-{i:05}"),
            text: format!("synthetic item {i}"),
            label: Some(label),
        })
        .collect();
    Ok(SyntheticData {
        corpus: Corpus::new(items)?,
        embeddings: EmbeddingMatrix::new(x)?,
        truth,
    })
}
