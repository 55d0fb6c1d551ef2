//! Distance-based one-class baselines. Both score every item by how far it
//! lies from the labeled positives; a score above the threshold marks the item
//! as non-interest (label 0).

use ndarray::{Array2, ArrayView1};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::Metrics;
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::seed;

const KMEANS_ITERATIONS: usize = 100;

fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_positives(x: &EmbeddingMatrix, positives: &[usize], k: usize) -> Result<()> {
    if positives.is_empty() {
        return Err(Error::Empty("labeled positives"));
    }
    if let Some(&bad) = positives.iter().find(|&&v| v >= x.n_items()) {
        return Err(Error::param(
            "labeled positives",
            format!("node {bad} out of range"),
        ));
    }
    if k < 1 || k > positives.len() {
        return Err(Error::param(
            "baseline k",
            format!("{k} is outside [1, {}]", positives.len()),
        ));
    }
    Ok(())
}

/// Distance from each item to its `k`-th nearest labeled positive (an item
/// that is itself a positive counts at distance 0).
pub fn knnd_scores(x: &EmbeddingMatrix, positives: &[usize], k: usize) -> Result<Vec<f64>> {
    check_positives(x, positives, k)?;
    Ok((0..x.n_items())
        .map(|u| {
            let mut d: Vec<f64> = positives
                .iter()
                .map(|&p| distance(x.row(u), x.row(p)))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect())
}

fn nearest(centroids: &Array2<f64>, row: ArrayView1<'_, f64>) -> (usize, f64) {
    centroids
        .rows()
        .into_iter()
        .map(|c| distance(row, c))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one centroid")
}

/// Distance from each item to the nearest of `k` centroids fitted to the
/// labeled positives by Lloyd iterations from `k` seeded distinct positives.
pub fn kmeans_scores(
    x: &EmbeddingMatrix,
    positives: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_positives(x, positives, k)?;
    let mut rng = seed::rng(seed);
    let mut starts: Vec<usize> = index::sample(&mut rng, positives.len(), k).into_vec();
    starts.sort_unstable();
    let mut centroids = Array2::zeros((k, x.dim()));
    for (mut c, &i) in centroids.rows_mut().into_iter().zip(&starts) {
        c.assign(&x.row(positives[i]));
    }
    let mut assignment = vec![usize::MAX; positives.len()];
    for _ in 0..KMEANS_ITERATIONS {
        let mut changed = false;
        for (a, &p) in assignment.iter_mut().zip(positives) {
            let (c, _) = nearest(&centroids, x.row(p));
            changed |= *a != c;
            *a = c;
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, x.dim()));
        let mut counts = vec![0usize; k];
        for (&a, &p) in assignment.iter().zip(positives) {
            sums.row_mut(a).scaled_add(1.0, &x.row(p));
            counts[a] += 1;
        }
        for (c, count) in counts.into_iter().enumerate() {
            // An emptied cluster keeps its previous centroid.
            if count > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / count as f64));
            }
        }
    }
    Ok((0..x.n_items())
        .map(|u| nearest(&centroids, x.row(u)).1)
        .collect())
}

fn threshold_labels(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s <= threshold)).collect()
}

/// KNND labels: 0 where the `k`-th-neighbor distance exceeds `threshold`.
pub fn baseline_knnd(
    x: &EmbeddingMatrix,
    positives: &[usize],
    k: usize,
    threshold: f64,
) -> Result<Vec<u8>> {
    Ok(threshold_labels(&knnd_scores(x, positives, k)?, threshold))
}

/// KMeans labels: 0 where the nearest-centroid distance exceeds `threshold`.
pub fn baseline_kmeans(
    x: &EmbeddingMatrix,
    positives: &[usize],
    k: usize,
    threshold: f64,
    seed: u64,
) -> Result<Vec<u8>> {
    Ok(threshold_labels(
        &kmeans_scores(x, positives, k, seed)?,
        threshold,
    ))
}

/// Anomaly thresholds `0.05·m` for `m = 1..=19`.
pub fn threshold_grid() -> Vec<f64> {
    (1..=19).map(|m| 0.05 * m as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub threshold: f64,
    pub metrics: Metrics,
}

/// Tries every threshold of [`threshold_grid`] on the scores of `nodes`,
/// rescaled to `[0, 1]` by their maximum, and keeps the best macro-F1
/// (earliest threshold on ties).
pub fn sweep_thresholds(scores: &[f64], nodes: &[usize], truth: &[u8]) -> Result<SweepResult> {
    if nodes.is_empty() {
        return Err(Error::Empty("evaluated set"));
    }
    let selected: Vec<f64> = nodes.iter().map(|&v| scores[v]).collect();
    let max = selected.iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = selected
        .iter()
        .map(|&s| if max > 0.0 { s / max } else { 0.0 })
        .collect();
    let y_true: Vec<u8> = nodes.iter().map(|&v| truth[v]).collect();
    let mut best: Option<SweepResult> = None;
    for threshold in threshold_grid() {
        let metrics = Metrics::score(&y_true, &threshold_labels(&scaled, threshold))?;
        if best.is_none_or(|b| metrics.macro_f1 > b.metrics.macro_f1) {
            best = Some(SweepResult { threshold, metrics });
        }
    }
    Ok(best.expect("the grid is not empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::make_synthetic;

    fn line(points: &[f64]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap())
            .unwrap()
    }

    #[test]
    fn knnd_hand_values() {
        let x = line(&[0.0, 1.0, 5.0, 10.0]);
        assert_eq!(
            knnd_scores(&x, &[0, 1], 1).unwrap(),
            vec![0.0, 0.0, 4.0, 9.0]
        );
        assert_eq!(
            knnd_scores(&x, &[0, 1], 2).unwrap(),
            vec![1.0, 1.0, 5.0, 10.0]
        );
        // A positive scores 0 with k = 1 and is labeled 1 for any positive threshold.
        assert_eq!(
            baseline_knnd(&x, &[0, 1], 1, 1e-9).unwrap(),
            vec![1, 1, 0, 0]
        );
        // Threshold 0 rejects everything with a positive score.
        assert_eq!(
            baseline_knnd(&x, &[0, 1], 2, 0.0).unwrap(),
            vec![0, 0, 0, 0]
        );
        assert!(knnd_scores(&x, &[0, 1], 3).is_err());
        assert!(knnd_scores(&x, &[], 1).is_err());
    }

    #[test]
    fn kmeans_single_centroid_is_the_mean() {
        let x = line(&[0.0, 2.0, 4.0, 10.0]);
        let scores = kmeans_scores(&x, &[0, 1, 2], 1, 3).unwrap();
        assert_eq!(scores, vec![2.0, 0.0, 2.0, 8.0]);
        assert_eq!(
            baseline_kmeans(&x, &[0, 1, 2], 1, 0.0, 3).unwrap(),
            vec![0, 1, 0, 0]
        );
        assert!(kmeans_scores(&x, &[0], 2, 0).is_err());
    }

    #[test]
    fn far_cluster_scores_higher() {
        let data = make_synthetic(40, 40, 4, 10.0, 4).unwrap();
        let positives: Vec<usize> = data.corpus.positives().into_iter().take(10).collect();
        for scores in [
            knnd_scores(&data.embeddings, &positives, 3).unwrap(),
            kmeans_scores(&data.embeddings, &positives, 2, 0).unwrap(),
        ] {
            let max_in = (0..80)
                .filter(|&v| data.truth[v] == 1)
                .map(|v| scores[v])
                .fold(0.0, f64::max);
            let min_out = (0..80)
                .filter(|&v| data.truth[v] == 0)
                .map(|v| scores[v])
                .fold(f64::INFINITY, f64::min);
            assert!(min_out > max_in, "{min_out} vs {max_in}");
        }
    }

    #[test]
    fn sweep_finds_a_separating_threshold() {
        let scores = [0.1, 0.2, 0.9, 1.0];
        let truth = [1, 1, 0, 0];
        let best = sweep_thresholds(&scores, &[0, 1, 2, 3], &truth).unwrap();
        assert_eq!(best.metrics.macro_f1, 1.0);
        assert!(best.threshold >= 0.2 && best.threshold < 0.9);
        assert_eq!(threshold_grid().len(), 19);
    }
}
