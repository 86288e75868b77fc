//! Clustering evaluation: accuracy via Hungarian matching, normalized mutual
//! information, and the centroid-distance metric.

pub mod hungarian;

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

pub use hungarian::{hungarian, matching_weight, Sense};

use crate::error::{Error, Result};
use crate::types::{euclidean_dist2, EmbeddingVector};

/// D x D count matrix W with `W[i][j] = |{n : pred_n = i, true_n = j}|`,
/// where D covers both label sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyMatrix {
    pub counts: Vec<Vec<u64>>,
    pub n: usize,
}

/// Map arbitrary labels to dense 0-based indices in first-appearance order.
pub fn dense_labels<T: Eq + Hash>(labels: &[T]) -> Vec<usize> {
    let mut seen: HashMap<&T, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(l).or_insert(next)
        })
        .collect()
}

/// Build the contingency matrix from dense 0-based label slices.
pub fn contingency(y_true: &[usize], y_pred: &[usize]) -> Result<ContingencyMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LabelLength {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let d_true = y_true.iter().max().unwrap() + 1;
    let d_pred = y_pred.iter().max().unwrap() + 1;
    let d = d_true.max(d_pred);
    let mut counts = vec![vec![0u64; d]; d];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[p][t] += 1;
    }
    Ok(ContingencyMatrix {
        counts,
        n: y_true.len(),
    })
}

fn entropy_from_marginals(marginals: &[u64], n: f64) -> f64 {
    marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization,
/// `MI / (0.5 (H(Y) + H(Yhat)))`, in natural log. Defined as 0 when both
/// partitions are single-cluster.
pub fn nmi(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let w = contingency(y_true, y_pred)?;
    let n = w.n as f64;
    let d = w.counts.len();
    let mut row_sums = vec![0u64; d];
    let mut col_sums = vec![0u64; d];
    for i in 0..d {
        for j in 0..d {
            row_sums[i] += w.counts[i][j];
            col_sums[j] += w.counts[i][j];
        }
    }
    let mut mi = 0.0;
    for i in 0..d {
        for j in 0..d {
            let c = w.counts[i][j];
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * ((n * c as f64) / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
            }
        }
    }
    let mi = mi.max(0.0);
    let h_true = entropy_from_marginals(&col_sums, n);
    let h_pred = entropy_from_marginals(&row_sums, n);
    let denom = 0.5 * (h_true + h_pred);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Clustering accuracy: the fraction of points matched under the best
/// one-to-one relabeling, found by maximum-weight matching on the
/// contingency matrix.
pub fn acc(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let w = contingency(y_true, y_pred)?;
    let weights: Vec<Vec<f64>> = w
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let matching = hungarian(&weights, Sense::Max)?;
    let matched: u64 = matching.iter().map(|&(i, j)| w.counts[i][j]).sum();
    Ok(matched as f64 / w.n as f64)
}

/// Average Euclidean distance between learned and reference centroids under
/// the minimum-cost one-to-one matching.
pub fn centroid_dist(learned: &[EmbeddingVector], truth: &[EmbeddingVector]) -> Result<f64> {
    if learned.len() != truth.len() {
        return Err(Error::CentroidCount {
            left: learned.len(),
            right: truth.len(),
        });
    }
    if learned.is_empty() {
        return Err(Error::EmptyInput("centroids"));
    }
    let k = learned.len();
    let mut dists = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            dists[i][j] = euclidean_dist2(&learned[i], &truth[j])?.sqrt();
        }
    }
    let matching = hungarian(&dists, Sense::Min)?;
    Ok(matching_weight(&dists, &matching) / k as f64)
}

/// Experimental alternative: align clusters to labels the way ACC does, then
/// average distances over that alignment instead of re-matching on geometry.
pub fn centroid_dist_label_aligned(
    learned: &[EmbeddingVector],
    truth: &[EmbeddingVector],
    y_true: &[usize],
    y_pred: &[usize],
) -> Result<f64> {
    let w = contingency(y_true, y_pred)?;
    let d = w.counts.len();
    if learned.len() != truth.len() || learned.len() != d {
        return Err(Error::CentroidCount {
            left: learned.len(),
            right: d,
        });
    }
    let weights: Vec<Vec<f64>> = w
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let matching = hungarian(&weights, Sense::Max)?;
    let mut total = 0.0;
    for &(pred, gold) in &matching {
        total += euclidean_dist2(&learned[pred], &truth[gold])?.sqrt();
    }
    Ok(total / d as f64)
}

/// The metrics record written per run. Field order is fixed so identical
/// runs serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub nmi: f64,
    pub dist: Option<f64>,
    pub seed: u64,
    pub config_digest: String,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
