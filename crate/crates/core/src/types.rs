//! Shared domain types and vector arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One unit of clustering: an identified piece of text with optional gold
/// label and timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Seconds since epoch; required for stream mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label: None,
            timestamp: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_timestamp(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    /// A document must have non-empty text after trimming.
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(())
    }
}

/// Fixed-dimension real vector; the geometric representation of documents,
/// sentences, and summaries. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Build a vector, rejecting empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding vector"));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit L2 norm. Zero vectors are left untouched.
    pub fn normalized(&self) -> EmbeddingVector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        EmbeddingVector {
            values: self.values.iter().map(|v| v / n).collect(),
        }
    }
}

/// Squared Euclidean distance without the dimension check; callers validate
/// shapes once up front.
pub(crate) fn dist2_unchecked(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Squared Euclidean distance between two vectors of equal dimension.
pub fn euclidean_dist2(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(dist2_unchecked(a, b))
}

/// Cosine similarity, clamped to [-1, 1] against rounding. Errors on
/// zero-norm input, where the similarity is undefined.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Coordinate-wise arithmetic mean. Accumulation runs in the order given, so
/// results are reproducible for a fixed input order.
pub fn mean_vector(points: &[&EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = points.first().ok_or(Error::EmptyInput("mean of no vectors"))?;
    let dim = first.dim();
    let mut sums = vec![0.0; dim];
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: p.dim(),
            });
        }
        for (s, v) in sums.iter_mut().zip(&p.values) {
            *s += v;
        }
    }
    let n = points.len() as f64;
    EmbeddingVector::new(sums.into_iter().map(|s| s / n).collect())
}

/// Extractive summarization method for NLP-based centroid updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlpMethod {
    TextRank,
    Centroid,
    Lsa,
}

impl NlpMethod {
    pub fn name(&self) -> &'static str {
        match self {
            NlpMethod::TextRank => "textrank",
            NlpMethod::Centroid => "centroid",
            NlpMethod::Lsa => "lsa",
        }
    }
}

/// How representative documents are drawn from a cluster for LLM prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Sequential D²-weighted sampling within the cluster.
    KMeansPP,
    /// Uniform without replacement.
    Random,
    /// The m closest to the cluster mean.
    NearestCentroid,
    /// The m farthest from the cluster mean.
    Farthest,
}

/// Selects how centroids are recomputed at summarization steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummarizerSpec {
    /// Plain mean update; degenerates to ordinary k-means.
    NumericMean,
    /// Extractive summary of q sentences, re-embedded.
    Nlp { method: NlpMethod, q: usize },
    /// LLM summary of at most m sampled documents, re-embedded.
    Llm {
        instruction: String,
        m: usize,
        sampling: SamplingStrategy,
    },
}

impl SummarizerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SummarizerSpec::NumericMean => Ok(()),
            SummarizerSpec::Nlp { q, .. } => {
                if *q == 0 {
                    Err(Error::EmptyInput("q must be >= 1"))
                } else {
                    Ok(())
                }
            }
            SummarizerSpec::Llm { m, .. } => {
                if *m == 0 {
                    Err(Error::EmptyInput("m must be >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Iteration schedule: `total_iters` centroid updates with a summarization
/// step every `summary_period` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub total_iters: usize,
    pub summary_period: usize,
}

impl Schedule {
    pub fn new(total_iters: usize, summary_period: usize) -> Result<Self> {
        if summary_period == 0 || summary_period > total_iters {
            return Err(Error::InvalidSchedule {
                period: summary_period,
                total: total_iters,
            });
        }
        Ok(Self {
            total_iters,
            summary_period,
        })
    }
}

/// The evolving output of the algorithms: assignments, centroids, counts,
/// and the latest textual summary per cluster (absent for numeric-only
/// clusters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub centroids: Vec<EmbeddingVector>,
    /// Cluster index per document index.
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
    pub summaries: Vec<Option<String>>,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Check the structural invariants: counts match assignments, all
    /// centroids share one dimension, assignments are in range.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::EmptyInput("cluster state with k = 0"));
        }
        let dim = self.centroids[0].dim();
        for c in &self.centroids {
            if c.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: c.dim(),
                });
            }
        }
        let mut counts = vec![0usize; k];
        for &a in &self.assignments {
            if a >= k {
                return Err(Error::AssignmentOutOfRange { cluster: a, k });
            }
            counts[a] += 1;
        }
        if counts != self.counts {
            return Err(Error::EmptyInput("counts inconsistent with assignments"));
        }
        if self.summaries.len() != k {
            return Err(Error::EmptyInput("summaries length != k"));
        }
        Ok(())
    }
}

/// How the initial centroids of a run were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    KMeansPlusPlus,
    WarmStart,
}

/// Everything recorded about one summarization event: which cluster at which
/// iteration, the produced text, and either the method descriptor or the
/// full prompt exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEvent {
    pub iteration: usize,
    pub cluster: usize,
    pub summary: String,
    /// The summarizer descriptor, e.g. "lsa(q=5)" or "llm".
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<crate::llm::PromptRecord>,
    /// Present when the summarizer fell back (to a numeric mean or a
    /// weighted sentence mean); holds the reason.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

/// Auditable trail of one clustering run: per-iteration objective values,
/// summary-step transcripts, and the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub init: InitKind,
    /// Requested iteration count T.
    pub nominal_iterations: usize,
    /// Iterations actually executed (differs from nominal only under early
    /// stopping).
    pub iterations_run: usize,
    /// Objective value after each executed iteration.
    pub objective_trace: Vec<f64>,
    pub summary_events: Vec<SummaryEvent>,
    /// Iterations whose centroid update re-seeded at least one empty cluster.
    pub repair_iterations: Vec<usize>,
    /// Free-form flags, e.g. sentence-pool caps or ranker degeneracies.
    pub notes: Vec<String>,
    pub final_state: ClusterState,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn dist2_identity_and_axes() {
        assert_eq!(euclidean_dist2(&ev(&[0.0, 0.0]), &ev(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(euclidean_dist2(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 2.0);
        assert_eq!(euclidean_dist2(&ev(&[3.0, 4.0]), &ev(&[0.0, 0.0])).unwrap(), 25.0);
    }

    #[test]
    fn dist2_dim_mismatch_names_both() {
        let err = euclidean_dist2(&ev(&[1.0]), &ev(&[1.0, 2.0])).unwrap_err();
        assert!(err.to_string().contains('1') && err.to_string().contains('2'));
    }

    #[test]
    fn cosine_basic() {
        assert_eq!(cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[-2.0, 0.0])).unwrap(), -1.0);
    }

    #[test]
    fn cosine_zero_norm_errors() {
        assert!(matches!(
            cosine_similarity(&ev(&[0.0, 0.0]), &ev(&[1.0, 0.0])),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn mean_vector_examples() {
        let single = [&ev(&[2.0, 2.0])];
        assert_eq!(mean_vector(&single).unwrap(), ev(&[2.0, 2.0]));
        let pair = [&ev(&[0.0, 0.0]), &ev(&[2.0, 4.0])];
        assert_eq!(mean_vector(&pair).unwrap(), ev(&[1.0, 2.0]));
        let multi = [&ev(&[1.0, 1.0]), &ev(&[1.0, 1.0]), &ev(&[4.0, 4.0])];
        assert_eq!(mean_vector(&multi).unwrap(), ev(&[2.0, 2.0]));
    }

    #[test]
    fn mean_vector_empty_errors() {
        assert!(mean_vector(&[]).is_err());
    }

    #[test]
    fn embedding_vector_rejects_non_finite() {
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(EmbeddingVector::new(vec![f64::INFINITY]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
    }

    #[test]
    fn schedule_bounds() {
        assert!(Schedule::new(120, 60).is_ok());
        assert!(Schedule::new(120, 0).is_err());
        assert!(Schedule::new(5, 7).is_err());
        assert!(Schedule::new(5, 5).is_ok());
    }

    proptest! {
        #[test]
        fn dist2_symmetric_and_zero_on_self(
            a in proptest::collection::vec(-100.0f64..100.0, 1..16),
            b in proptest::collection::vec(-100.0f64..100.0, 1..16),
        ) {
            let n = a.len().min(b.len());
            let va = ev(&a[..n]);
            let vb = ev(&b[..n]);
            let d_ab = euclidean_dist2(&va, &vb).unwrap();
            let d_ba = euclidean_dist2(&vb, &va).unwrap();
            prop_assert_eq!(d_ab, d_ba);
            prop_assert_eq!(euclidean_dist2(&va, &va).unwrap(), 0.0);
        }

        #[test]
        fn cosine_scale_invariant(
            a in proptest::collection::vec(-100.0f64..100.0, 1..16),
            s in 0.001f64..1000.0,
        ) {
            let va = ev(&a);
            prop_assume!(va.norm() > 1e-9);
            let scaled = ev(&a.iter().map(|v| v * s).collect::<Vec<_>>());
            let sim = cosine_similarity(&va, &scaled).unwrap();
            prop_assert!((sim - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mean_permutation_invariant(
            vs in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 4),
                1..8,
            ),
        ) {
            let vecs: Vec<EmbeddingVector> = vs.iter().map(|v| ev(v)).collect();
            let refs: Vec<&EmbeddingVector> = vecs.iter().collect();
            let mut rev: Vec<&EmbeddingVector> = refs.clone();
            rev.reverse();
            let m1 = mean_vector(&refs).unwrap();
            let m2 = mean_vector(&rev).unwrap();
            for (x, y) in m1.values().iter().zip(m2.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
