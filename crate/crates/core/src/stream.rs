//! Sequential mini-batch clustering: run the summary-step loop per batch and
//! blend each batch's centroids into the running stream centroids with a
//! count-weighted rule.

use serde::{Deserialize, Serialize};

use crate::driver::{run_summary_kmeans, SummaryStrategy};
use crate::embed::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::kmeans::RngState;
use crate::types::{ClusterState, Document, EmbeddingVector, RunReport, Schedule};

/// Whether the merge weight's denominator uses all documents seen so far or
/// only the previous batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeCounts {
    Cumulative,
    PriorBatchOnly,
}

/// Running state of a stream run: blended centroids, per-cluster document
/// counts, and the per-batch reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    pub centroids: Vec<EmbeddingVector>,
    pub cumulative_counts: Vec<u64>,
    /// Counts from the most recently merged batch.
    pub prior_batch_counts: Vec<u64>,
    pub batch_reports: Vec<RunReport>,
}

impl StreamState {
    pub fn empty(k: usize) -> Self {
        Self {
            centroids: Vec::new(),
            cumulative_counts: vec![0; k],
            prior_batch_counts: vec![0; k],
            batch_reports: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.cumulative_counts.len()
    }

    /// Final assignments in original document order, as (document id,
    /// cluster) pairs gathered from the batch runs.
    pub fn assignments_by_doc<'a>(&self, batches: &'a [Vec<Document>]) -> Vec<(&'a str, usize)> {
        let mut out = Vec::new();
        for (report, batch) in self.batch_reports.iter().zip(batches) {
            for (doc, &cluster) in batch.iter().zip(&report.final_state.assignments) {
                out.push((doc.id.as_str(), cluster));
            }
        }
        out
    }
}

/// Resumable checkpoint written after each processed batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamCheckpoint {
    pub centroids: Vec<EmbeddingVector>,
    pub cumulative_counts: Vec<u64>,
    pub last_batch_index: usize,
    pub seed: u64,
}

impl StreamCheckpoint {
    pub fn from_state(state: &StreamState, last_batch_index: usize, seed: u64) -> Self {
        Self {
            centroids: state.centroids.clone(),
            cumulative_counts: state.cumulative_counts.clone(),
            last_batch_index,
            seed,
        }
    }
}

/// A batch failure; the state reached before the failing batch is kept so
/// callers can persist it.
#[derive(Debug, thiserror::Error)]
#[error("batch {batch_index} failed: {source}")]
pub struct StreamError {
    pub batch_index: usize,
    pub partial: Box<StreamState>,
    #[source]
    pub source: Error,
}

/// Split documents into `ceil(n / target)` contiguous batches in
/// chronological order (ties by id), sizes differing by at most one with
/// earlier batches taking the extra document.
pub fn split_batches(mut docs: Vec<Document>, target: usize) -> Result<Vec<Vec<Document>>> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("documents"));
    }
    if target == 0 {
        return Err(Error::EmptyInput("target batch size must be >= 1"));
    }
    for d in &docs {
        if d.timestamp.is_none() {
            return Err(Error::MissingTimestamp { id: d.id.clone() });
        }
    }
    docs.sort_by(|a, b| {
        a.timestamp
            .unwrap()
            .cmp(&b.timestamp.unwrap())
            .then_with(|| a.id.cmp(&b.id))
    });
    let n = docs.len();
    let b = n.div_ceil(target);
    let base = n / b;
    let extra = n % b;
    let mut batches = Vec::with_capacity(b);
    let mut rest = docs;
    for i in 0..b {
        let size = base + usize::from(i < extra);
        let tail = rest.split_off(size);
        batches.push(rest);
        rest = tail;
    }
    Ok(batches)
}

/// Blend a batch's centroids into the stream with the count-proportional
/// weight `eta = batch_count / (prior_count + batch_count)`; the first
/// non-empty merge copies the batch centroid outright and an empty batch
/// cluster leaves the stream centroid untouched.
pub fn merge_centroids(
    state: &StreamState,
    batch_state: &ClusterState,
    mode: MergeCounts,
) -> Result<StreamState> {
    let k = state.k();
    if batch_state.k() != k {
        return Err(Error::CentroidCount {
            left: batch_state.k(),
            right: k,
        });
    }
    if !state.centroids.is_empty() {
        let dim = state.centroids[0].dim();
        if batch_state.centroids[0].dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: batch_state.centroids[0].dim(),
            });
        }
    }

    let mut merged = state.clone();
    let fresh = merged.centroids.is_empty();
    if fresh {
        merged.centroids = batch_state.centroids.clone();
    }
    for j in 0..k {
        let batch_count = batch_state.counts[j] as u64;
        let prior = match mode {
            MergeCounts::Cumulative => state.cumulative_counts[j],
            MergeCounts::PriorBatchOnly => state.prior_batch_counts[j],
        };
        let eta = if batch_count == 0 {
            0.0
        } else if prior == 0 {
            1.0
        } else {
            batch_count as f64 / (prior + batch_count) as f64
        };
        if fresh || eta == 1.0 {
            merged.centroids[j] = batch_state.centroids[j].clone();
        } else if eta > 0.0 {
            let blended: Vec<f64> = merged.centroids[j]
                .values()
                .iter()
                .zip(batch_state.centroids[j].values())
                .map(|(old, new)| (1.0 - eta) * old + eta * new)
                .collect();
            merged.centroids[j] = EmbeddingVector::new(blended)?;
        }
        merged.cumulative_counts[j] = state.cumulative_counts[j] + batch_count;
        merged.prior_batch_counts[j] = batch_count;
    }
    Ok(merged)
}

/// Process batches in order: each batch runs the summary-step loop
/// warm-started from the current stream centroids (the first batch seeds
/// with k-means++ within that batch), then merges into the stream.
/// `on_batch` fires after every merge so callers can persist checkpoints.
pub fn run_stream(
    batches: &[Vec<Document>],
    k: usize,
    strategy: &SummaryStrategy<'_>,
    schedule: Schedule,
    provider: &dyn EmbeddingProvider,
    rng: &mut RngState,
    mode: MergeCounts,
    mut on_batch: Option<&mut dyn FnMut(usize, &StreamState)>,
) -> std::result::Result<StreamState, StreamError> {
    let mut state = StreamState::empty(k);
    if batches.is_empty() {
        return Err(StreamError {
            batch_index: 0,
            partial: Box::new(state),
            source: Error::EmptyInput("batches"),
        });
    }
    for (index, batch) in batches.iter().enumerate() {
        let mut step = || -> Result<StreamState> {
            let embeddings = provider.embed_documents(batch)?;
            let warm = if state.centroids.is_empty() {
                None
            } else {
                Some(state.centroids.clone())
            };
            let (batch_state, report) =
                run_summary_kmeans(batch, &embeddings, k, strategy, schedule, rng, warm)?;
            let mut merged = merge_centroids(&state, &batch_state, mode)?;
            merged.batch_reports.push(report);
            Ok(merged)
        };
        match step() {
            Ok(next) => {
                state = next;
                if let Some(cb) = on_batch.as_deref_mut() {
                    cb(index, &state);
                }
            }
            Err(source) => {
                return Err(StreamError {
                    batch_index: index,
                    partial: Box::new(state),
                    source,
                });
            }
        }
    }
    Ok(state)
}
