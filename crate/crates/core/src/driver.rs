//! The summary-step k-means loop: ordinary Lloyd iterations with centroids
//! periodically replaced by re-embedded cluster summaries.

use crate::error::{Error, Result};
use crate::kmeans::{
    assign, kmeanspp_init, members_by_cluster, objective, repair_empty_clusters,
    update_numeric_centroids, RngState,
};
use crate::llm::PromptRecord;
use crate::types::{
    mean_vector, ClusterState, Document, EmbeddingVector, InitKind, RunReport, Schedule,
    SummaryEvent,
};

/// A cluster's membership handed to a summarizer: parallel documents and
/// embeddings plus the numeric mean, which doubles as the fallback centroid.
pub struct ClusterMembers<'a> {
    pub cluster: usize,
    /// Global document indices, ascending.
    pub doc_indices: Vec<usize>,
    pub docs: Vec<&'a Document>,
    pub embeddings: Vec<&'a EmbeddingVector>,
    pub mean: EmbeddingVector,
}

impl<'a> ClusterMembers<'a> {
    pub fn gather(
        cluster: usize,
        indices: &[usize],
        docs: &'a [Document],
        embeddings: &'a [EmbeddingVector],
    ) -> Result<Self> {
        let member_docs: Vec<&Document> = indices.iter().map(|&i| &docs[i]).collect();
        let member_embeddings: Vec<&EmbeddingVector> =
            indices.iter().map(|&i| &embeddings[i]).collect();
        let mean = mean_vector(&member_embeddings)?;
        Ok(Self {
            cluster,
            doc_indices: indices.to_vec(),
            docs: member_docs,
            embeddings: member_embeddings,
            mean,
        })
    }
}

/// What a summarizer produced for one cluster.
pub struct SummaryOutcome {
    pub centroid: EmbeddingVector,
    pub summary: String,
    pub prompt: Option<PromptRecord>,
    /// Set when the summarizer degraded (numeric mean or weighted sentence
    /// mean); holds the reason.
    pub fallback: Option<String>,
    pub notes: Vec<String>,
}

/// Computes a cluster's replacement centroid at a summarization step.
pub trait CentroidSummarizer {
    /// Short descriptor recorded in summary events, e.g. "lsa(q=5)".
    fn describe(&self) -> String;

    fn summarize(&self, cluster: &ClusterMembers<'_>, rng: &mut RngState) -> Result<SummaryOutcome>;
}

/// Centroid policy for summarization steps.
pub enum SummaryStrategy<'a> {
    /// Plain mean update at every iteration; degenerates to ordinary
    /// k-means.
    NumericMean,
    Textual(&'a dyn CentroidSummarizer),
}

/// Test stub that goes through the summarization machinery but returns the
/// cluster's numeric mean as the "summary embedding". A run with this
/// summarizer must match plain k-means exactly.
pub struct MeanEchoSummarizer;

impl CentroidSummarizer for MeanEchoSummarizer {
    fn describe(&self) -> String {
        "mean-echo".to_string()
    }

    fn summarize(&self, cluster: &ClusterMembers<'_>, _rng: &mut RngState) -> Result<SummaryOutcome> {
        Ok(SummaryOutcome {
            centroid: cluster.mean.clone(),
            summary: String::new(),
            prompt: None,
            fallback: None,
            notes: Vec::new(),
        })
    }
}

/// Number of summarization steps a schedule fires: floor(T / l).
pub fn count_summary_steps(schedule: Schedule) -> usize {
    schedule.total_iters / schedule.summary_period
}

/// Run k-means for exactly `schedule.total_iters` iterations, replacing the
/// mean update with a summarization step whenever the iteration index is a
/// multiple of `schedule.summary_period`. Iteration 1 seeds centroids with
/// k-means++ unless `initial_centroids` warm-starts the run. There is no
/// early stopping: the schedule must fire at fixed iterations.
///
/// A summarizer failure on a cluster falls back to that cluster's numeric
/// mean and is flagged in the report; it never aborts the run.
pub fn run_summary_kmeans(
    docs: &[Document],
    embeddings: &[EmbeddingVector],
    k: usize,
    strategy: &SummaryStrategy<'_>,
    schedule: Schedule,
    rng: &mut RngState,
    initial_centroids: Option<Vec<EmbeddingVector>>,
) -> Result<(ClusterState, RunReport)> {
    if docs.len() != embeddings.len() {
        return Err(Error::LabelLength {
            left: docs.len(),
            right: embeddings.len(),
        });
    }
    if docs.is_empty() {
        return Err(Error::EmptyInput("documents"));
    }
    if let Some(init) = &initial_centroids {
        if init.len() != k {
            return Err(Error::CentroidCount {
                left: init.len(),
                right: k,
            });
        }
    }

    let seed = rng.seed();
    let total = schedule.total_iters;
    let period = schedule.summary_period;

    let mut centroids: Vec<EmbeddingVector> = Vec::new();
    let mut assignments: Vec<usize> = Vec::new();
    let mut summaries: Vec<Option<String>> = vec![None; k];
    let mut trace = Vec::with_capacity(total);
    let mut events: Vec<SummaryEvent> = Vec::new();
    let mut repair_iterations = Vec::new();
    let mut notes = Vec::new();
    let mut init_kind = InitKind::KMeansPlusPlus;

    for t in 1..=total {
        if t == 1 {
            centroids = match initial_centroids.clone() {
                Some(init) => {
                    init_kind = InitKind::WarmStart;
                    init
                }
                None => kmeanspp_init(embeddings, k, rng)?,
            };
        } else if t % period == 0 && matches!(strategy, SummaryStrategy::Textual(_)) {
            let summarizer = match strategy {
                SummaryStrategy::Textual(s) => *s,
                SummaryStrategy::NumericMean => unreachable!(),
            };
            let members = members_by_cluster(&assignments, k);
            let counts: Vec<usize> = members.iter().map(|m| m.len()).collect();
            let previous = centroids.clone();
            for (j, member_indices) in members.iter().enumerate() {
                if member_indices.is_empty() {
                    continue;
                }
                let cluster = ClusterMembers::gather(j, member_indices, docs, embeddings)?;
                let event = match summarizer.summarize(&cluster, rng) {
                    Ok(outcome) => {
                        centroids[j] = outcome.centroid;
                        if !outcome.summary.is_empty() {
                            summaries[j] = Some(outcome.summary.clone());
                        }
                        for note in outcome.notes {
                            notes.push(format!("iter {t} cluster {j}: {note}"));
                        }
                        SummaryEvent {
                            iteration: t,
                            cluster: j,
                            summary: outcome.summary,
                            method: summarizer.describe(),
                            prompt: outcome.prompt,
                            fallback: outcome.fallback,
                        }
                    }
                    Err(e) => {
                        // Degrade to the numeric mean rather than aborting.
                        centroids[j] = cluster.mean.clone();
                        SummaryEvent {
                            iteration: t,
                            cluster: j,
                            summary: String::new(),
                            method: summarizer.describe(),
                            prompt: None,
                            fallback: Some(e.to_string()),
                        }
                    }
                };
                events.push(event);
            }
            let repaired =
                repair_empty_clusters(embeddings, &assignments, &previous, &mut centroids, &counts);
            if !repaired.is_empty() {
                repair_iterations.push(t);
            }
        } else {
            let mut counts = vec![0usize; k];
            for &a in &assignments {
                counts[a] += 1;
            }
            centroids = update_numeric_centroids(embeddings, &assignments, k, &centroids)?;
            if counts.contains(&0) {
                repair_iterations.push(t);
            }
        }

        assignments = assign(embeddings, &centroids)?;
        trace.push(objective(embeddings, &assignments, &centroids)?);
    }

    let mut counts = vec![0usize; k];
    for &a in &assignments {
        counts[a] += 1;
    }
    let state = ClusterState {
        centroids,
        assignments,
        counts,
        summaries,
    };
    let report = RunReport {
        seed,
        init: init_kind,
        nominal_iterations: total,
        iterations_run: total,
        objective_trace: trace,
        summary_events: events,
        repair_iterations,
        notes,
        final_state: state.clone(),
    };
    Ok((state, report))
}
