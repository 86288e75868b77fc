//! Experiment orchestration: embed the corpus once, run every seed, score
//! against gold labels, and write the output artifacts.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use summeans::driver::{run_summary_kmeans, CentroidSummarizer, SummaryStrategy};
use summeans::embed::{build_provider, CachedProvider, EmbeddingProvider};
use summeans::eval::{acc, centroid_dist, dense_labels, nmi, MetricsReport};
use summeans::llm::{build_client, LlmClient, LlmSummarizer};
use summeans::nlp::NlpSummarizer;
use summeans::stream::{run_stream, split_batches, StreamCheckpoint};
use summeans::types::{
    mean_vector, Document, EmbeddingVector, RunReport, SummarizerSpec, SummaryEvent,
};
use summeans::RngState;

use crate::config::{ExperimentConfig, KChoice, Mode};
use crate::corpus::{gold_labels, load_corpus};
use crate::drift;

/// Saved artifact of one seed's run; `eval` and `drift-report` consume it.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedRun {
    pub config_digest: String,
    pub seed: u64,
    pub mode: Mode,
    pub k: usize,
    pub assignments: Vec<DocAssignment>,
    /// Latest textual centroid per cluster, if any.
    pub summaries: Vec<Option<String>>,
    /// One report for static runs, one per batch for streams.
    pub reports: Vec<RunReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocAssignment {
    pub id: String,
    pub cluster: usize,
}

#[derive(Debug, Serialize)]
struct PromptLogRecord<'a> {
    batch: usize,
    #[serde(flatten)]
    event: &'a SummaryEvent,
}

pub struct SeedOutcome {
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub run_path: PathBuf,
    pub error: Option<String>,
}

pub struct ExperimentSummary {
    pub config_digest: String,
    pub k: usize,
    pub outcomes: Vec<SeedOutcome>,
}

impl ExperimentSummary {
    pub fn all_completed(&self) -> bool {
        self.outcomes.iter().all(|o| o.error.is_none())
    }
}

/// Mean and sample standard deviation, matching the "mean (std)" reporting
/// convention.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn resolve_k(config: &ExperimentConfig, labels: Option<&[String]>) -> Result<usize> {
    match config.k {
        KChoice::Explicit(k) if k >= 1 => Ok(k),
        KChoice::Explicit(k) => bail!("k must be >= 1, got {k}"),
        KChoice::FromLabels => {
            let labels =
                labels.context("k = from-labels requires a fully labeled corpus; pass --k N")?;
            Ok(labels.len())
        }
    }
}

fn build_summarizer<'a>(
    spec: &'a SummarizerSpec,
    pool_cap: Option<usize>,
    provider: &'a dyn EmbeddingProvider,
    client: Option<&'a dyn LlmClient>,
) -> Result<Option<Box<dyn CentroidSummarizer + 'a>>> {
    match spec {
        SummarizerSpec::NumericMean => Ok(None),
        SummarizerSpec::Nlp { method, q } => {
            let mut summarizer = NlpSummarizer::new(*method, *q, provider);
            summarizer.pool_cap = pool_cap;
            Ok(Some(Box::new(summarizer)))
        }
        SummarizerSpec::Llm {
            instruction,
            m,
            sampling,
        } => {
            let client = client.context("llm summarizer requires an llm client")?;
            Ok(Some(Box::new(LlmSummarizer::new(
                instruction.clone(),
                *m,
                *sampling,
                provider,
                client,
            ))))
        }
    }
}

/// Gold centroids: per-label means of the corpus embeddings, in label
/// first-appearance order.
fn gold_centroids(
    docs: &[Document],
    embeddings: &[EmbeddingVector],
    label_order: &[String],
) -> Vec<EmbeddingVector> {
    let index_of: HashMap<&str, usize> = label_order
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut members: Vec<Vec<&EmbeddingVector>> = vec![Vec::new(); label_order.len()];
    for (d, e) in docs.iter().zip(embeddings) {
        let label = d.label.as_ref().expect("labeled corpus");
        members[index_of[label.as_str()]].push(e);
    }
    members
        .iter()
        .map(|m| mean_vector(m).expect("non-empty label group"))
        .collect()
}

fn score_run(
    docs: &[Document],
    corpus_embeddings: &[EmbeddingVector],
    label_order: &[String],
    assignments: &[DocAssignment],
    centroids: &[EmbeddingVector],
    seed: u64,
    digest: &str,
) -> Result<MetricsReport> {
    let cluster_of: HashMap<&str, usize> = assignments
        .iter()
        .map(|a| (a.id.as_str(), a.cluster))
        .collect();
    let mut y_true = Vec::with_capacity(docs.len());
    let mut y_pred = Vec::with_capacity(docs.len());
    let gold: Vec<&String> = docs.iter().map(|d| d.label.as_ref().unwrap()).collect();
    let dense_gold = dense_labels(&gold);
    for (d, g) in docs.iter().zip(dense_gold) {
        let cluster = *cluster_of
            .get(d.id.as_str())
            .with_context(|| format!("document {} missing from assignments", d.id))?;
        y_true.push(g);
        y_pred.push(cluster);
    }
    let dist = if centroids.len() == label_order.len() {
        let gold_means = gold_centroids(docs, corpus_embeddings, label_order);
        Some(centroid_dist(centroids, &gold_means)?)
    } else {
        // Metric undefined when k differs from the gold label count.
        None
    };
    Ok(MetricsReport {
        acc: acc(&y_true, &y_pred)?,
        nmi: nmi(&y_true, &y_pred)?,
        dist,
        seed,
        config_digest: digest.to_string(),
    })
}

fn write_prompt_log(path: &PathBuf, reports: &[RunReport]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for (batch, report) in reports.iter().enumerate() {
        for event in &report.summary_events {
            let record = PromptLogRecord { batch, event };
            writeln!(file, "{}", serde_json::to_string(&record)?)?;
        }
    }
    Ok(())
}

/// Run every seed of the experiment. The corpus is embedded once through a
/// caching provider shared across seeds; per-seed failures are recorded and
/// do not stop the remaining seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let docs = load_corpus(&config.dataset_path)?;
    let provider = build_provider(&config.provider)?;
    run_experiment_with_provider(config, docs, provider.as_ref())
}

pub fn run_experiment_with_provider(
    config: &ExperimentConfig,
    docs: Vec<Document>,
    raw_provider: &dyn EmbeddingProvider,
) -> Result<ExperimentSummary> {
    config.summarizer.validate().map_err(anyhow::Error::from)?;
    let digest = config.digest();
    let labels = gold_labels(&docs);
    let k = resolve_k(config, labels.as_deref())?;
    std::fs::create_dir_all(&config.output_dir)?;

    let provider = CachedProvider::new(raw_provider);
    let client = config
        .llm_client
        .as_ref()
        .map(build_client)
        .transpose()
        .map_err(anyhow::Error::from)?;
    let summarizer = build_summarizer(
        &config.summarizer,
        config.nlp_pool_cap,
        &provider,
        client.as_deref(),
    )?;
    let strategy = match &summarizer {
        None => SummaryStrategy::NumericMean,
        Some(s) => SummaryStrategy::Textual(s.as_ref()),
    };

    // Embed the whole corpus up front, exactly once for all seeds.
    let corpus_embeddings = provider
        .embed_documents(&docs)
        .map_err(anyhow::Error::from)?;

    // Stream mode re-orders documents chronologically; score against the
    // batch-ordered document list.
    let batches = match config.mode {
        Mode::Static => None,
        Mode::Stream => Some(
            split_batches(docs.clone(), config.stream_target_batch)
                .map_err(anyhow::Error::from)?,
        ),
    };

    let mut outcomes = Vec::new();
    for &seed in &config.seeds {
        let run_path = config.output_dir.join(format!("report_seed{seed}.json"));
        let outcome = run_one_seed(
            config,
            &docs,
            &corpus_embeddings,
            batches.as_deref(),
            k,
            &strategy,
            &provider,
            labels.as_deref(),
            seed,
            &digest,
            &run_path,
        );
        match outcome {
            Ok(metrics) => outcomes.push(SeedOutcome {
                seed,
                metrics,
                run_path,
                error: None,
            }),
            Err(e) => outcomes.push(SeedOutcome {
                seed,
                metrics: None,
                run_path,
                error: Some(format!("{e:#}")),
            }),
        }
    }
    Ok(ExperimentSummary {
        config_digest: digest,
        k,
        outcomes,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one_seed(
    config: &ExperimentConfig,
    docs: &[Document],
    corpus_embeddings: &[EmbeddingVector],
    batches: Option<&[Vec<Document>]>,
    k: usize,
    strategy: &SummaryStrategy<'_>,
    provider: &dyn EmbeddingProvider,
    labels: Option<&[String]>,
    seed: u64,
    digest: &str,
    run_path: &PathBuf,
) -> Result<Option<MetricsReport>> {
    let mut rng = RngState::new(seed);
    let saved = match config.mode {
        Mode::Static => {
            let (state, report) = run_summary_kmeans(
                docs,
                corpus_embeddings,
                k,
                strategy,
                config.schedule,
                &mut rng,
                None,
            )?;
            let assignments = docs
                .iter()
                .zip(&state.assignments)
                .map(|(d, &cluster)| DocAssignment {
                    id: d.id.clone(),
                    cluster,
                })
                .collect();
            SavedRun {
                config_digest: digest.to_string(),
                seed,
                mode: Mode::Static,
                k,
                assignments,
                summaries: state.summaries.clone(),
                reports: vec![report],
            }
        }
        Mode::Stream => {
            let batches = batches.expect("stream mode pre-splits batches");
            let checkpoint_path = config.output_dir.join(format!("checkpoint_seed{seed}.json"));
            let mut checkpoint_error: Option<std::io::Error> = None;
            let mut on_batch = |index: usize, state: &summeans::StreamState| {
                let checkpoint = StreamCheckpoint::from_state(state, index, seed);
                match serde_json::to_string_pretty(&checkpoint) {
                    Ok(json) => {
                        if let Err(e) = std::fs::write(&checkpoint_path, json) {
                            checkpoint_error = Some(e);
                        }
                    }
                    Err(e) => checkpoint_error = Some(e.into()),
                }
            };
            let state = run_stream(
                batches,
                k,
                strategy,
                config.schedule,
                provider,
                &mut rng,
                config.merge_counts,
                Some(&mut on_batch),
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            if let Some(e) = checkpoint_error {
                return Err(e).context("writing stream checkpoint");
            }
            let assignments = state
                .assignments_by_doc(batches)
                .into_iter()
                .map(|(id, cluster)| DocAssignment {
                    id: id.to_string(),
                    cluster,
                })
                .collect();
            let summaries = state
                .batch_reports
                .last()
                .map(|r| r.final_state.summaries.clone())
                .unwrap_or_default();
            SavedRun {
                config_digest: digest.to_string(),
                seed,
                mode: Mode::Stream,
                k,
                assignments,
                summaries,
                reports: state.batch_reports,
            }
        }
    };

    std::fs::write(run_path, serde_json::to_string_pretty(&saved)?)?;
    write_prompt_log(
        &config.output_dir.join(format!("prompts_seed{seed}.jsonl")),
        &saved.reports,
    )?;
    std::fs::write(
        config.output_dir.join(format!("drift_seed{seed}.txt")),
        drift::render(&saved),
    )?;

    let metrics = match labels {
        Some(label_order) => {
            let centroids = saved
                .reports
                .last()
                .map(|r| r.final_state.centroids.clone())
                .unwrap_or_default();
            let report = score_run(
                docs,
                corpus_embeddings,
                label_order,
                &saved.assignments,
                &centroids,
                seed,
                digest,
            )?;
            std::fs::write(
                config.output_dir.join(format!("metrics_seed{seed}.json")),
                report.to_json().map_err(anyhow::Error::from)?,
            )?;
            Some(report)
        }
        None => None,
    };
    Ok(metrics)
}

/// Pretty-print per-seed metrics and the mean (std) aggregate.
pub fn print_summary(summary: &ExperimentSummary) {
    println!("config {} (k = {})", summary.config_digest, summary.k);
    for outcome in &summary.outcomes {
        match (&outcome.metrics, &outcome.error) {
            (Some(m), _) => {
                let dist = m
                    .dist
                    .map(|d| format!("{d:.4}"))
                    .unwrap_or_else(|| "n/a".to_string());
                println!(
                    "seed {:>3}: acc {:.4}  nmi {:.4}  dist {}",
                    outcome.seed, m.acc, m.nmi, dist
                );
            }
            (None, Some(e)) => println!("seed {:>3}: FAILED: {e}", outcome.seed),
            (None, None) => println!(
                "seed {:>3}: completed (unlabeled corpus, metrics omitted)",
                outcome.seed
            ),
        }
    }
    let accs: Vec<f64> = summary
        .outcomes
        .iter()
        .filter_map(|o| o.metrics.as_ref().map(|m| m.acc))
        .collect();
    if !accs.is_empty() {
        let nmis: Vec<f64> = summary
            .outcomes
            .iter()
            .filter_map(|o| o.metrics.as_ref().map(|m| m.nmi))
            .collect();
        let dists: Vec<f64> = summary
            .outcomes
            .iter()
            .filter_map(|o| o.metrics.as_ref().and_then(|m| m.dist))
            .collect();
        let (am, asd) = mean_std(&accs);
        let (nm, nsd) = mean_std(&nmis);
        println!("acc  {am:.4} ({asd:.4})");
        println!("nmi  {nm:.4} ({nsd:.4})");
        if !dists.is_empty() {
            let (dm, dsd) = mean_std(&dists);
            println!("dist {dm:.4} ({dsd:.4})");
        }
    }
}

/// Recompute metrics for a saved run against a (labeled) dataset.
pub fn evaluate_saved_run(run: &SavedRun, docs: &[Document]) -> Result<MetricsReport> {
    let cluster_of: HashMap<&str, usize> = run
        .assignments
        .iter()
        .map(|a| (a.id.as_str(), a.cluster))
        .collect();
    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    let gold: Vec<&String> = docs
        .iter()
        .map(|d| {
            d.label
                .as_ref()
                .with_context(|| format!("document {} is unlabeled", d.id))
        })
        .collect::<Result<_>>()?;
    let dense_gold = dense_labels(&gold);
    for (d, g) in docs.iter().zip(dense_gold) {
        let cluster = *cluster_of
            .get(d.id.as_str())
            .with_context(|| format!("document {} missing from saved run", d.id))?;
        y_true.push(g);
        y_pred.push(cluster);
    }
    Ok(MetricsReport {
        acc: acc(&y_true, &y_pred)?,
        nmi: nmi(&y_true, &y_pred)?,
        dist: None,
        seed: run.seed,
        config_digest: run.config_digest.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[1.0, 1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(s, 0.0);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-12);
        let (m, s) = mean_std(&[5.0]);
        assert_eq!(m, 5.0);
        assert_eq!(s, 0.0);
    }
}
