//! Experiment configuration and its reproducibility digest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use summeans::llm::LlmClientSpec;
use summeans::stream::MergeCounts;
use summeans::types::{Schedule, SummarizerSpec};
use summeans::EmbeddingProviderSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Static,
    Stream,
}

/// Number of clusters: explicit, or resolved from the gold label count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    FromLabels,
    Explicit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub provider: EmbeddingProviderSpec,
    pub summarizer: SummarizerSpec,
    /// Optional cap on the per-cluster sentence pool for NLP summarizers.
    pub nlp_pool_cap: Option<usize>,
    /// Present only when the summarizer is LLM-backed.
    pub llm_client: Option<LlmClientSpec>,
    pub k: KChoice,
    pub schedule: Schedule,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub stream_target_batch: usize,
    pub merge_counts: MergeCounts,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Stable short digest tying every output artifact to the exact
    /// configuration that produced it. The output directory is excluded:
    /// where artifacts land does not change what they are.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let hash = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in hash.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            dataset_path: PathBuf::from("corpus.jsonl"),
            provider: EmbeddingProviderSpec::TestHash {
                dim: 32,
                normalize: true,
            },
            summarizer: SummarizerSpec::NumericMean,
            nlp_pool_cap: None,
            llm_client: None,
            k: KChoice::FromLabels,
            schedule: Schedule {
                total_iters: 120,
                summary_period: 60,
            },
            seeds: vec![0, 1, 2, 3, 4],
            mode: Mode::Static,
            stream_target_batch: 10_000,
            merge_counts: MergeCounts::Cumulative,
            output_dir: PathBuf::from("runs"),
        }
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = config();
        let b = config();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);

        let mut c = config();
        c.seeds = vec![9];
        assert_ne!(a.digest(), c.digest());

        let mut d = config();
        d.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), d.digest());
    }

    #[test]
    fn config_round_trips_through_json() {
        let a = config();
        let json = serde_json::to_string(&a).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(a, back);
    }
}
