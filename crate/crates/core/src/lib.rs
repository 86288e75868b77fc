//! Text clustering with summary-as-centroid updates.
//!
//! The core loop is ordinary k-means over document embeddings, except that
//! at scheduled iterations each cluster's centroid is replaced by the
//! embedding of a textual summary of its members — extractive (TextRank,
//! centroid similarity, LSA) or LLM-generated. Between those steps the
//! usual assignment and mean updates run unchanged, so a weak summary just
//! steers the run back toward a plain k-means optimum.
//!
//! The crate also ships a sequential mini-batch extension for streams,
//! interchangeable embedding backends (deterministic hashing, precomputed
//! file store, remote HTTP API), deterministic mock LLM clients, and the
//! usual clustering metrics (accuracy via Hungarian matching, NMI,
//! centroid distance).

pub mod driver;
pub mod embed;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod llm;
pub mod nlp;
pub mod stream;
pub mod types;

pub use driver::{
    count_summary_steps, run_summary_kmeans, CentroidSummarizer, ClusterMembers,
    MeanEchoSummarizer, SummaryOutcome, SummaryStrategy,
};
pub use embed::{build_provider, CachedProvider, EmbeddingProvider, EmbeddingProviderSpec};
pub use error::{Error, Result};
pub use kmeans::{
    assign, kmeanspp_init, lloyd_step, objective, run_kmeans, update_numeric_centroids, RngState,
};
pub use llm::{build_client, LlmClient, LlmClientSpec, PromptRecord};
pub use stream::{merge_centroids, run_stream, split_batches, MergeCounts, StreamState};
pub use types::{
    cosine_similarity, euclidean_dist2, mean_vector, ClusterState, Document, EmbeddingVector,
    InitKind, NlpMethod, RunReport, SamplingStrategy, Schedule, SummarizerSpec, SummaryEvent,
};
