//! LLM-based centroid generation: representative sampling, prompt assembly,
//! client invocation, and re-embedding of the response.

use serde::{Deserialize, Serialize};

use crate::driver::{CentroidSummarizer, ClusterMembers, SummaryOutcome};
use crate::embed::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::kmeans::RngState;
use crate::nlp::split_sentences;
use crate::types::{dist2_unchecked, Document, EmbeddingVector, SamplingStrategy};

/// The summarization instruction used for banking-intent corpora such as
/// Bank77.
pub const BANK77_INSTRUCTION: &str =
    "The following is a cluster of online banking questions. Write a single question that represents the cluster concisely.";

/// Cap on documents included when prompting with the "full cluster".
pub const FULL_CLUSTER_CAP: usize = 50;

/// Env var holding the bearer token for the remote chat endpoint.
pub const LLM_API_KEY: &str = "LLM_API_KEY";

/// Default sample size for the few-shot prompt variant.
pub const DEFAULT_FEW_SHOT_M: usize = 10;

/// Configuration for a chat-completion backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmClientSpec {
    /// HTTP chat endpoint speaking the common `messages` wire format.
    RemoteChat {
        endpoint: String,
        model: String,
        temperature: f64,
        max_output_tokens: u32,
        timeout_secs: u64,
        retries: u32,
    },
    /// Offline deterministic stand-in; requires no network configuration.
    MockDeterministic { flavor: MockFlavor },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFlavor {
    /// Return the sampled document nearest the cluster mean.
    EchoMedoid,
    /// Concatenate the first sentence of each sampled document.
    ConcatFirstSentences,
}

/// One sampled document with its squared distance to the cluster mean;
/// deterministic mocks use the distances, remote clients only the text.
pub struct SampledDoc<'a> {
    pub doc: &'a Document,
    pub dist2_to_mean: f64,
}

/// Everything a client may look at for one summarization call.
pub struct SummaryRequest<'a> {
    pub instruction: &'a str,
    /// The fully rendered prompt; remote clients send exactly this.
    pub prompt: &'a str,
    pub sampled: &'a [SampledDoc<'a>],
}

/// A chat-completion backend. Implementations must be shareable across
/// threads and deterministic for deterministic inputs (mocks) or logged
/// verbatim (remote).
pub trait LlmClient: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &SummaryRequest<'_>) -> Result<String>;
}

/// Transcript of one LLM summarization call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub instruction: String,
    pub sampled_doc_ids: Vec<String>,
    pub rendered_prompt: String,
    pub response: String,
}

/// Draw `min(m, cluster size)` distinct member positions according to the
/// strategy. `embeddings` are the cluster members' vectors and `doc_indices`
/// their global indices; the returned values come from `doc_indices`, in
/// selection order.
pub fn sample_representatives(
    cluster_embeddings: &[&EmbeddingVector],
    cluster_doc_indices: &[usize],
    m: usize,
    strategy: SamplingStrategy,
    rng: &mut RngState,
) -> Vec<usize> {
    let n = cluster_embeddings.len();
    debug_assert_eq!(n, cluster_doc_indices.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let take = m.min(n);
    if take == n {
        // The min(m, |C|) rule: the whole cluster, in index order.
        return cluster_doc_indices.to_vec();
    }
    let positions: Vec<usize> = match strategy {
        SamplingStrategy::Random => {
            let mut remaining: Vec<usize> = (0..n).collect();
            let mut picked = Vec::with_capacity(take);
            for _ in 0..take {
                let at = rng.index(remaining.len());
                picked.push(remaining.swap_remove(at));
            }
            picked
        }
        SamplingStrategy::KMeansPP => {
            let mut picked = Vec::with_capacity(take);
            let first = rng.index(n);
            picked.push(first);
            let mut min_d2: Vec<f64> = (0..n)
                .map(|i| dist2_unchecked(cluster_embeddings[i], cluster_embeddings[first]))
                .collect();
            while picked.len() < take {
                let total: f64 = min_d2.iter().sum();
                let next = if total > 0.0 {
                    let mut r = rng.f64_below(total);
                    let mut pick = None;
                    for (i, &w) in min_d2.iter().enumerate() {
                        if w > 0.0 {
                            if r < w {
                                pick = Some(i);
                                break;
                            }
                            r -= w;
                        }
                    }
                    pick.unwrap_or_else(|| {
                        // Duplicates exhausted the mass; fall back to the
                        // lowest unpicked position.
                        (0..n).find(|i| !picked.contains(i)).expect("take < n")
                    })
                } else {
                    (0..n).find(|i| !picked.contains(i)).expect("take < n")
                };
                picked.push(next);
                for (i, d) in min_d2.iter_mut().enumerate() {
                    let d2 = dist2_unchecked(cluster_embeddings[i], cluster_embeddings[next]);
                    if d2 < *d {
                        *d = d2;
                    }
                }
            }
            picked
        }
        SamplingStrategy::NearestCentroid | SamplingStrategy::Farthest => {
            let refs: Vec<&EmbeddingVector> = cluster_embeddings.to_vec();
            let mean = crate::types::mean_vector(&refs).expect("non-empty cluster");
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                let da = dist2_unchecked(cluster_embeddings[a], &mean);
                let db = dist2_unchecked(cluster_embeddings[b], &mean);
                match strategy {
                    SamplingStrategy::NearestCentroid => da.total_cmp(&db).then(a.cmp(&b)),
                    _ => db.total_cmp(&da).then(a.cmp(&b)),
                }
            });
            order.truncate(take);
            order
        }
    };
    positions
        .into_iter()
        .map(|p| cluster_doc_indices[p])
        .collect()
}

/// Render the prompt: the instruction, a blank line, then the documents as
/// a numbered list in sampled order.
pub fn build_prompt(instruction: &str, docs: &[&Document]) -> String {
    let mut prompt = String::from(instruction);
    prompt.push_str("\n\n");
    let lines: Vec<String> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}", i + 1, d.text))
        .collect();
    prompt.push_str(&lines.join("\n"));
    prompt
}

/// Echoes the sampled document nearest to the cluster mean.
pub struct EchoMedoidClient;

impl LlmClient for EchoMedoidClient {
    fn name(&self) -> &str {
        "mock-echo-medoid"
    }

    fn complete(&self, request: &SummaryRequest<'_>) -> Result<String> {
        let best = request
            .sampled
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.dist2_to_mean.total_cmp(&b.dist2_to_mean).then(i.cmp(j)))
            .ok_or(Error::EmptyInput("sampled documents"))?;
        Ok(best.1.doc.text.clone())
    }
}

/// Concatenates the first sentence of every sampled document.
pub struct ConcatFirstSentencesClient;

impl LlmClient for ConcatFirstSentencesClient {
    fn name(&self) -> &str {
        "mock-concat-first"
    }

    fn complete(&self, request: &SummaryRequest<'_>) -> Result<String> {
        if request.sampled.is_empty() {
            return Err(Error::EmptyInput("sampled documents"));
        }
        let firsts: Vec<String> = request
            .sampled
            .iter()
            .filter_map(|s| split_sentences(&s.doc.text).into_iter().next())
            .collect();
        Ok(firsts.join(" "))
    }
}

/// Wrapper that counts completed calls; used for budget audits.
pub struct CountingClient<C> {
    inner: C,
    calls: std::sync::atomic::AtomicUsize,
}

impl<C: LlmClient> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            calls: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl<C: LlmClient> LlmClient for CountingClient<C> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &SummaryRequest<'_>) -> Result<String> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.complete(request)
    }
}

#[cfg(feature = "remote")]
pub use remote::RemoteChatClient;

#[cfg(feature = "remote")]
mod remote {
    use std::time::Duration;

    use serde::Deserialize;

    use super::*;

    /// HTTP chat-completion client with bounded retries.
    pub struct RemoteChatClient {
        endpoint: String,
        model: String,
        temperature: f64,
        max_output_tokens: u32,
        retries: u32,
        retry_base_ms: u64,
        api_key: Option<String>,
        client: reqwest::blocking::Client,
    }

    #[derive(serde::Serialize)]
    struct ChatRequest<'a> {
        model: &'a str,
        messages: Vec<ChatMessage<'a>>,
        temperature: f64,
        max_tokens: u32,
    }

    #[derive(serde::Serialize)]
    struct ChatMessage<'a> {
        role: &'static str,
        content: &'a str,
    }

    #[derive(Deserialize)]
    struct ChatResponse {
        choices: Vec<Choice>,
    }

    #[derive(Deserialize)]
    struct Choice {
        message: ResponseMessage,
    }

    #[derive(Deserialize)]
    struct ResponseMessage {
        content: String,
    }

    impl RemoteChatClient {
        pub fn new(
            endpoint: String,
            model: String,
            temperature: f64,
            max_output_tokens: u32,
            timeout_secs: u64,
            retries: u32,
        ) -> Result<Self> {
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(timeout_secs))
                .build()
                .map_err(|e| Error::LlmTransport {
                    attempts: 0,
                    reason: e.to_string(),
                })?;
            Ok(Self {
                endpoint,
                model,
                temperature,
                max_output_tokens,
                retries,
                retry_base_ms: 500,
                api_key: std::env::var(LLM_API_KEY).ok(),
                client,
            })
        }

        pub fn with_retry_base_ms(mut self, ms: u64) -> Self {
            self.retry_base_ms = ms;
            self
        }
    }

    impl LlmClient for RemoteChatClient {
        fn name(&self) -> &str {
            "remote-chat"
        }

        fn complete(&self, request: &SummaryRequest<'_>) -> Result<String> {
            let body = ChatRequest {
                model: &self.model,
                messages: vec![ChatMessage {
                    role: "user",
                    content: request.prompt,
                }],
                temperature: self.temperature,
                max_tokens: self.max_output_tokens,
            };
            let attempts = self.retries.max(1);
            let mut last_err = String::new();
            for attempt in 1..=attempts {
                let mut req = self.client.post(&self.endpoint).json(&body);
                if let Some(key) = &self.api_key {
                    req = req.bearer_auth(key);
                }
                match req.send().and_then(|r| r.error_for_status()) {
                    Ok(resp) => {
                        let parsed: ChatResponse =
                            resp.json().map_err(|e| Error::RemoteFormat(e.to_string()))?;
                        return parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| Error::RemoteFormat("no choices".to_string()));
                    }
                    Err(e) => {
                        last_err = e.to_string();
                        if attempt < attempts {
                            std::thread::sleep(Duration::from_millis(
                                self.retry_base_ms * (1 << (attempt - 1)),
                            ));
                        }
                    }
                }
            }
            Err(Error::LlmTransport {
                attempts,
                reason: last_err,
            })
        }
    }
}

/// Instantiate the client described by a spec.
pub fn build_client(spec: &LlmClientSpec) -> Result<Box<dyn LlmClient>> {
    match spec {
        LlmClientSpec::MockDeterministic { flavor } => Ok(match flavor {
            MockFlavor::EchoMedoid => Box::new(EchoMedoidClient),
            MockFlavor::ConcatFirstSentences => Box::new(ConcatFirstSentencesClient),
        }),
        #[cfg(feature = "remote")]
        LlmClientSpec::RemoteChat {
            endpoint,
            model,
            temperature,
            max_output_tokens,
            timeout_secs,
            retries,
        } => Ok(Box::new(RemoteChatClient::new(
            endpoint.clone(),
            model.clone(),
            *temperature,
            *max_output_tokens,
            *timeout_secs,
            *retries,
        )?)),
        #[cfg(not(feature = "remote"))]
        LlmClientSpec::RemoteChat { .. } => Err(Error::RemoteFormat(
            "built without the `remote` feature".to_string(),
        )),
    }
}

struct LlmStepOutput {
    centroid: EmbeddingVector,
    summary: String,
    record: PromptRecord,
    fallback: Option<String>,
}

fn llm_step(
    docs: &[&Document],
    embeddings: &[&EmbeddingVector],
    doc_indices: &[usize],
    mean: &EmbeddingVector,
    provider: &dyn EmbeddingProvider,
    client: &dyn LlmClient,
    instruction: &str,
    m: usize,
    strategy: SamplingStrategy,
    rng: &mut RngState,
) -> Result<LlmStepOutput> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("cluster documents"));
    }
    let sampled_global = sample_representatives(embeddings, doc_indices, m, strategy, rng);
    let local_of = |global: usize| doc_indices.iter().position(|&g| g == global).expect("member");
    let sampled: Vec<SampledDoc<'_>> = sampled_global
        .iter()
        .map(|&g| {
            let local = local_of(g);
            SampledDoc {
                doc: docs[local],
                dist2_to_mean: dist2_unchecked(embeddings[local], mean),
            }
        })
        .collect();
    let sampled_refs: Vec<&Document> = sampled.iter().map(|s| s.doc).collect();
    let prompt = build_prompt(instruction, &sampled_refs);
    let request = SummaryRequest {
        instruction,
        prompt: &prompt,
        sampled: &sampled,
    };

    let mut record = PromptRecord {
        instruction: instruction.to_string(),
        sampled_doc_ids: sampled.iter().map(|s| s.doc.id.clone()).collect(),
        rendered_prompt: prompt.clone(),
        response: String::new(),
    };

    // Any failure past this point degrades to the numeric mean: a lost
    // summary step just steers the run back toward a plain k-means optimum.
    let response = match client.complete(&request) {
        Ok(text) if !text.trim().is_empty() => text,
        Ok(_) => {
            return Ok(LlmStepOutput {
                centroid: mean.clone(),
                summary: String::new(),
                record,
                fallback: Some("empty response; numeric mean".to_string()),
            });
        }
        Err(e) => {
            return Ok(LlmStepOutput {
                centroid: mean.clone(),
                summary: String::new(),
                record,
                fallback: Some(format!("client failure: {e}; numeric mean")),
            });
        }
    };
    record.response = response.clone();
    match provider.embed_one(&response) {
        Ok(centroid) => Ok(LlmStepOutput {
            centroid,
            summary: response,
            record,
            fallback: None,
        }),
        Err(e) => Ok(LlmStepOutput {
            centroid: mean.clone(),
            summary: response,
            record,
            fallback: Some(format!("response not embeddable: {e}; numeric mean")),
        }),
    }
}

/// LLM summary-as-centroid for one cluster: sample representatives, render
/// the prompt, call the client, and re-embed the response with the same
/// provider. Client failure or an empty response falls back to the numeric
/// mean, flagged in the returned record's pairing.
#[allow(clippy::too_many_arguments)]
pub fn llm_centroid(
    cluster_docs: &[&Document],
    cluster_embeddings: &[&EmbeddingVector],
    cluster_doc_indices: &[usize],
    provider: &dyn EmbeddingProvider,
    client: &dyn LlmClient,
    instruction: &str,
    m: usize,
    strategy: SamplingStrategy,
    rng: &mut RngState,
) -> Result<(EmbeddingVector, PromptRecord)> {
    let mean = crate::types::mean_vector(cluster_embeddings)?;
    let out = llm_step(
        cluster_docs,
        cluster_embeddings,
        cluster_doc_indices,
        &mean,
        provider,
        client,
        instruction,
        m,
        strategy,
        rng,
    )?;
    Ok((out.centroid, out.record))
}

/// Driver-facing LLM summarizer.
pub struct LlmSummarizer<'a> {
    pub instruction: String,
    pub m: usize,
    pub sampling: SamplingStrategy,
    pub provider: &'a dyn EmbeddingProvider,
    pub client: &'a dyn LlmClient,
}

impl<'a> LlmSummarizer<'a> {
    pub fn new(
        instruction: impl Into<String>,
        m: usize,
        sampling: SamplingStrategy,
        provider: &'a dyn EmbeddingProvider,
        client: &'a dyn LlmClient,
    ) -> Self {
        Self {
            instruction: instruction.into(),
            m,
            sampling,
            provider,
            client,
        }
    }
}

impl CentroidSummarizer for LlmSummarizer<'_> {
    fn describe(&self) -> String {
        format!("llm({}, m={})", self.client.name(), self.m)
    }

    fn summarize(&self, cluster: &ClusterMembers<'_>, rng: &mut RngState) -> Result<SummaryOutcome> {
        let out = llm_step(
            &cluster.docs,
            &cluster.embeddings,
            &cluster.doc_indices,
            &cluster.mean,
            self.provider,
            self.client,
            &self.instruction,
            self.m,
            self.sampling,
            rng,
        )?;
        Ok(SummaryOutcome {
            centroid: out.centroid,
            summary: out.summary,
            prompt: Some(out.record),
            fallback: out.fallback,
            notes: Vec::new(),
        })
    }
}
