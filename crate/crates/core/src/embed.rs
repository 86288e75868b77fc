//! Text-to-vector providers: a precomputed file store, a remote HTTP API,
//! and a deterministic hashing embedder for offline use.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::{Document, EmbeddingVector};

/// Configuration for an embedding backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingProviderSpec {
    /// Deterministic feature-hashing embedder, no I/O.
    TestHash { dim: usize, normalize: bool },
    /// JSON Lines store of precomputed vectors keyed by document id, exact
    /// text, or content hash.
    FileStore {
        path: PathBuf,
        dim: usize,
        normalize: bool,
    },
    /// HTTP embedding endpoint speaking the common `{"model", "input"}` ->
    /// `{"data": [{"index", "embedding"}]}` wire format.
    RemoteApi {
        endpoint: String,
        model: String,
        dim: usize,
        batch_size: usize,
        normalize: bool,
    },
}

/// Uniform mapping from text to vectors. One provider instance serves
/// documents, sentences, and summaries within a run, so implementations must
/// be deterministic (or cache) and shareable across threads.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Embed a batch of non-empty texts, one vector per input in input
    /// order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    /// Embed corpus documents. The default path embeds the raw text; the
    /// file store overrides this to look vectors up by document id.
    fn embed_documents(&self, docs: &[Document]) -> Result<Vec<EmbeddingVector>> {
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        self.embed_batch(&texts)
    }
}

fn check_texts(texts: &[&str]) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::EmptyInput("texts"));
    }
    for t in texts {
        if t.trim().is_empty() {
            return Err(Error::EmptyText);
        }
    }
    Ok(())
}

/// Stable 64-bit FNV-1a; the hashing embedder must not depend on the
/// standard library's unstable default hasher.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Env var holding the bearer token for the remote embedding endpoint.
pub const EMBED_API_KEY: &str = "EMBED_API_KEY";

/// Content-addressed key for ad-hoc texts in embedding stores.
pub fn content_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut key = String::with_capacity(7 + digest.len() * 2);
    key.push_str("sha256:");
    for byte in digest {
        key.push_str(&format!("{byte:02x}"));
    }
    key
}

/// Deterministic offline embedder: lowercase word and character-trigram
/// features hashed into `dim` buckets with signed hashing, then
/// L2-normalized. Topically similar texts land near each other, which keeps
/// end-to-end clustering tests meaningful without a neural encoder.
pub struct TestHashProvider {
    dim: usize,
    normalize: bool,
}

impl TestHashProvider {
    pub fn new(dim: usize, normalize: bool) -> Self {
        Self { dim, normalize }
    }
}

impl EmbeddingProvider for TestHashProvider {
    fn name(&self) -> &str {
        "testhash"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        check_texts(texts)?;
        texts
            .iter()
            .map(|text| {
                let lower = text.to_lowercase();
                let mut values = vec![0.0f64; self.dim];
                let mut add = |feature: &str| {
                    let h = fnv1a64(feature.as_bytes());
                    let bucket = (h % self.dim as u64) as usize;
                    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                    values[bucket] += sign;
                };
                for word in lower.split(|c: char| !c.is_alphanumeric()) {
                    if !word.is_empty() {
                        add(&format!("w:{word}"));
                    }
                }
                let chars: Vec<char> = lower.chars().collect();
                for window in chars.windows(3) {
                    add(&format!("t:{}{}{}", window[0], window[1], window[2]));
                }
                // Whole-text feature so any two distinct texts differ in at
                // least one feature.
                add(&format!("x:{lower}"));
                let v = EmbeddingVector::new(values)?;
                Ok(if self.normalize { v.normalized() } else { v })
            })
            .collect()
    }
}

/// Precomputed embeddings loaded from a JSON Lines file, one record per
/// line: `{"key": string, "vector": [floats]}`. Lookup tries the document
/// id (when embedding a corpus), the exact text, and the content hash; a
/// miss is an error because a static store cannot embed novel text.
pub struct FileStoreProvider {
    path: PathBuf,
    dim: usize,
    normalize: bool,
    vectors: HashMap<String, EmbeddingVector>,
}

#[derive(Serialize, Deserialize)]
struct StoreRecord {
    key: String,
    vector: Vec<f64>,
}

impl FileStoreProvider {
    pub fn load(path: impl AsRef<Path>, dim: usize, normalize: bool) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let mut vectors = HashMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StoreRecord = serde_json::from_str(&line).map_err(|e| {
                Error::RemoteFormat(format!(
                    "{}:{}: {e}",
                    path.as_ref().display(),
                    lineno + 1
                ))
            })?;
            let vector = EmbeddingVector::new(record.vector)?;
            if vector.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: vector.dim(),
                });
            }
            vectors.insert(record.key, vector);
        }
        Ok(Self {
            path: path.as_ref().to_path_buf(),
            dim,
            normalize,
            vectors,
        })
    }

    fn lookup(&self, key: &str) -> Option<EmbeddingVector> {
        self.vectors.get(key).map(|v| {
            if self.normalize {
                v.normalized()
            } else {
                v.clone()
            }
        })
    }

    fn lookup_text(&self, text: &str) -> Result<EmbeddingVector> {
        if let Some(v) = self.lookup(text) {
            return Ok(v);
        }
        let hashed = content_key(text);
        self.lookup(&hashed).ok_or_else(|| {
            let snippet: String = text.chars().take(40).collect();
            Error::StoreMiss {
                key: format!("{hashed} (\"{snippet}\")"),
            }
        })
    }
}

impl EmbeddingProvider for FileStoreProvider {
    fn name(&self) -> &str {
        "filestore"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        check_texts(texts)?;
        let _ = &self.path;
        texts.iter().map(|t| self.lookup_text(t)).collect()
    }

    fn embed_documents(&self, docs: &[Document]) -> Result<Vec<EmbeddingVector>> {
        docs.iter()
            .map(|d| {
                if let Some(v) = self.lookup(&d.id) {
                    return Ok(v);
                }
                self.lookup_text(&d.text).map_err(|_| Error::StoreMiss {
                    key: d.id.clone(),
                })
            })
            .collect()
    }
}

/// Write an embedding store file; values round-trip bit-exactly through the
/// JSON representation.
pub fn write_store<'a>(
    path: impl AsRef<Path>,
    pairs: impl IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for (key, vector) in pairs {
        let record = StoreRecord {
            key: key.to_string(),
            vector: vector.values().to_vec(),
        };
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// Memoizing wrapper: every distinct text (and every document id) is pushed
/// through the inner provider at most once per process. Wrapping the run's
/// provider guarantees a corpus is embedded exactly once no matter how many
/// seeds or variants reuse it.
pub struct CachedProvider<'a> {
    inner: &'a dyn EmbeddingProvider,
    by_text: std::sync::Mutex<HashMap<String, EmbeddingVector>>,
    by_doc: std::sync::Mutex<HashMap<String, EmbeddingVector>>,
}

impl<'a> CachedProvider<'a> {
    pub fn new(inner: &'a dyn EmbeddingProvider) -> Self {
        Self {
            inner,
            by_text: std::sync::Mutex::new(HashMap::new()),
            by_doc: std::sync::Mutex::new(HashMap::new()),
        }
    }
}

impl EmbeddingProvider for CachedProvider<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        check_texts(texts)?;
        let mut results: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.by_text.lock().expect("cache poisoned");
            for (i, t) in texts.iter().enumerate() {
                match cache.get(*t) {
                    Some(v) => results[i] = Some(v.clone()),
                    None => missing.push(i),
                }
            }
        }
        if !missing.is_empty() {
            let miss_texts: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let vectors = self.inner.embed_batch(&miss_texts)?;
            let mut cache = self.by_text.lock().expect("cache poisoned");
            for (&i, v) in missing.iter().zip(vectors) {
                cache.insert(texts[i].to_string(), v.clone());
                results[i] = Some(v);
            }
        }
        Ok(results.into_iter().map(|v| v.expect("filled")).collect())
    }

    fn embed_documents(&self, docs: &[Document]) -> Result<Vec<EmbeddingVector>> {
        let mut results: Vec<Option<EmbeddingVector>> = vec![None; docs.len()];
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.by_doc.lock().expect("cache poisoned");
            for (i, d) in docs.iter().enumerate() {
                match cache.get(&d.id) {
                    Some(v) => results[i] = Some(v.clone()),
                    None => missing.push(i),
                }
            }
        }
        if !missing.is_empty() {
            let miss_docs: Vec<Document> = missing.iter().map(|&i| docs[i].clone()).collect();
            let vectors = self.inner.embed_documents(&miss_docs)?;
            let mut cache = self.by_doc.lock().expect("cache poisoned");
            for (&i, v) in missing.iter().zip(vectors) {
                cache.insert(docs[i].id.clone(), v.clone());
                results[i] = Some(v);
            }
        }
        Ok(results.into_iter().map(|v| v.expect("filled")).collect())
    }
}

#[cfg(feature = "remote")]
pub use remote::RemoteApiProvider;

#[cfg(feature = "remote")]
mod remote {
    use std::sync::Mutex;
    use std::time::Duration;

    use serde::Deserialize;

    use super::*;

    const RETRY_ATTEMPTS: u32 = 3;
    const RETRY_BASE_MS: u64 = 500;

    /// HTTP embedding client with request batching, retry with exponential
    /// backoff, and an in-process cache so repeated texts embed identically
    /// within a run.
    pub struct RemoteApiProvider {
        endpoint: String,
        model: String,
        dim: usize,
        batch_size: usize,
        normalize: bool,
        api_key: Option<String>,
        retry_base_ms: u64,
        client: reqwest::blocking::Client,
        cache: Mutex<HashMap<String, EmbeddingVector>>,
    }

    #[derive(serde::Serialize)]
    struct EmbedRequest<'a> {
        model: &'a str,
        input: &'a [&'a str],
    }

    #[derive(Deserialize)]
    struct EmbedResponse {
        data: Vec<EmbedDatum>,
    }

    #[derive(Deserialize)]
    struct EmbedDatum {
        index: usize,
        embedding: Vec<f64>,
    }

    impl RemoteApiProvider {
        pub fn new(endpoint: String, model: String, dim: usize, batch_size: usize, normalize: bool) -> Result<Self> {
            if batch_size == 0 {
                return Err(Error::EmptyInput("batch_size must be >= 1"));
            }
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .map_err(|e| Error::Transport {
                    attempts: 0,
                    reason: e.to_string(),
                })?;
            Ok(Self {
                endpoint,
                model,
                dim,
                batch_size,
                normalize,
                api_key: std::env::var(EMBED_API_KEY).ok(),
                retry_base_ms: RETRY_BASE_MS,
                client,
                cache: Mutex::new(HashMap::new()),
            })
        }

        /// Shrink the backoff base; test servers do not need half-second
        /// waits.
        pub fn with_retry_base_ms(mut self, ms: u64) -> Self {
            self.retry_base_ms = ms;
            self
        }

        fn post_chunk(&self, chunk: &[&str]) -> Result<Vec<EmbeddingVector>> {
            let body = EmbedRequest {
                model: &self.model,
                input: chunk,
            };
            let mut last_err = String::new();
            for attempt in 1..=RETRY_ATTEMPTS {
                let mut req = self.client.post(&self.endpoint).json(&body);
                if let Some(key) = &self.api_key {
                    req = req.bearer_auth(key);
                }
                match req.send().and_then(|r| r.error_for_status()) {
                    Ok(resp) => {
                        let parsed: EmbedResponse = resp
                            .json()
                            .map_err(|e| Error::RemoteFormat(e.to_string()))?;
                        if parsed.data.len() != chunk.len() {
                            return Err(Error::RemoteFormat(format!(
                                "expected {} embeddings, got {}",
                                chunk.len(),
                                parsed.data.len()
                            )));
                        }
                        let mut out: Vec<Option<EmbeddingVector>> = vec![None; chunk.len()];
                        for datum in parsed.data {
                            if datum.embedding.len() != self.dim {
                                return Err(Error::RemoteDim {
                                    expected: self.dim,
                                    got: datum.embedding.len(),
                                });
                            }
                            let v = EmbeddingVector::new(datum.embedding)?;
                            let slot = out.get_mut(datum.index).ok_or_else(|| {
                                Error::RemoteFormat(format!("index {} out of range", datum.index))
                            })?;
                            *slot = Some(if self.normalize { v.normalized() } else { v });
                        }
                        return out
                            .into_iter()
                            .enumerate()
                            .map(|(i, v)| {
                                v.ok_or_else(|| {
                                    Error::RemoteFormat(format!("missing embedding for index {i}"))
                                })
                            })
                            .collect();
                    }
                    Err(e) => {
                        last_err = e.to_string();
                        if attempt < RETRY_ATTEMPTS {
                            std::thread::sleep(Duration::from_millis(
                                self.retry_base_ms * (1 << (attempt - 1)),
                            ));
                        }
                    }
                }
            }
            Err(Error::Transport {
                attempts: RETRY_ATTEMPTS,
                reason: last_err,
            })
        }
    }

    impl EmbeddingProvider for RemoteApiProvider {
        fn name(&self) -> &str {
            "remote"
        }

        fn dim(&self) -> usize {
            self.dim
        }

        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
            check_texts(texts)?;
            let mut results: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
            let mut missing: Vec<usize> = Vec::new();
            {
                let cache = self.cache.lock().expect("cache poisoned");
                for (i, t) in texts.iter().enumerate() {
                    match cache.get(*t) {
                        Some(v) => results[i] = Some(v.clone()),
                        None => missing.push(i),
                    }
                }
            }
            for chunk in missing.chunks(self.batch_size) {
                let chunk_texts: Vec<&str> = chunk.iter().map(|&i| texts[i]).collect();
                let vectors = self.post_chunk(&chunk_texts)?;
                let mut cache = self.cache.lock().expect("cache poisoned");
                for (&i, v) in chunk.iter().zip(vectors) {
                    cache.insert(texts[i].to_string(), v.clone());
                    results[i] = Some(v);
                }
            }
            Ok(results.into_iter().map(|v| v.expect("filled")).collect())
        }
    }
}

/// Instantiate the backend described by a spec.
pub fn build_provider(spec: &EmbeddingProviderSpec) -> Result<Box<dyn EmbeddingProvider>> {
    match spec {
        EmbeddingProviderSpec::TestHash { dim, normalize } => {
            Ok(Box::new(TestHashProvider::new(*dim, *normalize)))
        }
        EmbeddingProviderSpec::FileStore {
            path,
            dim,
            normalize,
        } => Ok(Box::new(FileStoreProvider::load(path, *dim, *normalize)?)),
        #[cfg(feature = "remote")]
        EmbeddingProviderSpec::RemoteApi {
            endpoint,
            model,
            dim,
            batch_size,
            normalize,
        } => Ok(Box::new(RemoteApiProvider::new(
            endpoint.clone(),
            model.clone(),
            *dim,
            *batch_size,
            *normalize,
        )?)),
        #[cfg(not(feature = "remote"))]
        EmbeddingProviderSpec::RemoteApi { .. } => Err(Error::RemoteFormat(
            "built without the `remote` feature".to_string(),
        )),
    }
}
