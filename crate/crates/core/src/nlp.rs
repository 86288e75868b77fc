//! Extractive summarization: sentence pooling, ranking by centroid
//! similarity, TextRank, or LSA, and top-q concatenation.

use nalgebra::DMatrix;

use crate::driver::{CentroidSummarizer, ClusterMembers, SummaryOutcome};
use crate::embed::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::kmeans::RngState;
use crate::types::{cosine_similarity, mean_vector, Document, EmbeddingVector, NlpMethod};

pub const TEXTRANK_DAMPING: f64 = 0.85;
pub const TEXTRANK_EPS: f64 = 1e-8;
pub const TEXTRANK_MAX_ITER: usize = 200;

/// Default sentence budget for extractive summaries.
pub const DEFAULT_Q: usize = 5;

/// Dot-less tokens that end with a period without ending a sentence.
/// Tokens with internal dots ("e.g", "i.e", "u.s") and single letters are
/// guarded structurally.
const ABBREVIATIONS: &[&str] = &[
    "etc", "cf", "vs", "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "fig", "eq", "al",
    "inc", "ltd", "dept", "approx", "vol",
];

fn is_abbreviation_before(chars: &[char]) -> bool {
    // Collect the token immediately before the period: letters and internal
    // dots, scanning backwards.
    let mut start = chars.len();
    while start > 0 {
        let c = chars[start - 1];
        if c.is_alphabetic() || c == '.' {
            start -= 1;
        } else {
            break;
        }
    }
    let token: String = chars[start..].iter().collect::<String>().to_lowercase();
    let token = token.trim_matches('.');
    if token.is_empty() {
        return false;
    }
    if token.chars().count() == 1 {
        return true; // initials such as "J."
    }
    if token.contains('.') {
        return true; // "e.g", "i.e", "u.s"
    }
    ABBREVIATIONS.contains(&token)
}

/// Rule-based sentence splitter: a sentence ends at `.`, `!`, or `?`
/// followed by whitespace and an uppercase letter or digit, unless the
/// period terminates a known abbreviation. Text without any boundary comes
/// back as a single sentence; no empty sentences are produced.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            // Absorb a run of terminal punctuation and closing quotes.
            let mut end = i + 1;
            while end < chars.len()
                && matches!(chars[end], '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
            {
                end += 1;
            }
            let mut j = end;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            let followed_by_ws = j > end;
            let next_starts_sentence =
                j < chars.len() && (chars[j].is_uppercase() || chars[j].is_ascii_digit());
            let guarded = c == '.' && end == i + 1 && is_abbreviation_before(&chars[..i]);
            if followed_by_ws && next_starts_sentence && !guarded {
                let sentence: String = chars[start..end].iter().collect();
                let sentence = sentence.trim();
                if !sentence.is_empty() {
                    sentences.push(sentence.to_string());
                }
                start = j;
            }
            i = end;
        } else {
            i += 1;
        }
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// The multiset of sentences pooled from a cluster's documents (document
/// order, then sentence order) with parallel embeddings.
pub struct SentencePool {
    pub sentences: Vec<String>,
    pub embeddings: Vec<EmbeddingVector>,
}

impl SentencePool {
    /// Pool sentences from documents and embed them with the same provider
    /// used for documents. `cap` truncates oversized pools (in pool order);
    /// the flag reports whether it triggered.
    pub fn from_docs(
        docs: &[&Document],
        provider: &dyn EmbeddingProvider,
        cap: Option<usize>,
    ) -> Result<(Self, bool)> {
        if docs.is_empty() {
            return Err(Error::EmptyInput("documents for sentence pool"));
        }
        let mut sentences: Vec<String> = Vec::new();
        for doc in docs {
            sentences.extend(split_sentences(&doc.text));
        }
        if sentences.is_empty() {
            return Err(Error::EmptyInput("sentence pool"));
        }
        let mut capped = false;
        if let Some(cap) = cap {
            if sentences.len() > cap {
                sentences.truncate(cap.max(1));
                capped = true;
            }
        }
        let refs: Vec<&str> = sentences.iter().map(|s| s.as_str()).collect();
        let embeddings = provider.embed_batch(&refs)?;
        Ok((
            Self {
                sentences,
                embeddings,
            },
            capped,
        ))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Sentence ranking: `(pool index, score)` pairs sorted by descending score,
/// ties broken toward the lower index. `note` flags degenerate inputs.
#[derive(Debug, Clone)]
pub struct Ranking {
    pub scores: Vec<(usize, f64)>,
    pub note: Option<String>,
}

fn sort_ranking(mut scores: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scores
}

/// Score each sentence by cosine similarity to the mean of the pool's
/// embeddings. A zero-norm mean (antipodal degenerate pool) falls back to
/// uniform scores and is flagged.
pub fn centroid_rank(pool: &SentencePool) -> Result<Ranking> {
    if pool.is_empty() {
        return Err(Error::EmptyInput("sentence pool"));
    }
    let refs: Vec<&EmbeddingVector> = pool.embeddings.iter().collect();
    let mean = mean_vector(&refs)?;
    if mean.norm() == 0.0 {
        let scores = (0..pool.len()).map(|i| (i, 1.0 / pool.len() as f64)).collect();
        return Ok(Ranking {
            scores,
            note: Some("zero-norm pool mean; uniform centroid scores".to_string()),
        });
    }
    let scores: Vec<(usize, f64)> = pool
        .embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| (i, cosine_similarity(e, &mean).unwrap_or(0.0)))
        .collect();
    Ok(Ranking {
        scores: sort_ranking(scores),
        note: None,
    })
}

/// Row-stochastic transition matrix over the sentence graph: edge weight
/// max(0, cosine) between distinct sentences, rows normalized, dangling
/// rows replaced by the uniform distribution.
fn transition_matrix(pool: &SentencePool) -> Vec<Vec<f64>> {
    let n = pool.len();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = cosine_similarity(&pool.embeddings[i], &pool.embeddings[j])
                .unwrap_or(0.0)
                .max(0.0);
            rows[i][j] = w;
            rows[j][i] = w;
        }
    }
    for row in rows.iter_mut() {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for w in row.iter_mut() {
                *w /= sum;
            }
        } else {
            for w in row.iter_mut() {
                *w = 1.0 / n as f64;
            }
        }
    }
    rows
}

/// Weighted PageRank over the sentence-similarity graph by power iteration
/// from the uniform vector; converged when the L1 change drops below `eps`.
/// Scores are non-negative and sum to 1.
pub fn textrank_rank(
    pool: &SentencePool,
    damping: f64,
    eps: f64,
    max_iter: usize,
) -> Result<Ranking> {
    let n = pool.len();
    if n == 0 {
        return Err(Error::EmptyInput("sentence pool"));
    }
    if n == 1 {
        return Ok(Ranking {
            scores: vec![(0, 1.0)],
            note: None,
        });
    }
    let p = transition_matrix(pool);
    let teleport = (1.0 - damping) / n as f64;
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next = vec![teleport; n];
        for i in 0..n {
            let vi = v[i];
            for j in 0..n {
                next[j] += damping * vi * p[i][j];
            }
        }
        let l1: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if l1 < eps {
            break;
        }
    }
    let scores: Vec<(usize, f64)> = v.into_iter().enumerate().collect();
    Ok(Ranking {
        scores: sort_ranking(scores),
        note: None,
    })
}

/// LSA-style scoring: stack sentence embeddings as matrix rows, take the
/// thin SVD, and score each sentence by the length of its projection onto
/// the leading r right-singular directions,
/// `score_i = sqrt(sum_c (sigma_c U[i,c])^2)`.
pub fn lsa_rank(pool: &SentencePool, r: usize) -> Result<Ranking> {
    let n = pool.len();
    if n == 0 {
        return Err(Error::EmptyInput("sentence pool"));
    }
    if r == 0 {
        return Err(Error::EmptyInput("r must be >= 1"));
    }
    if n == 1 {
        return Ok(Ranking {
            scores: vec![(0, pool.embeddings[0].norm())],
            note: None,
        });
    }
    let d = pool.embeddings[0].dim();
    let a = DMatrix::from_fn(n, d, |i, j| pool.embeddings[i].values()[j]);
    let svd = a.svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let sigma = &svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let sigma_max = sigma[order[0]];
    let tol = sigma_max * n.max(d) as f64 * f64::EPSILON;
    let rank = order.iter().filter(|&&c| sigma[c] > tol).count();
    let effective = r.min(rank);

    let scores: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let s: f64 = order
                .iter()
                .take(effective)
                .map(|&c| {
                    let contribution = sigma[c] * u[(i, c)];
                    contribution * contribution
                })
                .sum();
            (i, s.sqrt())
        })
        .collect();
    Ok(Ranking {
        scores: sort_ranking(scores),
        note: None,
    })
}

/// Rank a pool with the given method and its default parameters; the LSA
/// component count defaults to the sentence budget.
pub fn rank_pool(pool: &SentencePool, method: NlpMethod, q: usize, lsa_r: Option<usize>) -> Result<Ranking> {
    match method {
        NlpMethod::Centroid => centroid_rank(pool),
        NlpMethod::TextRank => textrank_rank(pool, TEXTRANK_DAMPING, TEXTRANK_EPS, TEXTRANK_MAX_ITER),
        NlpMethod::Lsa => lsa_rank(pool, lsa_r.unwrap_or(q)),
    }
}

/// Join the top-q sentences, in rank order, with single spaces.
pub fn join_top_q(pool: &SentencePool, ranking: &Ranking, q: usize) -> String {
    ranking
        .scores
        .iter()
        .take(q.min(pool.len()))
        .map(|&(i, _)| pool.sentences[i].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Extract a q-sentence summary from the pool using the given method.
pub fn extract_summary(pool: &SentencePool, method: NlpMethod, q: usize) -> Result<String> {
    if q == 0 {
        return Err(Error::EmptyInput("q must be >= 1"));
    }
    let ranking = rank_pool(pool, method, q, None)?;
    Ok(join_top_q(pool, &ranking, q))
}

fn weighted_sentence_mean(
    pool: &SentencePool,
    ranking: &Ranking,
    q: usize,
) -> Result<EmbeddingVector> {
    let top: Vec<&(usize, f64)> = ranking.scores.iter().take(q.min(pool.len())).collect();
    let weights: Vec<f64> = top.iter().map(|&&(_, s)| s.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let dim = pool.embeddings[0].dim();
    let mut sums = vec![0.0; dim];
    if total > 0.0 {
        for (&&(i, _), w) in top.iter().zip(&weights) {
            for (s, v) in sums.iter_mut().zip(pool.embeddings[i].values()) {
                *s += w * v;
            }
        }
        for s in sums.iter_mut() {
            *s /= total;
        }
    } else {
        for &&(i, _) in &top {
            for (s, v) in sums.iter_mut().zip(pool.embeddings[i].values()) {
                *s += v;
            }
        }
        for s in sums.iter_mut() {
            *s /= top.len() as f64;
        }
    }
    EmbeddingVector::new(sums)
}

struct NlpPipelineOutput {
    centroid: EmbeddingVector,
    summary: String,
    fallback: Option<String>,
    notes: Vec<String>,
}

fn nlp_pipeline(
    docs: &[&Document],
    provider: &dyn EmbeddingProvider,
    method: NlpMethod,
    q: usize,
    lsa_r: Option<usize>,
    pool_cap: Option<usize>,
) -> Result<NlpPipelineOutput> {
    if q == 0 {
        return Err(Error::EmptyInput("q must be >= 1"));
    }
    let (pool, capped) = SentencePool::from_docs(docs, provider, pool_cap)?;
    let mut notes = Vec::new();
    if capped {
        notes.push(format!(
            "sentence pool capped at {} sentences",
            pool.len()
        ));
    }
    let ranking = rank_pool(&pool, method, q, lsa_r)?;
    if let Some(note) = &ranking.note {
        notes.push(note.clone());
    }
    let summary = join_top_q(&pool, &ranking, q);
    match provider.embed_one(&summary) {
        Ok(centroid) => Ok(NlpPipelineOutput {
            centroid,
            summary,
            fallback: None,
            notes,
        }),
        // A static store cannot embed novel summary text; degrade to the
        // score-weighted mean of the top-q sentence embeddings.
        Err(Error::StoreMiss { .. }) => {
            let centroid = weighted_sentence_mean(&pool, &ranking, q)?;
            Ok(NlpPipelineOutput {
                centroid,
                summary,
                fallback: Some(
                    "fallback: summary not embeddable; score-weighted sentence mean".to_string(),
                ),
                notes,
            })
        }
        Err(e) => Err(e),
    }
}

/// Extractive summary-as-centroid: pool the cluster's sentences, rank them,
/// concatenate the top q, and re-embed the summary with the same provider.
/// Returns the new centroid and the summary text.
pub fn nlp_centroid(
    cluster_docs: &[&Document],
    provider: &dyn EmbeddingProvider,
    method: NlpMethod,
    q: usize,
) -> Result<(EmbeddingVector, String)> {
    let out = nlp_pipeline(cluster_docs, provider, method, q, None, None)?;
    Ok((out.centroid, out.summary))
}

/// Driver-facing extractive summarizer.
pub struct NlpSummarizer<'a> {
    pub method: NlpMethod,
    pub q: usize,
    /// LSA component count; defaults to `q`.
    pub lsa_components: Option<usize>,
    /// Optional cap on pool size for very large clusters.
    pub pool_cap: Option<usize>,
    pub provider: &'a dyn EmbeddingProvider,
}

impl<'a> NlpSummarizer<'a> {
    pub fn new(method: NlpMethod, q: usize, provider: &'a dyn EmbeddingProvider) -> Self {
        Self {
            method,
            q,
            lsa_components: None,
            pool_cap: None,
            provider,
        }
    }
}

impl CentroidSummarizer for NlpSummarizer<'_> {
    fn describe(&self) -> String {
        format!("{}(q={})", self.method.name(), self.q)
    }

    fn summarize(&self, cluster: &ClusterMembers<'_>, _rng: &mut RngState) -> Result<SummaryOutcome> {
        let out = nlp_pipeline(
            &cluster.docs,
            self.provider,
            self.method,
            self.q,
            self.lsa_components,
            self.pool_cap,
        )?;
        Ok(SummaryOutcome {
            centroid: out.centroid,
            summary: out.summary,
            prompt: None,
            fallback: out.fallback,
            notes: out.notes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::TestHashProvider;

    fn ev(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    fn pool_from(vectors: &[Vec<f64>]) -> SentencePool {
        SentencePool {
            sentences: (0..vectors.len()).map(|i| format!("sentence {i}")).collect(),
            embeddings: vectors.iter().map(|v| ev(v)).collect(),
        }
    }

    #[test]
    fn split_two_boundaries() {
        assert_eq!(
            split_sentences("How do I reset? It fails."),
            vec!["How do I reset?", "It fails."]
        );
    }

    #[test]
    fn split_without_punctuation_returns_whole() {
        assert_eq!(split_sentences("no punctuation here"), vec!["no punctuation here"]);
    }

    #[test]
    fn split_guards_abbreviations() {
        assert_eq!(split_sentences("e.g. this stays whole."), vec!["e.g. this stays whole."]);
        assert_eq!(
            split_sentences("E.g. This also stays whole."),
            vec!["E.g. This also stays whole."]
        );
        assert_eq!(
            split_sentences("Dr. Smith arrived. He left."),
            vec!["Dr. Smith arrived.", "He left."]
        );
    }

    #[test]
    fn split_handles_digits_and_exclamations() {
        assert_eq!(
            split_sentences("It broke! 3 times in a row. Why?"),
            vec!["It broke!", "3 times in a row.", "Why?"]
        );
    }

    #[test]
    fn split_produces_no_empty_sentences() {
        for text in ["  Hello there.  ", "One. Two. Three.", "..."] {
            for s in split_sentences(text) {
                assert!(!s.trim().is_empty());
            }
        }
    }

    #[test]
    fn centroid_rank_identical_sentences_keep_order() {
        let pool = pool_from(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        let ranking = centroid_rank(&pool).unwrap();
        let order: Vec<usize> = ranking.scores.iter().map(|&(i, _)| i).collect();
        assert_eq!(order, vec![0, 1, 2]);
        for &(_, s) in &ranking.scores {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_rank_puts_outlier_last() {
        let pool = pool_from(&[
            vec![1.0, 0.05],
            vec![1.0, -0.05],
            vec![0.95, 0.0],
            vec![-1.0, 0.0],
        ]);
        let ranking = centroid_rank(&pool).unwrap();
        assert_eq!(ranking.scores.last().unwrap().0, 3);
    }

    #[test]
    fn centroid_rank_single_sentence() {
        let pool = pool_from(&[vec![0.0, 2.0]]);
        let ranking = centroid_rank(&pool).unwrap();
        assert_eq!(ranking.scores, vec![(0, 1.0)]);
    }

    #[test]
    fn centroid_rank_flags_degenerate_pool() {
        let pool = pool_from(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let ranking = centroid_rank(&pool).unwrap();
        assert!(ranking.note.is_some());
        assert_eq!(ranking.scores.len(), 2);
    }

    #[test]
    fn textrank_uniform_on_symmetric_pool() {
        let pool = pool_from(&vec![vec![1.0, 0.0]; 4]);
        let ranking = textrank_rank(&pool, TEXTRANK_DAMPING, TEXTRANK_EPS, TEXTRANK_MAX_ITER).unwrap();
        for &(_, s) in &ranking.scores {
            assert!((s - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn textrank_scores_sum_to_one() {
        let mut rng = RngState::new(5);
        for _ in 0..100 {
            let n = 2 + rng.index(7);
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.f64_in(-1.0, 1.0)).collect())
                .collect();
            let pool = pool_from(&vectors);
            let ranking =
                textrank_rank(&pool, TEXTRANK_DAMPING, TEXTRANK_EPS, TEXTRANK_MAX_ITER).unwrap();
            let total: f64 = ranking.scores.iter().map(|&(_, s)| s).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(ranking.scores.iter().all(|&(_, s)| s >= 0.0));
        }
    }

    /// Direct linear solve of the PageRank system, rebuilt from the pool
    /// via pairwise cosines: (I - d P^T) x = (1-d)/n.
    pub(crate) fn pagerank_direct(pool: &SentencePool, damping: f64) -> Vec<f64> {
        let n = pool.len();
        let mut p = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p[i][j] = cosine_similarity(&pool.embeddings[i], &pool.embeddings[j])
                        .unwrap_or(0.0)
                        .max(0.0);
                }
            }
            let sum: f64 = p[i].iter().sum();
            if sum > 0.0 {
                for w in p[i].iter_mut() {
                    *w /= sum;
                }
            } else {
                for w in p[i].iter_mut() {
                    *w = 1.0 / n as f64;
                }
            }
        }
        // System matrix M = I - d P^T, rhs = (1-d)/n.
        let mut m = vec![vec![0.0; n]; n];
        let mut rhs = vec![(1.0 - damping) / n as f64; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = if i == j { 1.0 } else { 0.0 } - damping * p[j][i];
            }
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            rhs.swap(col, pivot);
            for row in (col + 1)..n {
                let factor = m[row][col] / m[col][col];
                for j in col..n {
                    m[row][j] -= factor * m[col][j];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = rhs[row];
            for j in (row + 1)..n {
                acc -= m[row][j] * x[j];
            }
            x[row] = acc / m[row][row];
        }
        x
    }

    #[test]
    fn textrank_matches_direct_solve_on_small_pools() {
        let mut rng = RngState::new(17);
        for _ in 0..40 {
            let n = 2 + rng.index(5);
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.f64_in(-1.0, 1.0)).collect())
                .collect();
            let pool = pool_from(&vectors);
            let ranking =
                textrank_rank(&pool, TEXTRANK_DAMPING, 1e-14, 10_000).unwrap();
            let direct = pagerank_direct(&pool, TEXTRANK_DAMPING);
            let mut by_index = vec![0.0; n];
            for &(i, s) in &ranking.scores {
                by_index[i] = s;
            }
            for (a, b) in by_index.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn textrank_star_pool_ranks_hub_first() {
        // Hub along e0; spokes at cos 0.5 to the hub and cos 0 to each
        // other (tetrahedral directions in the remaining coordinates).
        let s = 0.75f64.sqrt() / 3.0f64.sqrt();
        let pool = pool_from(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.5, s, s, s],
            vec![0.5, s, -s, -s],
            vec![0.5, -s, s, -s],
            vec![0.5, -s, -s, s],
        ]);
        let ranking =
            textrank_rank(&pool, TEXTRANK_DAMPING, TEXTRANK_EPS, TEXTRANK_MAX_ITER).unwrap();
        assert_eq!(ranking.scores[0].0, 0, "hub must rank first: {:?}", ranking.scores);
        let direct = pagerank_direct(&pool, TEXTRANK_DAMPING);
        let hub = direct[0];
        assert!(direct.iter().skip(1).all(|&v| v < hub));
    }

    #[test]
    fn lsa_rank_one_pool_ranks_by_norm() {
        let pool = pool_from(&[
            vec![2.0, 0.0],
            vec![0.5, 0.0],
            vec![-3.0, 0.0],
            vec![1.0, 0.0],
        ]);
        let ranking = lsa_rank(&pool, 1).unwrap();
        let order: Vec<usize> = ranking.scores.iter().map(|&(i, _)| i).collect();
        assert_eq!(order, vec![2, 0, 3, 1]);
        for &(i, s) in &ranking.scores {
            assert!((s - pool.embeddings[i].norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn lsa_single_sentence_scores_its_norm() {
        let pool = pool_from(&[vec![3.0, 4.0]]);
        let ranking = lsa_rank(&pool, 2).unwrap();
        assert_eq!(ranking.scores.len(), 1);
        assert!((ranking.scores[0].1 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn lsa_two_orthogonal_directions_scores_norms() {
        // Four sentences spanning two orthogonal directions; with r = 2 the
        // projection covers the whole row space, so each score equals the
        // sentence norm.
        let pool = pool_from(&[
            vec![2.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0],
            vec![0.0, 0.5, 0.0],
        ]);
        let ranking = lsa_rank(&pool, 2).unwrap();
        for &(i, s) in &ranking.scores {
            assert!(
                (s - pool.embeddings[i].norm()).abs() < 1e-9,
                "index {i}: {s} vs {}",
                pool.embeddings[i].norm()
            );
        }
        let order: Vec<usize> = ranking.scores.iter().map(|&(i, _)| i).collect();
        assert_eq!(order, vec![2, 0, 1, 3]);
    }

    #[test]
    fn lsa_rotation_invariance_quick() {
        let mut rng = RngState::new(23);
        for _ in 0..10 {
            let n = 2 + rng.index(5);
            let d = 4;
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.f64_in(-1.0, 1.0)).collect())
                .collect();
            let pool = pool_from(&vectors);
            // Random orthogonal matrix from QR of a Gaussian-ish matrix.
            let g = DMatrix::from_fn(d, d, |_, _| rng.f64_in(-1.0, 1.0));
            let qr = g.qr();
            let q = qr.q();
            let rotated: Vec<Vec<f64>> = vectors
                .iter()
                .map(|v| {
                    let x = nalgebra::DVector::from_vec(v.clone());
                    (&q * x).iter().copied().collect()
                })
                .collect();
            let pool_rot = pool_from(&rotated);
            let a = lsa_rank(&pool, 2).unwrap();
            let b = lsa_rank(&pool_rot, 2).unwrap();
            for (x, y) in a.scores.iter().zip(&b.scores) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rankers_are_permutation_equivariant() {
        let mut rng = RngState::new(41);
        for method in [NlpMethod::Centroid, NlpMethod::TextRank, NlpMethod::Lsa] {
            let n = 6;
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.f64_in(-1.0, 1.0)).collect())
                .collect();
            let pool = pool_from(&vectors);
            // Reverse the pool; index i maps to n-1-i.
            let reversed: Vec<Vec<f64>> = vectors.iter().rev().cloned().collect();
            let pool_rev = pool_from(&reversed);
            let a = rank_pool(&pool, method, 3, None).unwrap();
            let b = rank_pool(&pool_rev, method, 3, None).unwrap();
            for (&(ia, sa), &(ib, sb)) in a.scores.iter().zip(&b.scores) {
                assert_eq!(ia, n - 1 - ib, "method {method:?}");
                assert!((sa - sb).abs() < 1e-9, "method {method:?}");
            }
        }
    }

    #[test]
    fn extract_summary_takes_all_when_q_large() {
        let pool = pool_from(&[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.8, 0.2]]);
        let summary = extract_summary(&pool, NlpMethod::Centroid, 10).unwrap();
        let words: Vec<&str> = summary.split(". ").collect();
        assert_eq!(words.len(), 1); // sentences carry no periods here
        assert_eq!(summary.split(' ').filter(|w| *w == "sentence").count(), 3);
    }

    #[test]
    fn extract_summary_q1_is_top_sentence_verbatim() {
        let pool = pool_from(&[vec![0.1, 1.0], vec![1.0, 0.0], vec![0.9, 0.05]]);
        let ranking = centroid_rank(&pool).unwrap();
        let summary = extract_summary(&pool, NlpMethod::Centroid, 1).unwrap();
        assert_eq!(summary, pool.sentences[ranking.scores[0].0]);
    }

    #[test]
    fn extract_summary_only_concatenates_pool_sentences() {
        let pool = pool_from(&[vec![1.0, 0.0], vec![0.4, 0.3], vec![0.2, 0.9]]);
        for method in [NlpMethod::Centroid, NlpMethod::TextRank, NlpMethod::Lsa] {
            let summary = extract_summary(&pool, method, 2).unwrap();
            for part in summary.split(' ') {
                if part == "sentence" {
                    continue;
                }
                assert!(part.parse::<usize>().is_ok(), "unexpected token {part}");
            }
        }
    }

    #[test]
    fn nlp_centroid_single_sentence_doc_echoes_its_embedding() {
        let provider = TestHashProvider::new(16, true);
        let doc = Document::new("a", "resetting the password fails");
        let (centroid, summary) =
            nlp_centroid(&[&doc], &provider, NlpMethod::Centroid, DEFAULT_Q).unwrap();
        assert_eq!(summary, "resetting the password fails");
        assert_eq!(centroid, provider.embed_one(&doc.text).unwrap());
    }

    #[test]
    fn nlp_centroid_identical_docs_echo_shared_sentences() {
        let provider = TestHashProvider::new(16, true);
        let text = "The card was declined. The card was declined. The card was declined.";
        let docs: Vec<Document> = (0..4)
            .map(|i| Document::new(format!("d{i}"), text))
            .collect();
        let refs: Vec<&Document> = docs.iter().collect();
        let (centroid, summary) = nlp_centroid(&refs, &provider, NlpMethod::Centroid, 3).unwrap();
        let expected = "The card was declined. The card was declined. The card was declined.";
        assert_eq!(summary, expected);
        assert_eq!(centroid, provider.embed_one(expected).unwrap());
    }

    #[test]
    fn nlp_centroid_end_to_end_contract() {
        let provider = TestHashProvider::new(24, true);
        let docs = vec![
            Document::new("a", "Transfers to other banks keep failing. Support was unhelpful."),
            Document::new("b", "My wire transfer bounced back twice!"),
            Document::new("c", "International transfer stuck for days. No status updates."),
        ];
        let refs: Vec<&Document> = docs.iter().collect();
        for method in [NlpMethod::Centroid, NlpMethod::TextRank, NlpMethod::Lsa] {
            let (centroid, summary) = nlp_centroid(&refs, &provider, method, 2).unwrap();
            assert_eq!(centroid.dim(), 24);
            assert!(!summary.is_empty());
            assert!(centroid.values().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn store_backed_pipeline_falls_back_to_weighted_mean() {
        use crate::embed::{content_key, write_store, FileStoreProvider};

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let hasher = TestHashProvider::new(8, true);
        let texts = ["Card payments fail.", "Payments bounce at checkout."];
        let mut pairs: Vec<(String, EmbeddingVector)> = Vec::new();
        for t in texts {
            pairs.push((content_key(t), hasher.embed_one(t).unwrap()));
        }
        write_store(
            &path,
            pairs.iter().map(|(k, v)| (k.as_str(), v)),
        )
        .unwrap();
        let store = FileStoreProvider::load(&path, 8, true).unwrap();

        let docs = vec![
            Document::new("a", texts[0]),
            Document::new("b", texts[1]),
        ];
        let refs: Vec<&Document> = docs.iter().collect();
        let out = nlp_pipeline(&refs, &store, NlpMethod::Centroid, 2, None, None).unwrap();
        assert!(out.fallback.is_some());
        assert_eq!(out.centroid.dim(), 8);
    }
}
