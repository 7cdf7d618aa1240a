//! Text-guided retrieval: pluggable text embeddings, a unit-row index over
//! captions, cosine top-k, and keyword intent routing for chat input.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::RenderAttributes;
use crate::rng::fnv1a64;

pub const DEFAULT_DIM: usize = 512;
pub const DEFAULT_TOP_K: usize = 3;
/// Row norms may drift this far from 1 before an index is rejected.
pub const UNIT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("text is empty")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding provider returned a malformed response: {0}")]
    MalformedResponse(String),
    #[error("index was built by `{index}` but the query comes from `{query}`")]
    ProviderMismatch { index: String, query: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("embedding `{id}` failed: {message}")]
    EmbedFailed { id: String, message: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index row {0} is not unit length")]
    NonUnitRow(usize),
}

/// Turns text into vectors. Implementations need not normalize; callers do.
pub trait EmbeddingProvider: Send + Sync {
    /// Identifies the vector space; vectors from different ids never mix.
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, RetrievalError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEmbedding {
    pub vector: Vec<f32>,
    pub provider_id: String,
}

impl TextEmbedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Offline signed-hashing embedder. Each token lands in bucket
/// `fnv1a64(token) % dim` with a sign taken from the hash's top bit.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, id: format!("fallback-hash-v1/{dim}") }
    }

    /// Unnormalized hashed bag of tokens.
    pub fn raw(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize(text);
        let mut v = vec![0.0; self.dim];
        if tokens.is_empty() {
            return v;
        }
        let w = 1.0 / (tokens.len() as f64).sqrt();
        for t in &tokens {
            let h = fnv1a64(t.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dim as u64) as usize] += sign * w;
        }
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, RetrievalError> {
        Ok(texts
            .iter()
            .map(|t| {
                let v = self.raw(t);
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let inv = if n > 0.0 { 1.0 / n } else { 0.0 };
                v.into_iter().map(|x| (x * inv) as f32).collect()
            })
            .collect())
    }
}

/// Lowercase alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scales `v` to unit length in place; returns false when that is impossible.
pub fn normalize(v: &mut [f32]) -> bool {
    let n = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / n) as f32;
    }
    true
}

pub fn embed_text(text: &str, provider: &dyn EmbeddingProvider) -> Result<TextEmbedding, RetrievalError> {
    if text.trim().is_empty() {
        return Err(RetrievalError::EmptyText);
    }
    let mut out = provider.embed_batch(&[text])?;
    if out.len() != 1 {
        return Err(RetrievalError::MalformedResponse(format!("expected 1 vector, got {}", out.len())));
    }
    let vector = finish_vector(out.pop().unwrap_or_default(), provider.dim(), text)?;
    Ok(TextEmbedding { vector, provider_id: provider.provider_id().to_string() })
}

fn finish_vector(mut v: Vec<f32>, dim: usize, text: &str) -> Result<Vec<f32>, RetrievalError> {
    if v.len() != dim {
        return Err(RetrievalError::DimensionMismatch { expected: dim, got: v.len() });
    }
    if !normalize(&mut v) {
        // A text with no tokens has no direction under any provider.
        if tokenize(text).is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        return Err(RetrievalError::MalformedResponse("zero or non-finite vector".into()));
    }
    Ok(v)
}

/// Row-major matrix of unit caption embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    matrix: Vec<f32>,
    ids: Vec<String>,
    dim: usize,
    provider_id: String,
}

impl EmbeddingIndex {
    /// Validates shape, uniqueness and unit rows.
    pub fn new(provider_id: String, dim: usize, ids: Vec<String>, matrix: Vec<f32>) -> Result<Self, RetrievalError> {
        if matrix.len() != ids.len() * dim {
            return Err(RetrievalError::DimensionMismatch { expected: ids.len() * dim, got: matrix.len() });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(RetrievalError::DuplicateId(id.clone()));
            }
        }
        let index = Self { matrix, ids, dim, provider_id };
        for i in 0..index.len() {
            let n = index.row(i).iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(RetrievalError::NonUnitRow(i));
            }
        }
        Ok(index)
    }

    pub fn empty(provider_id: &str, dim: usize) -> Self {
        Self { matrix: Vec::new(), ids: Vec::new(), dim, provider_id: provider_id.to_string() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// The stored row as a query embedding.
    pub fn embedding(&self, i: usize) -> TextEmbedding {
        TextEmbedding { vector: self.row(i).to_vec(), provider_id: self.provider_id.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    /// Scores non-increasing; equal scores in ascending id order.
    pub entries: Vec<(String, f64)>,
}

impl SimilarityResult {
    pub fn top(&self) -> Option<&(String, f64)> {
        self.entries.first()
    }
}

/// Embeds every caption in one provider batch; row `i` belongs to `captioned[i]`.
pub fn build_index(
    captioned: &[(String, String)],
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingIndex, RetrievalError> {
    let mut seen = HashSet::with_capacity(captioned.len());
    for (id, _) in captioned {
        if !seen.insert(id.as_str()) {
            return Err(RetrievalError::DuplicateId(id.clone()));
        }
    }
    let dim = provider.dim();
    if captioned.is_empty() {
        return Ok(EmbeddingIndex::empty(provider.provider_id(), dim));
    }
    for (id, caption) in captioned {
        if caption.trim().is_empty() {
            return Err(RetrievalError::EmbedFailed { id: id.clone(), message: "caption is empty".into() });
        }
    }
    let texts: Vec<&str> = captioned.iter().map(|(_, c)| c.as_str()).collect();
    let vectors = provider.embed_batch(&texts).map_err(|e| RetrievalError::EmbedFailed {
        id: captioned[0].0.clone(),
        message: format!("batch of {} failed: {e}", captioned.len()),
    })?;
    if vectors.len() != captioned.len() {
        return Err(RetrievalError::MalformedResponse(format!(
            "expected {} vectors, got {}",
            captioned.len(),
            vectors.len()
        )));
    }
    let mut matrix = Vec::with_capacity(captioned.len() * dim);
    for ((id, caption), v) in captioned.iter().zip(vectors) {
        let v = finish_vector(v, dim, caption)
            .map_err(|e| RetrievalError::EmbedFailed { id: id.clone(), message: e.to_string() })?;
        matrix.extend_from_slice(&v);
    }
    let ids = captioned.iter().map(|(id, _)| id.clone()).collect();
    EmbeddingIndex::new(provider.provider_id().to_string(), dim, ids, matrix)
}

/// f32 products are exact in f64; the sum runs in index order.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Scores of every row against `query`, clamped to [-1, 1].
pub fn score_all(index: &EmbeddingIndex, query: &TextEmbedding) -> Result<Vec<f64>, RetrievalError> {
    if query.provider_id != index.provider_id {
        return Err(RetrievalError::ProviderMismatch {
            index: index.provider_id.clone(),
            query: query.provider_id.clone(),
        });
    }
    if query.dim() != index.dim {
        return Err(RetrievalError::DimensionMismatch { expected: index.dim, got: query.dim() });
    }
    Ok((0..index.len()).map(|i| dot(index.row(i), &query.vector).clamp(-1.0, 1.0)).collect())
}

pub fn retrieve_top_k(
    index: &EmbeddingIndex,
    query: &TextEmbedding,
    k: usize,
) -> Result<SimilarityResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let scores = score_all(index, query)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let cmp = |&a: &usize, &b: &usize| -> Ordering {
        scores[b].total_cmp(&scores[a]).then_with(|| index.ids[a].cmp(&index.ids[b]))
    };
    let k = k.min(order.len());
    if k < order.len() {
        order.select_nth_unstable_by(k, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    Ok(SimilarityResult { entries: order.into_iter().map(|i| (index.ids[i].clone(), scores[i])).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intent {
    Retrieve { query: String },
    Wind { on: bool, strength: Option<f64> },
    Simulate { on: bool },
    Render { attributes: RenderAttributes },
    Unknown { raw: String },
}

const WIND_WORDS: [&str; 3] = ["wind", "breeze", "gust"];
const OFF_WORDS: [&str; 5] = ["stop", "no", "off", "calm", "disable"];
const SIM_WORDS: [&str; 2] = ["sim", "simulation"];
const SIM_STOP_WORDS: [&str; 3] = ["stop", "freeze", "pause"];
const SIM_START_WORDS: [&str; 4] = ["start", "resume", "play", "run"];
const RENDER_WORDS: [&str; 3] = ["render", "photo", "picture"];

/// Keyword routing, first matching rule wins:
/// wind words, then simulation stop/start, then render, else retrieve.
/// Text without any alphanumeric token is `Unknown`.
pub fn route_intent(text: &str) -> Intent {
    let tokens = tokenize(text);
    let has = |words: &[&str]| tokens.iter().any(|t| words.contains(&t.as_str()));
    if tokens.is_empty() {
        return Intent::Unknown { raw: text.to_string() };
    }
    if has(&WIND_WORDS) {
        let on = !has(&OFF_WORDS);
        let strength = if on { first_number(text) } else { None };
        return Intent::Wind { on, strength };
    }
    if has(&SIM_WORDS) {
        if has(&SIM_STOP_WORDS) {
            return Intent::Simulate { on: false };
        }
        if has(&SIM_START_WORDS) {
            return Intent::Simulate { on: true };
        }
    }
    if has(&RENDER_WORDS) {
        return Intent::Render { attributes: RenderAttributes { misc: text.trim().to_string(), ..Default::default() } };
    }
    Intent::Retrieve { query: text.trim().to_string() }
}

fn first_number(text: &str) -> Option<f64> {
    text.split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter_map(|t| t.parse::<f64>().ok())
        .find(|x| x.is_finite() && *x > 0.0)
}
