//! Remote embedding provider over HTTP.
//!
//! `POST {base}/embed` with `{"texts": [...]}`; the reply is
//! `{"dim": D, "vectors": [[...], ...]}`. Vectors are re-normalized by the
//! retrieval layer, so the server's own normalization is not trusted.

use std::time::Duration;

use hairforge_core::retrieval::{EmbeddingProvider, RetrievalError};
use serde::{Deserialize, Serialize};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    provider_id: String,
    dim: usize,
    timeout: Duration,
}

impl HttpEmbedder {
    /// Probes the server once to learn its dimension. Blocking; call from a
    /// thread that may block.
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self, RetrievalError> {
        let endpoint = format!("{}/embed", base_url.trim_end_matches('/'));
        let mut this = Self { endpoint, provider_id: String::new(), dim: 0, timeout };
        let probe = this.request(&["hair"])?;
        this.dim = probe.dim;
        this.provider_id = format!("http:{}/{}", base_url.trim_end_matches('/'), probe.dim);
        Ok(this)
    }

    fn request(&self, texts: &[&str]) -> Result<EmbedResponse, RetrievalError> {
        // A fresh client per call: blocking clients must be built and dropped
        // outside async contexts, and callers run on arbitrary blocking threads.
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| RetrievalError::ProviderUnavailable(e.to_string()))?;
        let body = serde_json::to_vec(&EmbedRequest { texts }).expect("request serializes");
        let resp = client
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .body(body)
            .send()
            .map_err(|e| RetrievalError::ProviderUnavailable(e.to_string()))?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| RetrievalError::ProviderUnavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(RetrievalError::ProviderUnavailable(format!("HTTP {status}")));
        }
        let parsed: EmbedResponse =
            serde_json::from_slice(&bytes).map_err(|e| RetrievalError::MalformedResponse(e.to_string()))?;
        if parsed.vectors.len() != texts.len() {
            return Err(RetrievalError::MalformedResponse(format!(
                "expected {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        if let Some(v) = parsed.vectors.iter().find(|v| v.len() != parsed.dim) {
            return Err(RetrievalError::DimensionMismatch { expected: parsed.dim, got: v.len() });
        }
        Ok(parsed)
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, RetrievalError> {
        let resp = self.request(texts)?;
        if resp.dim != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, got: resp.dim });
        }
        Ok(resp.vectors)
    }
}
