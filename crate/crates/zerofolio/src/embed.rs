//! Embedding backends: a remote OpenAI-compatible `/embeddings` client with
//! retries and bounded parallelism, and helpers pinning the offline TF-IDF
//! backend's cache identity.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zerofolio_core::tfidf::TfIdfConfig;
use zerofolio_core::EmbeddingVector;

/// Which backend produces vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Remote HTTP embedding API.
    Remote,
    /// Offline deterministic TF-IDF character n-grams.
    TfIdf,
}

/// Backend configuration shared by the CLI commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// Active backend.
    pub kind: BackendKind,
    /// Remote model name (e.g. `text-embedding-3-large`).
    pub model_id: String,
    /// Remote `/embeddings` endpoint URL.
    pub endpoint_url: String,
    /// TF-IDF dimensionality and n-gram range.
    pub tfidf: TfIdfConfig,
    /// Maximum in-flight requests for the remote backend.
    pub max_parallel: usize,
    /// Retries per request on transient failures.
    pub max_retries: u32,
    /// Texts per request.
    pub batch_size: usize,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
}

fn default_backoff_ms() -> u64 {
    500
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::TfIdf,
            model_id: String::new(),
            endpoint_url: String::new(),
            tfidf: TfIdfConfig::default(),
            max_parallel: 8,
            max_retries: 5,
            batch_size: 128,
            api_key_env: "ZEROFOLIO_API_KEY".to_string(),
            initial_backoff_ms: default_backoff_ms(),
        }
    }
}

impl BackendConfig {
    /// The model identifier used for cache keys. The TF-IDF id carries a
    /// corpus fingerprint because its IDF weights depend on the corpus.
    pub fn cache_model_id(&self, corpus_fingerprint: Option<&str>) -> String {
        match self.kind {
            BackendKind::Remote => self.model_id.clone(),
            BackendKind::TfIdf => {
                let t = &self.tfidf;
                let fp = corpus_fingerprint.unwrap_or("none");
                format!("tfidf-d{}-n{}-{}-c{fp}", t.dimensions, t.ngram_min, t.ngram_max)
            }
        }
    }
}

/// Order-independent fingerprint of a TF-IDF fitting corpus.
pub fn corpus_fingerprint<S: AsRef<str>>(texts: &[S]) -> String {
    let mut doc_hashes: Vec<[u8; 32]> = texts
        .iter()
        .map(|t| Sha256::digest(t.as_ref().as_bytes()).into())
        .collect();
    doc_hashes.sort_unstable();
    let mut outer = Sha256::new();
    for h in doc_hashes {
        outer.update(h);
    }
    let digest = outer.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Remote embedding failures.
#[derive(Debug, Error)]
pub enum EmbedError {
    /// Credentials rejected (HTTP 401/403).
    #[error("embedding API rejected the credentials (HTTP {0})")]
    Auth(u16),
    /// Rate limited and retries exhausted.
    #[error("embedding API rate limit persisted past {0} retries")]
    RateLimited(u32),
    /// Non-retryable or retry-exhausted HTTP failure.
    #[error("embedding API error (HTTP {status}): {body_excerpt}")]
    Backend {
        /// HTTP status code.
        status: u16,
        /// First bytes of the response body.
        body_excerpt: String,
    },
    /// The provider returned vectors of inconsistent dimensionality.
    #[error("provider returned a {got}-dimensional vector, expected {expected}")]
    DimensionMismatch {
        /// Dimensionality of the first vector seen.
        expected: usize,
        /// The offending dimensionality.
        got: usize,
    },
    /// Malformed provider response.
    #[error("malformed embedding response: {0}")]
    BadResponse(String),
    /// Network-level failure after retries.
    #[error("embedding request failed: {0}")]
    Transport(String),
    /// Configuration invalid for the chosen backend.
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    /// The configured key environment variable is unset.
    #[error("environment variable {0} is not set (it must hold the API key)")]
    MissingApiKey(String),
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

/// Blocking client for an OpenAI-compatible `POST /embeddings` endpoint.
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    config: BackendConfig,
    api_key: String,
}

impl RemoteBackend {
    /// Builds the client, reading the API key from the configured
    /// environment variable.
    pub fn new(config: &BackendConfig) -> Result<Self, EmbedError> {
        if config.model_id.is_empty() {
            return Err(EmbedError::InvalidConfig("remote backend needs --model".into()));
        }
        if config.endpoint_url.is_empty() {
            return Err(EmbedError::InvalidConfig("remote backend needs --endpoint".into()));
        }
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| EmbedError::MissingApiKey(config.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .no_proxy()
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(Self { client, config: config.clone(), api_key })
    }

    /// Embeds `texts`, returning one vector per text in input order.
    ///
    /// Texts are sent in batches of `batch_size`, with up to `max_parallel`
    /// requests in flight. Transient failures (HTTP 429/5xx, transport
    /// errors) are retried with exponential backoff up to `max_retries`.
    /// Every vector in the whole call must share one dimensionality.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        debug_assert!(texts.iter().all(|t| !t.is_empty()));
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[String]> = texts.chunks(self.config.batch_size.max(1)).collect();
        let mut slots: Vec<Option<Result<Vec<EmbeddingVector>, EmbedError>>> = Vec::new();
        slots.resize_with(batches.len(), || None);
        let results = Mutex::new(slots);
        let next = AtomicUsize::new(0);
        let workers = self.config.max_parallel.max(1).min(batches.len());

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= batches.len() {
                        break;
                    }
                    let outcome = self.embed_batch(batches[i]);
                    results.lock().unwrap()[i] = Some(outcome);
                });
            }
        });

        let mut vectors = Vec::with_capacity(texts.len());
        for slot in results.into_inner().unwrap() {
            vectors.extend(slot.expect("every batch slot is filled")?);
        }
        let expected = vectors.first().map(EmbeddingVector::dim).unwrap_or(0);
        for v in &vectors {
            if v.dim() != expected {
                return Err(EmbedError::DimensionMismatch { expected, got: v.dim() });
            }
        }
        Ok(vectors)
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempt = 0u32;
        loop {
            match self.try_once(batch) {
                Ok(vectors) => return Ok(vectors),
                Err(RequestOutcome::Fatal(e)) => return Err(e),
                Err(RequestOutcome::Transient(e)) => {
                    if attempt >= self.config.max_retries {
                        return Err(e);
                    }
                    std::thread::sleep(backoff);
                    backoff = (backoff * 2).min(Duration::from_secs(30));
                    attempt += 1;
                }
            }
        }
    }

    fn try_once(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, RequestOutcome> {
        let response = self
            .client
            .post(&self.config.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&EmbeddingsRequest { model: &self.config.model_id, input: batch })
            .send()
            .map_err(|e| RequestOutcome::Transient(EmbedError::Transport(e.to_string())))?;

        let status = response.status().as_u16();
        if status == 401 || status == 403 {
            return Err(RequestOutcome::Fatal(EmbedError::Auth(status)));
        }
        if status == 429 {
            return Err(RequestOutcome::Transient(EmbedError::RateLimited(
                self.config.max_retries,
            )));
        }
        if status >= 500 {
            let body = response.text().unwrap_or_default();
            return Err(RequestOutcome::Transient(EmbedError::Backend {
                status,
                body_excerpt: excerpt(&body),
            }));
        }
        if status >= 300 {
            let body = response.text().unwrap_or_default();
            return Err(RequestOutcome::Fatal(EmbedError::Backend {
                status,
                body_excerpt: excerpt(&body),
            }));
        }

        let parsed: EmbeddingsResponse = response
            .json()
            .map_err(|e| RequestOutcome::Fatal(EmbedError::BadResponse(e.to_string())))?;
        if parsed.data.len() != batch.len() {
            return Err(RequestOutcome::Fatal(EmbedError::BadResponse(format!(
                "expected {} embeddings, got {}",
                batch.len(),
                parsed.data.len()
            ))));
        }
        let mut items: Vec<(usize, Vec<f64>)> = parsed
            .data
            .into_iter()
            .enumerate()
            .map(|(pos, item)| (item.index.unwrap_or(pos), item.embedding))
            .collect();
        items.sort_by_key(|(i, _)| *i);
        items
            .into_iter()
            .map(|(_, values)| {
                EmbeddingVector::new(values).map_err(|e| {
                    RequestOutcome::Fatal(EmbedError::BadResponse(e.to_string()))
                })
            })
            .collect()
    }
}

enum RequestOutcome {
    Transient(EmbedError),
    Fatal(EmbedError),
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.len() <= LIMIT {
        body.to_string()
    } else {
        let cut = body
            .char_indices()
            .take_while(|&(i, _)| i < LIMIT)
            .last()
            .map_or(0, |(i, c)| i + c.len_utf8());
        format!("{}...", &body[..cut])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_fingerprint_is_order_independent() {
        let a = corpus_fingerprint(&["one", "two", "three"]);
        let b = corpus_fingerprint(&["three", "one", "two"]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert_ne!(a, corpus_fingerprint(&["one", "two"]));
    }

    #[test]
    fn tfidf_cache_id_pins_configuration_and_corpus() {
        let config = BackendConfig::default();
        let id = config.cache_model_id(Some("deadbeef00112233"));
        assert_eq!(id, "tfidf-d3072-n2-4-cdeadbeef00112233");
        let mut other = config.clone();
        other.tfidf.dimensions = 1024;
        assert_ne!(other.cache_model_id(Some("deadbeef00112233")), id);
    }

    #[test]
    fn remote_backend_requires_model_endpoint_and_key() {
        let mut config = BackendConfig { kind: BackendKind::Remote, ..Default::default() };
        assert!(matches!(RemoteBackend::new(&config), Err(EmbedError::InvalidConfig(_))));
        config.model_id = "m".into();
        config.endpoint_url = "http://localhost:1/embeddings".into();
        config.api_key_env = "ZEROFOLIO_TEST_KEY_THAT_IS_UNSET".into();
        assert!(matches!(RemoteBackend::new(&config), Err(EmbedError::MissingApiKey(_))));
    }

    #[test]
    fn excerpt_truncates_long_bodies() {
        let long = "x".repeat(500);
        let e = excerpt(&long);
        assert!(e.len() <= 204);
        assert!(e.ends_with("..."));
        assert_eq!(excerpt("short"), "short");
    }
}
