//! Persisted selector state for one-off selection on new instances.
//!
//! The state stores cache references plus the PAR10 matrix rather than raw
//! vectors, so it stays small; the vectors themselves are resolved through
//! the embedding cache at load time.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use zerofolio_core::tfidf::TfIdfConfig;
use zerofolio_core::{EmbeddingVector, SelectorConfig, TrainedSelector};

use crate::cache::{cache_get, CacheError, CacheKey};

/// JSON object keys are strings; this bridges seed-keyed maps both ways.
mod seed_key_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S, V>(map: &BTreeMap<u64, V>, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        V: Serialize,
    {
        serializer.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D, V>(deserializer: D) -> Result<BTreeMap<u64, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        let raw = BTreeMap::<String, V>::deserialize(deserializer)?;
        raw.into_iter()
            .map(|(k, v)| k.parse::<u64>().map(|k| (k, v)).map_err(D::Error::custom))
            .collect()
    }
}

/// Backend-specific data needed to embed a query the same way the training
/// set was embedded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateBackend {
    /// Remote model; queries go through the API.
    Remote {
        /// Model name.
        model_id: String,
        /// Endpoint URL.
        endpoint_url: String,
    },
    /// Offline TF-IDF; the fitted IDF weights are stored per seed.
    TfIdf {
        /// Vectorizer configuration.
        config: TfIdfConfig,
        /// Cache model identifier (carries the corpus fingerprint).
        cache_model_id: String,
        /// Fitted IDF weights per serialization seed.
        #[serde(with = "seed_key_map")]
        idf_per_seed: BTreeMap<u64, Vec<f64>>,
    },
}

impl StateBackend {
    /// The model id training vectors were cached under.
    pub fn cache_model_id(&self) -> &str {
        match self {
            StateBackend::Remote { model_id, .. } => model_id,
            StateBackend::TfIdf { cache_model_id, .. } => cache_model_id,
        }
    }
}

/// One training instance: its id and cache references per seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateInstance {
    /// Instance id.
    pub id: String,
    /// Hex SHA-256 of the serialized text, per seed.
    #[serde(with = "seed_key_map")]
    pub content_hash_per_seed: BTreeMap<u64, String>,
}

/// Frozen full-training-set selector state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedState {
    /// Format version of this structure.
    pub schema_version: u32,
    /// Scenario the state was trained on.
    pub scenario_name: String,
    /// Portfolio in order; selection prints these names.
    pub algorithms: Vec<String>,
    /// Scenario cutoff in seconds.
    pub cutoff_seconds: f64,
    /// k-NN configuration.
    pub selector: SelectorConfig,
    /// Character budget for query serialization.
    pub budget_chars: usize,
    /// Whether queries are line-shuffled.
    pub shuffle: bool,
    /// Serialization seeds voted over.
    pub seeds: Vec<u64>,
    /// Backend data.
    pub backend: StateBackend,
    /// Training instances with their cache references.
    pub instances: Vec<StateInstance>,
    /// PAR10 rows matching `instances`.
    pub par10_matrix: Vec<Vec<f64>>,
}

/// State load failures.
#[derive(Debug, Error)]
pub enum StateError {
    /// State file missing or unreadable.
    #[error("reading state {path}: {source}")]
    Io {
        /// Path involved.
        path: String,
        /// The underlying IO error.
        #[source]
        source: std::io::Error,
    },
    /// State file not valid JSON for this schema.
    #[error("state file {path}: {source}")]
    Parse {
        /// Path involved.
        path: String,
        /// The underlying parse error.
        #[source]
        source: serde_json::Error,
    },
    /// A referenced cache record is missing.
    #[error("state references instance {instance} seed {seed}, absent from the cache")]
    MissingCacheEntry {
        /// Instance id.
        instance: String,
        /// Serialization seed.
        seed: u64,
    },
    /// A referenced cache record is corrupt or the reference malformed.
    #[error(transparent)]
    Cache(#[from] CacheError),
    /// Internal inconsistency in the state file.
    #[error("inconsistent state: {0}")]
    Inconsistent(String),
}

impl TrainedState {
    /// Writes the state as JSON.
    pub fn save(&self, path: &Path) -> Result<(), StateError> {
        let json = serde_json::to_string_pretty(self).expect("state serializes");
        fs::write(path, json + "\n")
            .map_err(|source| StateError::Io { path: path.display().to_string(), source })
    }

    /// Reads a state file.
    pub fn load(path: &Path) -> Result<Self, StateError> {
        let text = fs::read_to_string(path)
            .map_err(|source| StateError::Io { path: path.display().to_string(), source })?;
        let state: Self = serde_json::from_str(&text)
            .map_err(|source| StateError::Parse { path: path.display().to_string(), source })?;
        if state.instances.len() != state.par10_matrix.len() {
            return Err(StateError::Inconsistent(
                "instance list and PAR10 matrix differ in length".into(),
            ));
        }
        Ok(state)
    }

    /// Resolves the per-seed training selectors through the cache.
    pub fn selectors(&self, cache_dir: &Path) -> Result<Vec<(u64, TrainedSelector)>, StateError> {
        let model_id = self.backend.cache_model_id();
        let mut out = Vec::with_capacity(self.seeds.len());
        for &seed in &self.seeds {
            let mut vectors: Vec<EmbeddingVector> = Vec::with_capacity(self.instances.len());
            for instance in &self.instances {
                let hex = instance.content_hash_per_seed.get(&seed).ok_or_else(|| {
                    StateError::Inconsistent(format!(
                        "instance {:?} lacks a reference for seed {seed}",
                        instance.id
                    ))
                })?;
                let key = CacheKey::from_hex(hex, model_id).ok_or_else(|| {
                    StateError::Inconsistent(format!("bad content hash {hex:?}"))
                })?;
                let vector = cache_get(&key, cache_dir)?.ok_or_else(|| {
                    StateError::MissingCacheEntry { instance: instance.id.clone(), seed }
                })?;
                vectors.push(vector);
            }
            let selector =
                TrainedSelector::new(vectors, self.par10_matrix.clone(), self.selector.clone())
                    .map_err(|e| StateError::Inconsistent(e.to_string()))?;
            out.push((seed, selector));
        }
        Ok(out)
    }
}
