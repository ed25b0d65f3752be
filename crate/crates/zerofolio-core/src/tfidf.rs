//! Deterministic offline embedding backend: hashed character n-grams with
//! TF-IDF weighting.
//!
//! This backend exists so the selection pipeline can run with no network
//! access and fully reproducible vectors: the n-gram hash is pinned to 64-bit
//! FNV-1a over the n-gram's UTF-8 bytes, and the bucket is the hash modulo
//! the configured dimensionality. Fixed corpus and configuration give
//! bit-identical vectors on every platform.

use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::EmbeddingVector;
use crate::math;

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in data {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Configuration of the hashed TF-IDF vectorizer.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TfIdfConfig {
    /// Output dimensionality (number of hash buckets).
    pub dimensions: usize,
    /// Smallest character n-gram length, inclusive.
    pub ngram_min: usize,
    /// Largest character n-gram length, inclusive.
    pub ngram_max: usize,
}

impl Default for TfIdfConfig {
    fn default() -> Self {
        Self { dimensions: 3072, ngram_min: 2, ngram_max: 4 }
    }
}

/// IDF weights fitted on a corpus; apply with [`tfidf_embed`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TfIdfModel {
    config: TfIdfConfig,
    idf: Vec<f64>,
}

impl TfIdfModel {
    /// Rebuilds a model from its stored IDF weights (e.g. persisted state).
    pub fn from_parts(config: TfIdfConfig, idf: Vec<f64>) -> Option<Self> {
        (idf.len() == config.dimensions).then_some(Self { config, idf })
    }

    /// The fitted per-bucket IDF weights.
    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// The configuration the model was fitted with.
    pub fn config(&self) -> &TfIdfConfig {
        &self.config
    }
}

/// Calls `bucket` for every character n-gram of `text` in the configured
/// length range. Buckets are `fnv1a64(ngram bytes) % dimensions`.
fn for_each_bucket(text: &str, config: &TfIdfConfig, mut bucket: impl FnMut(usize)) {
    debug_assert!(config.dimensions >= 1);
    debug_assert!(config.ngram_min >= 1 && config.ngram_min <= config.ngram_max);
    // Byte offsets of every char boundary, so n-grams slice without copying.
    let boundaries: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(core::iter::once(text.len()))
        .collect();
    let n_chars = boundaries.len() - 1;
    for n in config.ngram_min..=config.ngram_max {
        if n > n_chars {
            break;
        }
        for start in 0..=(n_chars - n) {
            let gram = &text[boundaries[start]..boundaries[start + n]];
            bucket((fnv1a64(gram.as_bytes()) % config.dimensions as u64) as usize);
        }
    }
}

/// Fits IDF weights on a corpus.
///
/// Bucket `j` gets weight `ln((1 + N) / (1 + df_j)) + 1`, where `N` is the
/// corpus size and `df_j` counts documents containing at least one n-gram
/// hashing to `j`. Buckets no document touches also get that weight (with
/// `df = 0`); they never contribute to an embedding anyway since their term
/// frequency is zero.
pub fn tfidf_fit<S: AsRef<str>>(corpus: &[S], config: &TfIdfConfig) -> TfIdfModel {
    debug_assert!(!corpus.is_empty());
    let mut df = vec![0u32; config.dimensions];
    let mut seen = vec![false; config.dimensions];
    for doc in corpus {
        for flag in seen.iter_mut() {
            *flag = false;
        }
        for_each_bucket(doc.as_ref(), config, |j| {
            if !seen[j] {
                seen[j] = true;
                df[j] += 1;
            }
        });
    }
    let n = corpus.len() as f64;
    let idf = df
        .iter()
        .map(|&d| math::ln((1.0 + n) / (1.0 + f64::from(d))) + 1.0)
        .collect();
    TfIdfModel { config: config.clone(), idf }
}

/// Embeds one text with a fitted model: raw n-gram counts per bucket times
/// IDF, then L2-normalized. A text with no n-grams embeds to the zero vector.
pub fn tfidf_embed(text: &str, model: &TfIdfModel) -> EmbeddingVector {
    let mut values = vec![0.0f64; model.config.dimensions];
    for_each_bucket(text, &model.config, |j| values[j] += 1.0);
    let mut norm_sq = 0.0;
    for (v, idf) in values.iter_mut().zip(&model.idf) {
        *v *= idf;
        norm_sq += *v * *v;
    }
    if norm_sq > 0.0 {
        let norm = math::sqrt(norm_sq);
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
    EmbeddingVector::new(values).expect("tf-idf vectors are finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn cfg(dimensions: usize, lo: usize, hi: usize) -> TfIdfConfig {
        TfIdfConfig { dimensions, ngram_min: lo, ngram_max: hi }
    }

    #[test]
    fn fnv1a64_pinned_values() {
        // Frozen from an independent FNV-1a implementation.
        assert_eq!(fnv1a64(b"aa"), 0x089c_4307_b545_96b7);
        assert_eq!(fnv1a64(b"bb"), 0x08a6_3607_b54d_d525);
        assert_eq!(fnv1a64(b"ab"), 0x089c_4407_b545_986a);
        assert_eq!(fnv1a64(b"aa") % 3072, 695);
        assert_eq!(fnv1a64(b"bb") % 3072, 293);
        assert_eq!(fnv1a64(b"ab") % 3072, 2154);
    }

    #[test]
    fn uniform_corpus_has_idf_one() {
        let model = tfidf_fit(&["ab", "ab"], &cfg(64, 2, 2));
        // df = N = 2 for the occupied bucket: ln(3/3) + 1 = 1.
        let j = (fnv1a64(b"ab") % 64) as usize;
        assert!((model.idf()[j] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_document_corpus_has_idf_one() {
        let model = tfidf_fit(&["xyz"], &cfg(128, 2, 3));
        let j = (fnv1a64(b"xy") % 128) as usize;
        assert!((model.idf()[j] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_corpus_idf_value() {
        // df = 1 for each of "aa" and "bb" in a 2-document corpus:
        // ln(3/2) + 1 = 1.4054651081081644 (hand computation).
        let model = tfidf_fit(&["aa", "bb"], &cfg(3072, 2, 2));
        for gram in [b"aa", b"bb"] {
            let j = (fnv1a64(gram) % 3072) as usize;
            assert!((model.idf()[j] - 1.405_465_108_108_164_4).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_text_embeds_to_zero_vector() {
        let model = tfidf_fit(&["abc"], &cfg(32, 2, 4));
        let v = tfidf_embed("", &model);
        assert_eq!(v.dim(), 32);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_bucket_text_normalizes_to_unit() {
        // All 2-grams of "aaaa" are "aa": one occupied bucket.
        let model = tfidf_fit(&["aaaa"], &cfg(64, 2, 2));
        let v = tfidf_embed("aaaa", &model);
        let nonzero: Vec<f64> = v.values().iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_equal_weight_buckets() {
        // "aab" has 2-grams "aa" and "ab"; buckets 695 and 2154 do not
        // collide at 3072 dimensions; IDF = 1 on a single-document corpus,
        // so each entry is 1/sqrt(2).
        let model = tfidf_fit(&["aab"], &cfg(3072, 2, 2));
        let v = tfidf_embed("aab", &model);
        let expected = 1.0 / 2.0f64.sqrt();
        assert!((v.values()[695] - expected).abs() < 1e-15);
        assert!((v.values()[2154] - expected).abs() < 1e-15);
    }

    #[test]
    fn deterministic_across_runs() {
        let corpus: Vec<String> =
            (0..20).map(|i| "line ".repeat(i % 5 + 1) + &i.to_string()).collect();
        let a = tfidf_fit(&corpus, &TfIdfConfig::default());
        let b = tfidf_fit(&corpus, &TfIdfConfig::default());
        assert_eq!(a, b);
        assert_eq!(tfidf_embed(&corpus[7], &a), tfidf_embed(&corpus[7], &b));
    }

    #[test]
    fn multibyte_ngrams_do_not_panic() {
        let model = tfidf_fit(&["héllo wörld"], &cfg(256, 2, 4));
        let v = tfidf_embed("héllo", &model);
        assert_eq!(v.dim(), 256);
    }
}
