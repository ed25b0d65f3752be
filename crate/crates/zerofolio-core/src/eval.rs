//! Cross-validated evaluation of selectors over a scenario's fold splits.
//!
//! For each fold, every component is fitted on the training folds only (TF-IDF
//! corpus, k-NN training set, feature preprocessor, random forest) and the
//! selected algorithm's PAR10 is recorded per test instance. Folds are
//! independent; with the `parallel` feature they are evaluated concurrently
//! and still produce identical results.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::embedding::EmbeddingVector;
use crate::forest::{
    apply_preprocessor, fit_preprocessor, rf_train, rf_votes, single_best, ColumnMismatch,
    FeaturePreprocessor, RandomForestConfig,
};
use crate::scenario::Scenario;
use crate::selector::{
    hybrid_soft_vote, score_algorithms, select, vote_scores, AlgorithmScores, SelectorConfig,
    SelectorError, TrainedSelector,
};
use crate::tfidf::{tfidf_embed, tfidf_fit, TfIdfConfig};

/// Per-instance embedding data, keyed by `(instance index, seed)`.
///
/// Either precomputed vectors (remote backend, cache, or direct injection in
/// tests) or serialized texts to be TF-IDF-embedded per fold, fitting on the
/// training fold only.
#[derive(Debug, Clone)]
pub enum EmbeddingSource {
    /// Precomputed vectors per `(instance, seed)`.
    Vectors(BTreeMap<(usize, u64), EmbeddingVector>),
    /// Serialized texts per `(instance, seed)`; the TF-IDF model is refitted
    /// on each fold's training texts.
    TfIdfTexts {
        /// Serialized instance texts.
        texts: BTreeMap<(usize, u64), String>,
        /// Vectorizer configuration.
        config: TfIdfConfig,
    },
}

impl EmbeddingSource {
    /// Instances that have data for every seed in `seeds`.
    pub fn coverage(&self, seeds: &[u64]) -> BTreeSet<usize> {
        let has = |instance: usize, seed: u64| match self {
            EmbeddingSource::Vectors(map) => map.contains_key(&(instance, seed)),
            EmbeddingSource::TfIdfTexts { texts, .. } => texts.contains_key(&(instance, seed)),
        };
        let all: BTreeSet<usize> = match self {
            EmbeddingSource::Vectors(map) => map.keys().map(|&(i, _)| i).collect(),
            EmbeddingSource::TfIdfTexts { texts, .. } => texts.keys().map(|&(i, _)| i).collect(),
        };
        all.into_iter()
            .filter(|&i| seeds.iter().all(|&s| has(i, s)))
            .collect()
    }

    /// Vectors for one seed over `train` and `query` instances. In TF-IDF
    /// mode the model is fitted on the training texts alone.
    fn vectors_for(
        &self,
        seed: u64,
        train: &[usize],
        query: &[usize],
    ) -> Result<(Vec<EmbeddingVector>, BTreeMap<usize, EmbeddingVector>), EvalError> {
        match self {
            EmbeddingSource::Vectors(map) => {
                let lookup = |i: usize| {
                    map.get(&(i, seed))
                        .cloned()
                        .ok_or(EvalError::MissingEmbedding { instance: i, seed })
                };
                let train_vecs = train.iter().map(|&i| lookup(i)).collect::<Result<_, _>>()?;
                let query_vecs = query
                    .iter()
                    .map(|&i| Ok((i, lookup(i)?)))
                    .collect::<Result<_, EvalError>>()?;
                Ok((train_vecs, query_vecs))
            }
            EmbeddingSource::TfIdfTexts { texts, config } => {
                let lookup = |i: usize| {
                    texts
                        .get(&(i, seed))
                        .ok_or(EvalError::MissingEmbedding { instance: i, seed })
                };
                let corpus: Vec<&str> =
                    train.iter().map(|&i| lookup(i).map(String::as_str)).collect::<Result<_, _>>()?;
                if corpus.is_empty() {
                    return Err(EvalError::Selector(SelectorError::EmptyTrainingSet));
                }
                let model = tfidf_fit(&corpus, config);
                let train_vecs = corpus.iter().map(|t| tfidf_embed(t, &model)).collect();
                let query_vecs = query
                    .iter()
                    .map(|&i| Ok((i, tfidf_embed(lookup(i)?, &model))))
                    .collect::<Result<BTreeMap<_, _>, EvalError>>()?;
                Ok((train_vecs, query_vecs))
            }
        }
    }
}

/// Which selector to evaluate.
#[derive(Debug, Clone)]
pub enum SelectorSpec {
    /// Training-fold single best solver applied to every test instance.
    SingleBest,
    /// Embedding k-NN with multi-seed soft voting.
    KnnEmbedding {
        /// k-NN configuration.
        config: SelectorConfig,
        /// Serialization seeds to vote over; one seed means no voting.
        seeds: Vec<u64>,
    },
    /// Random forest on hand-crafted features.
    RandomForest {
        /// Forest configuration.
        config: RandomForestConfig,
    },
    /// Soft-voting fusion of the embedding k-NN and the random forest.
    Hybrid {
        /// Weight of the k-NN side in `[0, 1]`.
        alpha: f64,
        /// k-NN configuration.
        knn: SelectorConfig,
        /// Serialization seeds for the k-NN side.
        seeds: Vec<u64>,
        /// Forest configuration.
        rf: RandomForestConfig,
    },
    /// k-NN over embeddings concatenated with standardized features.
    ConcatKnn {
        /// k-NN configuration.
        config: SelectorConfig,
        /// Serialization seeds to vote over.
        seeds: Vec<u64>,
    },
}

impl SelectorSpec {
    /// Seeds this spec needs embedding data for.
    pub fn seeds(&self) -> &[u64] {
        match self {
            SelectorSpec::SingleBest | SelectorSpec::RandomForest { .. } => &[],
            SelectorSpec::KnnEmbedding { seeds, .. }
            | SelectorSpec::Hybrid { seeds, .. }
            | SelectorSpec::ConcatKnn { seeds, .. } => seeds,
        }
    }
}

/// Evaluation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// The embedding source covers no test instance.
    NoEmbeddableInstances,
    /// The source lacks data for an instance/seed pair it should cover.
    MissingEmbedding {
        /// Instance index.
        instance: usize,
        /// Serialization seed.
        seed: u64,
    },
    /// Propagated selector error.
    Selector(SelectorError),
    /// Propagated feature-width error.
    Column(ColumnMismatch),
    /// A concatenated query/training vector picked up a non-finite value.
    NonFiniteVector,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::NoEmbeddableInstances => {
                write!(f, "the embedding source covers no test instance")
            }
            EvalError::MissingEmbedding { instance, seed } => {
                write!(f, "no embedding data for instance {instance} at seed {seed}")
            }
            EvalError::Selector(e) => write!(f, "{e}"),
            EvalError::Column(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EvalError {}

impl From<SelectorError> for EvalError {
    fn from(e: SelectorError) -> Self {
        EvalError::Selector(e)
    }
}

impl From<ColumnMismatch> for EvalError {
    fn from(e: ColumnMismatch) -> Self {
        EvalError::Column(e)
    }
}

/// One fold's outcome: per test instance, the chosen algorithm and its PAR10.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    /// Fold index in `1..=fold_count`.
    pub fold: u32,
    /// instance index -> (algorithm index, PAR10).
    pub per_instance: BTreeMap<usize, (usize, f64)>,
}

impl FoldResult {
    /// Mean PAR10 over this fold's test instances; `None` when empty.
    pub fn mean_par10(&self) -> Option<f64> {
        if self.per_instance.is_empty() {
            return None;
        }
        let sum: f64 = self.per_instance.values().map(|&(_, p)| p).sum();
        Some(sum / self.per_instance.len() as f64)
    }
}

/// Instance-weighted mean PAR10 pooled over all folds' test instances.
pub fn overall_par10(results: &[FoldResult]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in results {
        for &(_, p) in r.per_instance.values() {
            sum += p;
        }
        count += r.per_instance.len();
    }
    debug_assert!(count > 0, "overall_par10 over empty results");
    sum / count as f64
}

/// `(fold, instance count, mean PAR10)` per non-empty fold.
pub fn fold_means(results: &[FoldResult]) -> Vec<(u32, usize, f64)> {
    results
        .iter()
        .filter_map(|r| r.mean_par10().map(|m| (r.fold, r.per_instance.len(), m)))
        .collect()
}

/// Pooled mean of the per-instance oracle PAR10 over `instances`.
pub fn pooled_vbs(scenario: &Scenario, instances: &BTreeSet<usize>) -> f64 {
    debug_assert!(!instances.is_empty());
    let sum: f64 = instances
        .iter()
        .map(|&i| crate::forest::virtual_best_par10_by_index(scenario, i))
        .sum();
    sum / instances.len() as f64
}

/// Pooled-mean PAR10 of always playing `algorithm` on `instances`.
pub fn pooled_fixed_algorithm(
    scenario: &Scenario,
    instances: &BTreeSet<usize>,
    algorithm: usize,
) -> f64 {
    debug_assert!(!instances.is_empty());
    let sum: f64 = instances.iter().map(|&i| scenario.par10_of(i, algorithm)).sum();
    sum / instances.len() as f64
}

fn training_instances(scenario: &Scenario, fold: u32) -> Vec<usize> {
    (0..scenario.instances().len())
        .filter(|&i| scenario.fold_of(i) != fold)
        .collect()
}

/// The per-instance argmin-PAR10 label used to train the classifier; ties
/// break toward the lower algorithm index.
pub fn best_algorithm_label(scenario: &Scenario, instance: usize) -> usize {
    let row = scenario.par10_row(instance);
    let mut best = 0;
    for (a, &p) in row.iter().enumerate().skip(1) {
        if p < row[best] {
            best = a;
        }
    }
    best
}

struct FittedForest {
    pre: FeaturePreprocessor,
    model: Option<crate::forest::RandomForestModel>,
    fallback: usize,
}

impl FittedForest {
    fn fit(
        scenario: &Scenario,
        train_full: &[usize],
        cfg: &RandomForestConfig,
    ) -> Result<Self, EvalError> {
        let fallback = single_best(scenario, &train_full.iter().copied().collect());
        let usable: Vec<usize> = train_full
            .iter()
            .copied()
            .filter(|&i| {
                scenario
                    .features_of(i)
                    .is_some_and(|row| row.iter().any(Option::is_some))
            })
            .collect();
        if usable.is_empty() {
            return Ok(Self { pre: fit_preprocessor(&[])?, model: None, fallback });
        }
        let raw: Vec<Vec<Option<f64>>> = usable
            .iter()
            .map(|&i| scenario.features_of(i).unwrap().to_vec())
            .collect();
        let pre = fit_preprocessor(&raw)?;
        let rows: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| apply_preprocessor(&pre, r))
            .collect::<Result<_, _>>()?;
        let labels: Vec<usize> =
            usable.iter().map(|&i| best_algorithm_label(scenario, i)).collect();
        let model = rf_train(&rows, &labels, scenario.algorithms().len(), cfg);
        Ok(Self { pre, model: Some(model), fallback })
    }

    /// Lower-is-better per-algorithm scores; instances without usable
    /// features score as a one-hot on the training-fold single best.
    fn scores(&self, scenario: &Scenario, instance: usize) -> Result<AlgorithmScores, EvalError> {
        let n_algorithms = scenario.algorithms().len();
        let features = scenario
            .features_of(instance)
            .filter(|row| row.iter().any(Option::is_some));
        if let (Some(model), Some(row)) = (&self.model, features) {
            let dense = apply_preprocessor(&self.pre, row)?;
            let votes = rf_votes(model, &dense)?;
            let n_trees = model.n_trees() as f64;
            let scores = votes.iter().map(|&v| n_trees - v as f64).collect();
            return Ok(AlgorithmScores { scores });
        }
        let mut scores = alloc::vec![1.0f64; n_algorithms];
        scores[self.fallback] = 0.0;
        Ok(AlgorithmScores { scores })
    }
}

/// Per-seed k-NN selectors trained on one fold's training instances.
struct FittedKnn {
    per_seed: Vec<(u64, TrainedSelector, BTreeMap<usize, EmbeddingVector>)>,
}

impl FittedKnn {
    fn fit(
        scenario: &Scenario,
        source: &EmbeddingSource,
        config: &SelectorConfig,
        seeds: &[u64],
        train: &[usize],
        test: &[usize],
        concat_features: bool,
    ) -> Result<Self, EvalError> {
        let pre = if concat_features {
            let raw: Vec<Vec<Option<f64>>> = train
                .iter()
                .map(|&i| feature_row_or_missing(scenario, i))
                .collect();
            Some(fit_preprocessor(&raw)?)
        } else {
            None
        };
        let par10_rows: Vec<Vec<f64>> = train.iter().map(|&i| scenario.par10_row(i)).collect();
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let (train_vecs, query_vecs) = source.vectors_for(seed, train, test)?;
            let (train_vecs, query_vecs) = if let Some(pre) = &pre {
                let widen = |i: usize, v: &EmbeddingVector| -> Result<EmbeddingVector, EvalError> {
                    let extra = apply_preprocessor(pre, &feature_row_or_missing(scenario, i))?;
                    let mut values = v.values().to_vec();
                    values.extend(extra);
                    EmbeddingVector::new(values)
                        .map_err(|_| EvalError::Selector(SelectorError::EmptyTrainingSet))
                };
                let t = train
                    .iter()
                    .zip(&train_vecs)
                    .map(|(&i, v)| widen(i, v))
                    .collect::<Result<Vec<_>, _>>()?;
                let q = query_vecs
                    .iter()
                    .map(|(&i, v)| Ok((i, widen(i, v)?)))
                    .collect::<Result<BTreeMap<_, _>, EvalError>>()?;
                (t, q)
            } else {
                (train_vecs, query_vecs)
            };
            let selector = TrainedSelector::new(train_vecs, par10_rows.clone(), config.clone())?;
            per_seed.push((seed, selector, query_vecs));
        }
        Ok(Self { per_seed })
    }

    fn scores(&self, instance: usize) -> Result<AlgorithmScores, EvalError> {
        let per_seed: Vec<AlgorithmScores> = self
            .per_seed
            .iter()
            .map(|(seed, selector, queries)| {
                let query = queries
                    .get(&instance)
                    .ok_or(EvalError::MissingEmbedding { instance, seed: *seed })?;
                Ok(score_algorithms(query, selector)?)
            })
            .collect::<Result<_, EvalError>>()?;
        Ok(vote_scores(&per_seed)?)
    }
}

fn feature_row_or_missing(scenario: &Scenario, instance: usize) -> Vec<Option<f64>> {
    match scenario.features_of(instance) {
        Some(row) => row.to_vec(),
        None => {
            let width = (0..scenario.instances().len())
                .find_map(|i| scenario.features_of(i).map(<[Option<f64>]>::len))
                .unwrap_or(0);
            alloc::vec![None; width]
        }
    }
}

/// Evaluates one selector on one fold: fit on `fold != fold` instances,
/// select on the fold's eligible test instances.
pub fn evaluate_fold(
    scenario: &Scenario,
    source: &EmbeddingSource,
    eligible: &BTreeSet<usize>,
    spec: &SelectorSpec,
    fold: u32,
) -> Result<FoldResult, EvalError> {
    let test: Vec<usize> = eligible
        .iter()
        .copied()
        .filter(|&i| scenario.fold_of(i) == fold)
        .collect();
    let train_full = training_instances(scenario, fold);
    let train_embedded: Vec<usize> = train_full
        .iter()
        .copied()
        .filter(|i| eligible.contains(i))
        .collect();
    debug_assert!(
        train_full.iter().all(|&i| scenario.fold_of(i) != fold),
        "training set leaked a test-fold instance"
    );

    let mut per_instance = BTreeMap::new();
    if test.is_empty() {
        return Ok(FoldResult { fold, per_instance });
    }

    match spec {
        SelectorSpec::SingleBest => {
            let pick = single_best(scenario, &train_full.iter().copied().collect());
            for &i in &test {
                per_instance.insert(i, (pick, scenario.par10_of(i, pick)));
            }
        }
        SelectorSpec::KnnEmbedding { config, seeds } => {
            let knn = FittedKnn::fit(
                scenario,
                source,
                config,
                seeds,
                &train_embedded,
                &test,
                false,
            )?;
            for &i in &test {
                let pick = select(&knn.scores(i)?);
                per_instance.insert(i, (pick, scenario.par10_of(i, pick)));
            }
        }
        SelectorSpec::ConcatKnn { config, seeds } => {
            let knn = FittedKnn::fit(
                scenario,
                source,
                config,
                seeds,
                &train_embedded,
                &test,
                true,
            )?;
            for &i in &test {
                let pick = select(&knn.scores(i)?);
                per_instance.insert(i, (pick, scenario.par10_of(i, pick)));
            }
        }
        SelectorSpec::RandomForest { config } => {
            let forest = FittedForest::fit(scenario, &train_full, config)?;
            for &i in &test {
                let pick = select(&forest.scores(scenario, i)?);
                per_instance.insert(i, (pick, scenario.par10_of(i, pick)));
            }
        }
        SelectorSpec::Hybrid { alpha, knn, seeds, rf } => {
            let fitted_knn = FittedKnn::fit(
                scenario,
                source,
                knn,
                seeds,
                &train_embedded,
                &test,
                false,
            )?;
            let forest = FittedForest::fit(scenario, &train_full, rf)?;
            for &i in &test {
                let fused = hybrid_soft_vote(
                    &fitted_knn.scores(i)?,
                    &forest.scores(scenario, i)?,
                    *alpha,
                )?;
                let pick = select(&fused);
                per_instance.insert(i, (pick, scenario.par10_of(i, pick)));
            }
        }
    }
    Ok(FoldResult { fold, per_instance })
}

/// Evaluates a selector across every fold of the scenario.
///
/// `eligible` restricts test instances to those the embedding source covers,
/// so all selectors share one denominator; it errors with
/// [`EvalError::NoEmbeddableInstances`] when empty.
pub fn cross_validate(
    scenario: &Scenario,
    source: &EmbeddingSource,
    eligible: &BTreeSet<usize>,
    spec: &SelectorSpec,
) -> Result<Vec<FoldResult>, EvalError> {
    if eligible.is_empty() {
        return Err(EvalError::NoEmbeddableInstances);
    }
    let folds: Vec<u32> = (1..=scenario.fold_count()).collect();

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        folds
            .par_iter()
            .map(|&f| evaluate_fold(scenario, source, eligible, spec, f))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        folds
            .iter()
            .map(|&f| evaluate_fold(scenario, source, eligible, spec, f))
            .collect()
    }
}
