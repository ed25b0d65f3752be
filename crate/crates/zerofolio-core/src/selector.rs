//! Weighted k-nearest-neighbor selection over embedding space.
//!
//! A test instance's embedding is compared against the training-fold
//! embeddings; each algorithm is scored as the weighted sum of its PAR10
//! values on the k nearest training instances, and the algorithm with the
//! lowest score wins. Inverse-distance weighting, Manhattan distance, and
//! k = 10 form the standard configuration.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::embedding::EmbeddingVector;
use crate::math;

/// Distance metric over embedding vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Metric {
    /// Sum of absolute coordinate differences.
    Manhattan,
    /// One minus the cosine of the angle between the vectors.
    Cosine,
}

/// Neighbor weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Weighting {
    /// `w_i = 1 / distance_i`, with the zero-distance rule below.
    InverseDistance,
    /// `w_i = 1`.
    Uniform,
}

/// k-NN configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectorConfig {
    /// Neighbor count; clamped to the training-set size at query time.
    pub k: usize,
    /// Distance metric.
    pub metric: Metric,
    /// Neighbor weighting.
    pub weighting: Weighting,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self { k: 10, metric: Metric::Manhattan, weighting: Weighting::InverseDistance }
    }
}

/// Errors from selector construction and queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectorError {
    /// Two vectors of different dimensionality met.
    DimensionMismatch {
        /// Dimensionality of the left / query side.
        left: usize,
        /// Dimensionality of the right / training side.
        right: usize,
    },
    /// Query against a selector with no training instances.
    EmptyTrainingSet,
    /// Two score vectors of different length met.
    LengthMismatch {
        /// Length of the left operand.
        left: usize,
        /// Length of the right operand.
        right: usize,
    },
    /// Hybrid weight outside `[0, 1]`.
    InvalidAlpha(f64),
    /// A PAR10 row had a different width than the algorithm count.
    RaggedPar10,
    /// A PAR10 value was negative or non-finite.
    BadPar10,
}

impl fmt::Display for SelectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorError::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            SelectorError::EmptyTrainingSet => write!(f, "training set is empty"),
            SelectorError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            SelectorError::InvalidAlpha(a) => write!(f, "alpha {a} outside [0, 1]"),
            SelectorError::RaggedPar10 => write!(f, "PAR10 rows have inconsistent widths"),
            SelectorError::BadPar10 => write!(f, "PAR10 values must be finite and non-negative"),
        }
    }
}

impl core::error::Error for SelectorError {}

/// Per-algorithm scores; lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmScores {
    /// One score per algorithm, in portfolio order.
    pub scores: Vec<f64>,
}

/// Manhattan (L1) distance.
pub fn manhattan_distance(a: &[f64], b: &[f64]) -> Result<f64, SelectorError> {
    if a.len() != b.len() {
        return Err(SelectorError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| math::abs(x - y)).sum())
}

/// Cosine distance `1 - a.b / (|a||b|)`; `1` when either vector is zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, SelectorError> {
    if a.len() != b.len() {
        return Err(SelectorError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - dot / (math::sqrt(na) * math::sqrt(nb)))
}

fn distance(metric: Metric, a: &[f64], b: &[f64]) -> Result<f64, SelectorError> {
    match metric {
        Metric::Manhattan => manhattan_distance(a, b),
        Metric::Cosine => cosine_distance(a, b),
    }
}

/// `(distance, training index)` ordered so a max-heap keeps the k smallest.
#[derive(PartialEq)]
struct HeapEntry {
    distance: f64,
    index: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Frozen training state of the k-NN selector: training-fold embeddings,
/// their PAR10 rows, and the query configuration. Immutable after
/// construction, so concurrent queries are safe.
#[derive(Debug, Clone)]
pub struct TrainedSelector {
    embeddings: Vec<EmbeddingVector>,
    par10_matrix: Vec<Vec<f64>>,
    config: SelectorConfig,
}

impl TrainedSelector {
    /// Builds a selector; `par10_matrix[i]` must be the PAR10 row of
    /// `embeddings[i]` and all rows must share one width.
    pub fn new(
        embeddings: Vec<EmbeddingVector>,
        par10_matrix: Vec<Vec<f64>>,
        config: SelectorConfig,
    ) -> Result<Self, SelectorError> {
        if embeddings.len() != par10_matrix.len() {
            return Err(SelectorError::LengthMismatch {
                left: embeddings.len(),
                right: par10_matrix.len(),
            });
        }
        if let Some(first) = par10_matrix.first() {
            let width = first.len();
            if par10_matrix.iter().any(|row| row.len() != width) {
                return Err(SelectorError::RaggedPar10);
            }
        }
        if par10_matrix.iter().flatten().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(SelectorError::BadPar10);
        }
        if let Some(first) = embeddings.first() {
            let dim = first.dim();
            if let Some(other) = embeddings.iter().find(|e| e.dim() != dim) {
                return Err(SelectorError::DimensionMismatch { left: dim, right: other.dim() });
            }
        }
        Ok(Self { embeddings, par10_matrix, config })
    }

    /// Number of training instances.
    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    /// True when there are no training instances.
    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    /// The configuration queries run with.
    pub fn config(&self) -> &SelectorConfig {
        &self.config
    }

    /// The PAR10 row of training instance `i`.
    pub fn par10_row(&self, i: usize) -> &[f64] {
        &self.par10_matrix[i]
    }
}

/// The `min(k, n)` nearest training instances, sorted by `(distance, index)`.
///
/// Ties in distance break toward the lower training index. Selection runs
/// through a bounded max-heap rather than a full sort, so the brute-force
/// oracle used in tests exercises an independent code path.
pub fn nearest_neighbors(
    query: &EmbeddingVector,
    sel: &TrainedSelector,
) -> Result<Vec<(usize, f64)>, SelectorError> {
    if sel.embeddings.is_empty() {
        return Err(SelectorError::EmptyTrainingSet);
    }
    let k = sel.config.k.max(1).min(sel.embeddings.len());
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
    for (index, e) in sel.embeddings.iter().enumerate() {
        let d = distance(sel.config.metric, query.values(), e.values())?;
        heap.push(HeapEntry { distance: d, index });
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut out: Vec<(usize, f64)> =
        heap.into_iter().map(|e| (e.index, e.distance)).collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Weighted per-algorithm scores from the query's nearest neighbors.
///
/// Inverse-distance weighting uses `w_i = 1 / d_i`. When any neighbor sits
/// at distance exactly zero, only the zero-distance neighbors participate,
/// with uniform weights: an exact duplicate dictates the answer, and `1/0`
/// never arises.
pub fn score_algorithms(
    query: &EmbeddingVector,
    sel: &TrainedSelector,
) -> Result<AlgorithmScores, SelectorError> {
    let neighbors = nearest_neighbors(query, sel)?;
    let n_algorithms = sel.par10_matrix[0].len();
    let mut scores = vec![0.0f64; n_algorithms];

    let weighted: Vec<(usize, f64)> = match sel.config.weighting {
        Weighting::Uniform => neighbors.into_iter().map(|(i, _)| (i, 1.0)).collect(),
        Weighting::InverseDistance => {
            if neighbors.iter().any(|&(_, d)| d == 0.0) {
                neighbors
                    .into_iter()
                    .filter(|&(_, d)| d == 0.0)
                    .map(|(i, _)| (i, 1.0))
                    .collect()
            } else {
                neighbors.into_iter().map(|(i, d)| (i, 1.0 / d)).collect()
            }
        }
    };

    for (i, w) in weighted {
        for (score, t) in scores.iter_mut().zip(&sel.par10_matrix[i]) {
            *score += w * t;
        }
    }
    Ok(AlgorithmScores { scores })
}

/// Index of the lowest score; ties break toward the lower algorithm index.
pub fn select(scores: &AlgorithmScores) -> usize {
    debug_assert!(!scores.scores.is_empty());
    let mut best = 0;
    for (i, &s) in scores.scores.iter().enumerate().skip(1) {
        if s < scores.scores[best] {
            best = i;
        }
    }
    best
}

/// Element-wise mean of per-seed score vectors (multi-seed soft voting).
pub fn vote_scores(per_seed: &[AlgorithmScores]) -> Result<AlgorithmScores, SelectorError> {
    let first = per_seed.first().ok_or(SelectorError::EmptyTrainingSet)?;
    let len = first.scores.len();
    let mut out = vec![0.0f64; len];
    for s in per_seed {
        if s.scores.len() != len {
            return Err(SelectorError::LengthMismatch { left: len, right: s.scores.len() });
        }
        for (o, v) in out.iter_mut().zip(&s.scores) {
            *o += v;
        }
    }
    let n = per_seed.len() as f64;
    for o in out.iter_mut() {
        *o /= n;
    }
    Ok(AlgorithmScores { scores: out })
}

/// Min-max normalizes a score vector to `[0, 1]`; constant vectors map to
/// all-zeros.
fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in scores {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let range = hi - lo;
    if range == 0.0 || scores.is_empty() {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|&s| (s - lo) / range).collect()
}

/// Soft-voting fusion of two selectors' scores: each side is min-max
/// normalized over its own entries, then combined as
/// `alpha * norm(a) + (1 - alpha) * norm(b)`.
pub fn hybrid_soft_vote(
    a: &AlgorithmScores,
    b: &AlgorithmScores,
    alpha: f64,
) -> Result<AlgorithmScores, SelectorError> {
    if a.scores.len() != b.scores.len() {
        return Err(SelectorError::LengthMismatch { left: a.scores.len(), right: b.scores.len() });
    }
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(SelectorError::InvalidAlpha(alpha));
    }
    let na = min_max_normalize(&a.scores);
    let nb = min_max_normalize(&b.scores);
    let scores = na
        .iter()
        .zip(&nb)
        .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
        .collect();
    Ok(AlgorithmScores { scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    fn selector(
        points: &[&[f64]],
        par10: &[&[f64]],
        config: SelectorConfig,
    ) -> TrainedSelector {
        TrainedSelector::new(
            points.iter().map(|p| vector(p)).collect(),
            par10.iter().map(|r| r.to_vec()).collect(),
            config,
        )
        .unwrap()
    }

    fn knn_config(k: usize) -> SelectorConfig {
        SelectorConfig { k, ..SelectorConfig::default() }
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(manhattan_distance(&[0.0, 0.0], &[3.0, -4.0]).unwrap(), 7.0);
        assert!(matches!(
            manhattan_distance(&[1.0], &[1.0, 2.0]),
            Err(SelectorError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_distance(&[1.0, 0.0], &[2.0, 0.0]).unwrap()).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 1.0], &[-1.0, -1.0]).unwrap() - 2.0).abs() < 1e-15);
        // Zero vector: maximal dissimilarity by convention.
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn exact_match_neighbor() {
        let sel = selector(
            &[&[0.0], &[1.0], &[2.0], &[3.0]],
            &[&[1.0], &[1.0], &[1.0], &[1.0]],
            knn_config(1),
        );
        let got = nearest_neighbors(&vector(&[3.0]), &sel).unwrap();
        assert_eq!(got, vec![(3, 0.0)]);
    }

    #[test]
    fn equidistant_ties_break_by_index() {
        let points: Vec<&[f64]> = vec![&[1.0], &[-1.0], &[1.0], &[-1.0], &[1.0]];
        let rows: Vec<&[f64]> = vec![&[0.0]; 5];
        let sel = selector(&points, &rows, knn_config(2));
        let got = nearest_neighbors(&vector(&[0.0]), &sel).unwrap();
        assert_eq!(got.iter().map(|&(i, _)| i).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn empty_training_set_errors() {
        let sel =
            TrainedSelector::new(Vec::new(), Vec::new(), knn_config(3)).unwrap();
        assert!(matches!(
            nearest_neighbors(&vector(&[0.0]), &sel),
            Err(SelectorError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn k_clamps_to_training_size() {
        let sel = selector(&[&[0.0], &[1.0]], &[&[1.0], &[2.0]], knn_config(10));
        assert_eq!(nearest_neighbors(&vector(&[0.5]), &sel).unwrap().len(), 2);
    }

    #[test]
    fn inverse_distance_scoring() {
        // One neighbor at distance 2 with PAR10 row [100, 50] -> [50, 25].
        let sel = selector(&[&[2.0]], &[&[100.0, 50.0]], knn_config(1));
        let scores = score_algorithms(&vector(&[0.0]), &sel).unwrap();
        assert_eq!(scores.scores, vec![50.0, 25.0]);
        assert_eq!(select(&scores), 1);
    }

    #[test]
    fn uniform_scoring_is_a_plain_sum() {
        let sel = selector(
            &[&[0.0], &[1.0]],
            &[&[10.0, 20.0], &[30.0, 0.0]],
            SelectorConfig { k: 2, metric: Metric::Manhattan, weighting: Weighting::Uniform },
        );
        let scores = score_algorithms(&vector(&[0.5]), &sel).unwrap();
        assert_eq!(scores.scores, vec![40.0, 20.0]);
    }

    #[test]
    fn zero_distance_rule() {
        // Query coincides with training point 1; its row alone decides.
        let sel = selector(
            &[&[5.0], &[0.0], &[0.1]],
            &[&[1.0, 0.0], &[7.0, 9.0], &[1000.0, 0.0]],
            knn_config(3),
        );
        let scores = score_algorithms(&vector(&[0.0]), &sel).unwrap();
        assert_eq!(scores.scores, vec![7.0, 9.0]);
    }

    #[test]
    fn select_argmin_and_tie_break() {
        assert_eq!(select(&AlgorithmScores { scores: vec![3.0, 1.0, 2.0] }), 1);
        assert_eq!(select(&AlgorithmScores { scores: vec![1.0, 1.0] }), 0);
    }

    #[test]
    fn vote_is_elementwise_mean() {
        let a = AlgorithmScores { scores: vec![2.0, 4.0] };
        let b = AlgorithmScores { scores: vec![4.0, 8.0] };
        assert_eq!(vote_scores(core::slice::from_ref(&a)).unwrap().scores, vec![2.0, 4.0]);
        assert_eq!(vote_scores(&[a.clone(), b]).unwrap().scores, vec![3.0, 6.0]);
        let c = AlgorithmScores { scores: vec![1.0] };
        assert!(matches!(
            vote_scores(&[a, c]),
            Err(SelectorError::LengthMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn hybrid_examples() {
        let a = AlgorithmScores { scores: vec![0.0, 10.0] };
        let b = AlgorithmScores { scores: vec![10.0, 0.0] };
        let mixed = hybrid_soft_vote(&a, &b, 0.5).unwrap();
        assert_eq!(mixed.scores, vec![0.5, 0.5]);

        // alpha = 1 recovers norm(a).
        let only_a = hybrid_soft_vote(&a, &b, 1.0).unwrap();
        assert_eq!(only_a.scores, vec![0.0, 1.0]);

        // Same argmin when fused with itself.
        let same = hybrid_soft_vote(&a, &a, 0.5).unwrap();
        assert_eq!(select(&same), select(&a));

        assert!(matches!(
            hybrid_soft_vote(&a, &b, 1.5),
            Err(SelectorError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn hybrid_constant_vector_normalizes_to_zero() {
        let a = AlgorithmScores { scores: vec![4.0, 4.0, 4.0] };
        let b = AlgorithmScores { scores: vec![1.0, 2.0, 3.0] };
        let mixed = hybrid_soft_vote(&a, &b, 0.5).unwrap();
        assert_eq!(mixed.scores, vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn rejects_negative_par10() {
        let err = TrainedSelector::new(
            vec![vector(&[0.0])],
            vec![vec![-1.0]],
            knn_config(1),
        )
        .unwrap_err();
        assert_eq!(err, SelectorError::BadPar10);
    }
}
