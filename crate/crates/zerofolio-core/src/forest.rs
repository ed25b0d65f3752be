//! Reference selectors: single best solver, virtual best solver, and a
//! random-forest classifier over hand-crafted scenario features.
//!
//! The forest is grown from scratch so training is bit-reproducible from the
//! seed alone: every tree owns a splitmix64 sub-generator derived from
//! `seed + tree_index`, which makes parallel and serial training agree.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::rng::SplitMix64;
use crate::scenario::{Scenario, ScenarioError};

/// Mean-PAR10 winner over a training set: the no-selection baseline.
///
/// Ties break toward the lower algorithm index. `train_instances` must be
/// non-empty.
pub fn single_best(scenario: &Scenario, train_instances: &BTreeSet<usize>) -> usize {
    assert!(!train_instances.is_empty(), "single_best needs a non-empty training set");
    let n_algorithms = scenario.algorithms().len();
    let mut totals = vec![0.0f64; n_algorithms];
    for &i in train_instances {
        for (total, &p) in totals.iter_mut().zip(scenario.par10_row(i).iter()) {
            *total += p;
        }
    }
    let mut best = 0;
    for (a, &t) in totals.iter().enumerate().skip(1) {
        if t < totals[best] {
            best = a;
        }
    }
    best
}

/// Oracle PAR10 of an instance: the minimum over the portfolio.
pub fn virtual_best_par10(scenario: &Scenario, instance_id: &str) -> Result<f64, ScenarioError> {
    let idx = scenario
        .instance_index(instance_id)
        .ok_or_else(|| ScenarioError::UnknownInstance(instance_id.into()))?;
    Ok(virtual_best_par10_by_index(scenario, idx))
}

/// [`virtual_best_par10`] by instance index.
pub fn virtual_best_par10_by_index(scenario: &Scenario, instance: usize) -> f64 {
    scenario
        .par10_row(instance)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Feature-column mismatch against the fitted preprocessor or model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnMismatch {
    /// Columns the row actually has.
    pub got: usize,
    /// Columns the fit expects.
    pub want: usize,
}

impl fmt::Display for ColumnMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected {} feature columns, got {}", self.want, self.got)
    }
}

impl core::error::Error for ColumnMismatch {}

/// Median imputation followed by standard scaling, fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeaturePreprocessor {
    medians: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl FeaturePreprocessor {
    /// Number of feature columns.
    pub fn columns(&self) -> usize {
        self.medians.len()
    }

    /// The per-column imputation values.
    pub fn medians(&self) -> &[f64] {
        &self.medians
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Fits imputation medians and scaling parameters on training rows.
///
/// Missing entries are ignored for the median; scaling statistics are
/// computed after imputation (population standard deviation). A column that
/// is entirely missing in training gets median 0, mean 0, std 1, so every
/// imputed entry scales to exactly 0.
pub fn fit_preprocessor(rows: &[Vec<Option<f64>>]) -> Result<FeaturePreprocessor, ColumnMismatch> {
    let want = rows.first().map_or(0, Vec::len);
    for row in rows {
        if row.len() != want {
            return Err(ColumnMismatch { got: row.len(), want });
        }
    }
    let n_rows = rows.len();
    let mut medians = Vec::with_capacity(want);
    for col in 0..want {
        let mut present: Vec<f64> = rows.iter().filter_map(|r| r[col]).collect();
        if present.is_empty() {
            medians.push(0.0);
            continue;
        }
        present.sort_by(f64::total_cmp);
        medians.push(median_of_sorted(&present));
    }

    let mut means = vec![0.0f64; want];
    let mut stds = vec![1.0f64; want];
    if n_rows > 0 {
        for col in 0..want {
            let all_missing = rows.iter().all(|r| r[col].is_none());
            if all_missing {
                // Keep mean 0 / std 1: imputed zeros stay zero after scaling.
                continue;
            }
            let mut sum = 0.0;
            for row in rows {
                sum += row[col].unwrap_or(medians[col]);
            }
            let mean = sum / n_rows as f64;
            let mut var = 0.0;
            for row in rows {
                let v = row[col].unwrap_or(medians[col]);
                var += (v - mean) * (v - mean);
            }
            var /= n_rows as f64;
            means[col] = mean;
            stds[col] = if var > 0.0 { math::sqrt(var) } else { 1.0 };
        }
    }
    Ok(FeaturePreprocessor { medians, means, stds })
}

/// Imputes and scales one row with fitted parameters.
pub fn apply_preprocessor(
    pre: &FeaturePreprocessor,
    row: &[Option<f64>],
) -> Result<Vec<f64>, ColumnMismatch> {
    if row.len() != pre.medians.len() {
        return Err(ColumnMismatch { got: row.len(), want: pre.medians.len() });
    }
    Ok(row
        .iter()
        .enumerate()
        .map(|(col, v)| {
            let x = v.unwrap_or(pre.medians[col]);
            (x - pre.means[col]) / pre.stds[col]
        })
        .collect())
}

/// Random-forest training configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomForestConfig {
    /// Number of trees.
    pub n_trees: usize,
    /// Seed for bootstrap sampling and per-node feature sampling.
    pub seed: u64,
    /// Draw each tree's sample with replacement; disabling this trains every
    /// tree on the rows as-is, which pins down a single deterministic tree
    /// for testing.
    pub bootstrap: bool,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, seed: 0, bootstrap: true }
    }
}

const MAX_THRESHOLDS_PER_FEATURE: usize = 64;

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Child index for `x[feature] <= threshold`.
        left: usize,
        /// Child index otherwise.
        right: usize,
    },
}

/// One CART tree as a flat node array; index 0 is the root.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A trained classification forest.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomForestModel {
    trees: Vec<Tree>,
    n_features: usize,
    n_classes: usize,
}

impl RandomForestModel {
    /// Number of classes the model votes over.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Number of feature columns expected by [`rf_predict`].
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of trees.
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn gini_from_counts(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / t;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

fn majority_class(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate().skip(1) {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Chooses up to `MAX_THRESHOLDS_PER_FEATURE` split candidates: midpoints
/// between consecutive distinct sorted values, evenly subsampled when there
/// are more.
fn candidate_thresholds(values: &mut Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return Vec::new();
    }
    let midpoints: Vec<f64> =
        values.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    if midpoints.len() <= MAX_THRESHOLDS_PER_FEATURE {
        return midpoints;
    }
    (0..MAX_THRESHOLDS_PER_FEATURE)
        .map(|i| {
            let pos = (i as f64 + 0.5) * midpoints.len() as f64
                / MAX_THRESHOLDS_PER_FEATURE as f64;
            midpoints[(pos as usize).min(midpoints.len() - 1)]
        })
        .collect()
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    features_per_split: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Partial Fisher-Yates: the first `features_per_split` entries of a
    /// freshly shuffled feature-index prefix.
    fn sample_features(&mut self, n_features: usize) -> Vec<usize> {
        let mut all: Vec<usize> = (0..n_features).collect();
        for i in 0..self.features_per_split.min(n_features) {
            let j = i + self.rng.next_below((n_features - i) as u64) as usize;
            all.swap(i, j);
        }
        all.truncate(self.features_per_split.min(n_features));
        all
    }

    fn class_counts(&self, sample: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &r in sample {
            counts[self.labels[r]] += 1;
        }
        counts
    }

    fn grow(&mut self, sample: Vec<usize>) -> usize {
        let counts = self.class_counts(&sample);
        let parent_gini = gini_from_counts(&counts, sample.len());
        if parent_gini == 0.0 {
            let id = self.nodes.len();
            self.nodes.push(Node::Leaf { class: majority_class(&counts) });
            return id;
        }

        let n_features = self.rows[0].len();
        let features = self.sample_features(n_features);
        let mut best: Option<(f64, usize, f64)> = None; // (improvement, feature, threshold)
        for &feature in &features {
            let mut values: Vec<f64> = sample.iter().map(|&r| self.rows[r][feature]).collect();
            for threshold in candidate_thresholds(&mut values) {
                let mut left_counts = vec![0usize; self.n_classes];
                let mut left_total = 0usize;
                for &r in &sample {
                    if self.rows[r][feature] <= threshold {
                        left_counts[self.labels[r]] += 1;
                        left_total += 1;
                    }
                }
                let right_total = sample.len() - left_total;
                if left_total == 0 || right_total == 0 {
                    continue;
                }
                let right_counts: Vec<usize> = counts
                    .iter()
                    .zip(&left_counts)
                    .map(|(&all, &l)| all - l)
                    .collect();
                let weighted = (left_total as f64 * gini_from_counts(&left_counts, left_total)
                    + right_total as f64 * gini_from_counts(&right_counts, right_total))
                    / sample.len() as f64;
                let improvement = parent_gini - weighted;
                if improvement > 1e-12
                    && best.is_none_or(|(bi, _, _)| improvement > bi)
                {
                    best = Some((improvement, feature, threshold));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            let id = self.nodes.len();
            self.nodes.push(Node::Leaf { class: majority_class(&counts) });
            return id;
        };

        let (left_sample, right_sample): (Vec<usize>, Vec<usize>) =
            sample.iter().partition(|&&r| self.rows[r][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let left = self.grow(left_sample);
        let right = self.grow(right_sample);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id] {
            *l = left;
            *r = right;
        }
        id
    }
}

fn train_tree(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    cfg: &RandomForestConfig,
    tree_index: u64,
) -> Tree {
    let mut rng = SplitMix64::new(cfg.seed.wrapping_add(tree_index));
    let n = rows.len();
    let sample: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.next_below(n as u64) as usize).collect()
    } else {
        (0..n).collect()
    };
    let n_features = rows[0].len();
    // ceil(sqrt(D)) features considered per split.
    let mut features_per_split = 1;
    while features_per_split * features_per_split < n_features {
        features_per_split += 1;
    }
    let mut builder = TreeBuilder {
        rows,
        labels,
        n_classes,
        features_per_split,
        rng,
        nodes: Vec::new(),
    };
    builder.grow(sample);
    Tree { nodes: builder.nodes }
}

/// Trains a classification forest on preprocessed rows.
///
/// Each tree grows on a full-size bootstrap sample, splitting on Gini
/// impurity over `ceil(sqrt(D))` randomly sampled feature columns per node,
/// until pure or no improving split exists. Fully determined by `cfg.seed`.
pub fn rf_train(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    cfg: &RandomForestConfig,
) -> RandomForestModel {
    assert!(!rows.is_empty(), "random forest needs at least one training row");
    assert_eq!(rows.len(), labels.len(), "rows and labels must pair up");
    assert!(cfg.n_trees >= 1);
    debug_assert!(labels.iter().all(|&l| l < n_classes));

    #[cfg(feature = "parallel")]
    let trees: Vec<Tree> = {
        use rayon::prelude::*;
        (0..cfg.n_trees as u64)
            .into_par_iter()
            .map(|t| train_tree(rows, labels, n_classes, cfg, t))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees: Vec<Tree> = (0..cfg.n_trees as u64)
        .map(|t| train_tree(rows, labels, n_classes, cfg, t))
        .collect();

    RandomForestModel { trees, n_features: rows[0].len(), n_classes }
}

/// Per-class vote counts across the forest.
pub fn rf_votes(model: &RandomForestModel, row: &[f64]) -> Result<Vec<usize>, ColumnMismatch> {
    if row.len() != model.n_features {
        return Err(ColumnMismatch { got: row.len(), want: model.n_features });
    }
    let mut votes = vec![0usize; model.n_classes];
    for tree in &model.trees {
        votes[tree.predict(row)] += 1;
    }
    Ok(votes)
}

/// Majority-vote class; ties break toward the lower class index.
pub fn rf_predict(model: &RandomForestModel, row: &[f64]) -> Result<usize, ColumnMismatch> {
    let votes = rf_votes(model, row)?;
    Ok(majority_class(&votes))
}
