//! In-memory model of a benchmark scenario: a solver portfolio, a dense
//! runtime matrix, optional hand-crafted features, and cross-validation folds.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// The outcome of running one algorithm on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    /// Measured runtime in seconds, `>= 0`.
    pub runtime_seconds: f64,
    /// `true` iff the run finished with status "ok".
    pub solved: bool,
}

/// Penalized average runtime contribution of a single run: the runtime if the
/// run solved the instance, ten times the cutoff otherwise.
pub fn par10(run: &RunRecord, cutoff_seconds: f64) -> f64 {
    debug_assert!(cutoff_seconds > 0.0);
    if run.solved {
        run.runtime_seconds
    } else {
        10.0 * cutoff_seconds
    }
}

/// A validation failure while assembling a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    /// Fewer than two algorithms, or a duplicated algorithm name.
    BadPortfolio(String),
    /// Cutoff must be a positive, finite number of seconds.
    BadCutoff,
    /// The runs vector does not cover instances x algorithms densely.
    RunShapeMismatch {
        /// Number of run records supplied.
        got: usize,
        /// Number required for a dense matrix.
        want: usize,
    },
    /// A run record violates its invariants (negative runtime, or a solved
    /// runtime above the cutoff).
    BadRun {
        /// Instance index of the offending record.
        instance: usize,
        /// Algorithm index of the offending record.
        algorithm: usize,
        /// What was wrong with it.
        reason: &'static str,
    },
    /// A fold index outside `1..=fold_count`, or fold list length mismatch.
    BadFold(String),
    /// An instance id that is not part of the scenario.
    UnknownInstance(String),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::BadPortfolio(why) => write!(f, "bad portfolio: {why}"),
            ScenarioError::BadCutoff => write!(f, "cutoff must be positive and finite"),
            ScenarioError::RunShapeMismatch { got, want } => {
                write!(f, "expected {want} run records for a dense matrix, got {got}")
            }
            ScenarioError::BadRun { instance, algorithm, reason } => {
                write!(f, "bad run for instance {instance}, algorithm {algorithm}: {reason}")
            }
            ScenarioError::BadFold(why) => write!(f, "bad fold assignment: {why}"),
            ScenarioError::UnknownInstance(id) => write!(f, "unknown instance {id:?}"),
        }
    }
}

impl core::error::Error for ScenarioError {}

/// A fully loaded scenario. Immutable after construction and safe to share
/// across threads.
#[derive(Debug, Clone)]
pub struct Scenario {
    name: String,
    algorithms: Vec<String>,
    cutoff_seconds: f64,
    instances: Vec<String>,
    instance_index: BTreeMap<String, usize>,
    /// Dense row-major matrix, `instances.len() * algorithms.len()` entries.
    runs: Vec<RunRecord>,
    /// Per instance: optional feature row; entries inside a row may be missing.
    features: Vec<Option<Vec<Option<f64>>>>,
    /// Per instance: fold index in `1..=fold_count`.
    folds: Vec<u32>,
    fold_count: u32,
}

impl Scenario {
    /// Assembles and validates a scenario.
    ///
    /// `runs` is row-major over `instances x algorithms`. `features[i]` is
    /// `None` when instance `i` has no feature row at all. Folds must cover
    /// `1..=max(folds)` for every instance.
    pub fn new(
        name: String,
        algorithms: Vec<String>,
        cutoff_seconds: f64,
        instances: Vec<String>,
        runs: Vec<RunRecord>,
        features: Vec<Option<Vec<Option<f64>>>>,
        folds: Vec<u32>,
    ) -> Result<Self, ScenarioError> {
        if algorithms.len() < 2 {
            return Err(ScenarioError::BadPortfolio(String::from(
                "need at least two algorithms",
            )));
        }
        for (i, a) in algorithms.iter().enumerate() {
            if algorithms[..i].contains(a) {
                return Err(ScenarioError::BadPortfolio(alloc::format!(
                    "duplicate algorithm name {a:?}"
                )));
            }
        }
        if !cutoff_seconds.is_finite() || cutoff_seconds <= 0.0 {
            return Err(ScenarioError::BadCutoff);
        }
        let want = instances.len() * algorithms.len();
        if runs.len() != want {
            return Err(ScenarioError::RunShapeMismatch { got: runs.len(), want });
        }
        for (idx, run) in runs.iter().enumerate() {
            let (instance, algorithm) = (idx / algorithms.len(), idx % algorithms.len());
            if run.runtime_seconds.is_nan() || run.runtime_seconds < 0.0 {
                return Err(ScenarioError::BadRun { instance, algorithm, reason: "negative runtime" });
            }
            if run.solved && run.runtime_seconds > cutoff_seconds {
                return Err(ScenarioError::BadRun {
                    instance,
                    algorithm,
                    reason: "solved run exceeds cutoff",
                });
            }
        }
        if features.len() != instances.len() {
            return Err(ScenarioError::BadFold(String::from("feature list length mismatch")));
        }
        if folds.len() != instances.len() {
            return Err(ScenarioError::BadFold(String::from("fold list length mismatch")));
        }
        let fold_count = folds.iter().copied().max().unwrap_or(0);
        if instances.is_empty() {
            return Err(ScenarioError::BadFold(String::from("scenario has no instances")));
        }
        if folds.contains(&0) {
            return Err(ScenarioError::BadFold(String::from("fold indices start at 1")));
        }
        let mut instance_index = BTreeMap::new();
        for (i, id) in instances.iter().enumerate() {
            if instance_index.insert(id.clone(), i).is_some() {
                return Err(ScenarioError::BadPortfolio(alloc::format!(
                    "duplicate instance id {id:?}"
                )));
            }
        }
        Ok(Self {
            name,
            algorithms,
            cutoff_seconds,
            instances,
            instance_index,
            runs,
            features,
            folds,
            fold_count,
        })
    }

    /// Scenario identifier, e.g. `"SAT12-ALL"`.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ordered portfolio of algorithm names.
    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    /// Per-instance time limit in seconds.
    pub fn cutoff_seconds(&self) -> f64 {
        self.cutoff_seconds
    }

    /// Ordered instance ids.
    pub fn instances(&self) -> &[String] {
        &self.instances
    }

    /// Index of an instance id, if present.
    pub fn instance_index(&self, id: &str) -> Option<usize> {
        self.instance_index.get(id).copied()
    }

    /// The run of `algorithm` on `instance` (both by index).
    pub fn run(&self, instance: usize, algorithm: usize) -> &RunRecord {
        &self.runs[instance * self.algorithms.len() + algorithm]
    }

    /// All runs of `instance`, in algorithm order.
    pub fn runs_of(&self, instance: usize) -> &[RunRecord] {
        let w = self.algorithms.len();
        &self.runs[instance * w..(instance + 1) * w]
    }

    /// PAR10 of `algorithm` on `instance`.
    pub fn par10_of(&self, instance: usize, algorithm: usize) -> f64 {
        par10(self.run(instance, algorithm), self.cutoff_seconds)
    }

    /// The PAR10 row of an instance across the whole portfolio.
    pub fn par10_row(&self, instance: usize) -> Vec<f64> {
        self.runs_of(instance)
            .iter()
            .map(|r| par10(r, self.cutoff_seconds))
            .collect()
    }

    /// Feature row of an instance; `None` when the instance has none.
    pub fn features_of(&self, instance: usize) -> Option<&[Option<f64>]> {
        self.features[instance].as_deref()
    }

    /// Fold index (in `1..=fold_count`) of an instance.
    pub fn fold_of(&self, instance: usize) -> u32 {
        self.folds[instance]
    }

    /// Highest fold index present.
    pub fn fold_count(&self) -> u32 {
        self.fold_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn solved(t: f64) -> RunRecord {
        RunRecord { runtime_seconds: t, solved: true }
    }

    fn timeout(cutoff: f64) -> RunRecord {
        RunRecord { runtime_seconds: cutoff, solved: false }
    }

    #[test]
    fn par10_solved_is_runtime() {
        assert_eq!(par10(&solved(350.0), 1200.0), 350.0);
        assert_eq!(par10(&solved(0.0), 1200.0), 0.0);
    }

    #[test]
    fn par10_unsolved_is_ten_times_cutoff() {
        assert_eq!(par10(&timeout(1200.0), 1200.0), 12000.0);
        assert_eq!(par10(&RunRecord { runtime_seconds: 3.0, solved: false }, 600.0), 6000.0);
    }

    #[test]
    fn par10_unsolved_dominates_any_solved_run() {
        let cutoff = 900.0;
        let worst_solved = par10(&solved(cutoff), cutoff);
        assert!(par10(&timeout(cutoff), cutoff) >= worst_solved);
    }

    #[test]
    fn rejects_duplicate_algorithms() {
        let err = Scenario::new(
            "s".to_string(),
            vec!["a".to_string(), "a".to_string()],
            10.0,
            vec!["i1".to_string()],
            vec![solved(1.0), solved(2.0)],
            vec![None],
            vec![1],
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::BadPortfolio(_)));
    }

    #[test]
    fn rejects_sparse_run_matrix() {
        let err = Scenario::new(
            "s".to_string(),
            vec!["a".to_string(), "b".to_string()],
            10.0,
            vec!["i1".to_string()],
            vec![solved(1.0)],
            vec![None],
            vec![1],
        )
        .unwrap_err();
        assert_eq!(err, ScenarioError::RunShapeMismatch { got: 1, want: 2 });
    }

    #[test]
    fn rejects_solved_run_over_cutoff() {
        let err = Scenario::new(
            "s".to_string(),
            vec!["a".to_string(), "b".to_string()],
            10.0,
            vec!["i1".to_string()],
            vec![solved(11.0), solved(2.0)],
            vec![None],
            vec![1],
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::BadRun { reason: "solved run exceeds cutoff", .. }));
    }

    #[test]
    fn accessors_cover_the_dense_matrix() {
        let s = Scenario::new(
            "tiny".to_string(),
            vec!["a".to_string(), "b".to_string()],
            100.0,
            vec!["x".to_string(), "y".to_string()],
            vec![solved(1.0), timeout(100.0), solved(5.0), solved(7.0)],
            vec![None, Some(vec![Some(1.0), None])],
            vec![1, 2],
        )
        .unwrap();
        assert_eq!(s.par10_of(0, 0), 1.0);
        assert_eq!(s.par10_of(0, 1), 1000.0);
        assert_eq!(s.par10_row(1), vec![5.0, 7.0]);
        assert_eq!(s.instance_index("y"), Some(1));
        assert_eq!(s.fold_of(1), 2);
        assert_eq!(s.fold_count(), 2);
        assert_eq!(s.features_of(0), None);
        assert_eq!(s.features_of(1).unwrap().len(), 2);
    }
}
