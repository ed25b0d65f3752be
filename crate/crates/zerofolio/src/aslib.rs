//! Loading scenario directories (description metadata, runtime/feature/fold
//! relations) and instance-file manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;
use zerofolio_core::scenario::{RunRecord, Scenario, ScenarioError};

use crate::arff::{parse_arff, ArffValue, MalformedArff, Relation};

/// Per-file size cap; instance files beyond this are rejected rather than
/// silently truncated.
pub const MAX_INSTANCE_FILE_BYTES: u64 = 256 * 1024 * 1024;

/// Scenario ingestion failures.
#[derive(Debug, Error)]
pub enum AslibError {
    /// A required file is absent from the scenario directory.
    #[error("missing file {0:?} in scenario directory")]
    MissingFile(String),
    /// Propagated ARFF syntax error, tagged with the file it came from.
    #[error("{file}: {source}")]
    Malformed {
        /// File the parse error occurred in.
        file: String,
        /// The underlying parse error.
        #[source]
        source: MalformedArff,
    },
    /// The files disagree with each other or with the description.
    #[error("inconsistent scenario: {0}")]
    InconsistentScenario(String),
    /// IO failure while reading scenario files.
    #[error("reading {path}: {source}")]
    Io {
        /// Path being read.
        path: String,
        /// The underlying IO error.
        #[source]
        source: std::io::Error,
    },
}

impl From<ScenarioError> for AslibError {
    fn from(e: ScenarioError) -> Self {
        AslibError::InconsistentScenario(e.to_string())
    }
}

fn inconsistent(msg: impl Into<String>) -> AslibError {
    AslibError::InconsistentScenario(msg.into())
}

/// A loaded scenario plus ingestion warnings.
#[derive(Debug)]
pub struct ScenarioLoad {
    /// The validated scenario.
    pub scenario: Scenario,
    /// Instances present in the runs relation but absent from the CV split
    /// relation; they were dropped.
    pub dropped_without_cv: usize,
    /// Instances that have runs and folds but no feature row.
    pub without_features: usize,
}

/// Metadata out of `description.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Description {
    /// Scenario identifier.
    pub scenario_id: String,
    /// Per-instance time limit in seconds.
    pub cutoff_seconds: f64,
    /// Portfolio in declaration order.
    pub algorithms: Vec<String>,
}

/// Parses `description.txt`: top-level `key: value` lines, with the
/// algorithm list either as a flat `algorithms:` entry or as the keys of an
/// indented `metainfo_algorithms:` block.
pub fn parse_description(text: &str) -> Result<Description, AslibError> {
    let mut scenario_id = None;
    let mut cutoff = None;
    let mut flat_algorithms: Option<Vec<String>> = None;
    let mut block_algorithms: Vec<String> = Vec::new();
    let mut in_algorithm_block = false;
    let mut block_indent: Option<usize> = None;

    for raw in text.lines() {
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let indent = raw.len() - raw.trim_start().len();
        let line = raw.trim_end();
        if indent == 0 {
            in_algorithm_block = false;
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            match key {
                "scenario_id" => scenario_id = Some(value.to_string()),
                "algorithm_cutoff_time" => {
                    let v: f64 = value.parse().map_err(|_| {
                        inconsistent(format!("bad algorithm_cutoff_time {value:?}"))
                    })?;
                    cutoff = Some(v);
                }
                "algorithms" if !value.is_empty() => {
                    flat_algorithms = Some(
                        value
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect(),
                    );
                }
                "metainfo_algorithms" => {
                    in_algorithm_block = true;
                    block_indent = None;
                }
                _ => {}
            }
        } else if in_algorithm_block {
            let first = *block_indent.get_or_insert(indent);
            if indent == first {
                if let Some(name) = line.trim().strip_suffix(':') {
                    block_algorithms.push(name.trim().trim_matches(['\'', '"']).to_string());
                }
            }
        }
    }

    let algorithms = match flat_algorithms {
        Some(list) if !list.is_empty() => list,
        _ => block_algorithms,
    };
    if algorithms.is_empty() {
        return Err(inconsistent("description lists no algorithms"));
    }
    Ok(Description {
        scenario_id: scenario_id.ok_or_else(|| inconsistent("description lacks scenario_id"))?,
        cutoff_seconds: cutoff
            .ok_or_else(|| inconsistent("description lacks algorithm_cutoff_time"))?,
        algorithms,
    })
}

fn read_file(dir: &Path, name: &str) -> Result<String, AslibError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(AslibError::MissingFile(name.to_string()));
    }
    fs::read_to_string(&path)
        .map_err(|source| AslibError::Io { path: path.display().to_string(), source })
}

fn parse_named_arff(dir: &Path, name: &str) -> Result<Relation, AslibError> {
    let text = read_file(dir, name)?;
    parse_arff(&text).map_err(|source| AslibError::Malformed { file: name.to_string(), source })
}

fn required_column(relation: &Relation, file: &str, name: &str) -> Result<usize, AslibError> {
    relation
        .column(name)
        .ok_or_else(|| inconsistent(format!("{file} lacks a {name:?} column")))
}

fn repetition_is_one(row: &[ArffValue], column: Option<usize>) -> bool {
    match column {
        None => true,
        Some(c) => row[c].as_f64().is_none_or(|r| r == 1.0),
    }
}

/// Loads a scenario directory: `description.txt`, `algorithm_runs.arff`,
/// `cv.arff`, and optionally `feature_values.arff`.
///
/// Only repetition 1 is kept; the first record wins for a repeated
/// (instance, algorithm) pair; runs reported solved above the cutoff are
/// clamped to the cutoff; instances missing from `cv.arff` are dropped and
/// counted in the returned metadata.
pub fn load_scenario(dir: &Path) -> Result<ScenarioLoad, AslibError> {
    let description = parse_description(&read_file(dir, "description.txt")?)?;
    let runs_relation = parse_named_arff(dir, "algorithm_runs.arff")?;
    let cv_relation = parse_named_arff(dir, "cv.arff")?;

    let algorithm_index: BTreeMap<&str, usize> = description
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let n_algorithms = description.algorithms.len();
    let cutoff = description.cutoff_seconds;

    let runs_file = "algorithm_runs.arff";
    let instance_col = required_column(&runs_relation, runs_file, "instance_id")?;
    let algorithm_col = required_column(&runs_relation, runs_file, "algorithm")?;
    let runtime_col = required_column(&runs_relation, runs_file, "runtime")?;
    let status_col = required_column(&runs_relation, runs_file, "runstatus")?;
    let repetition_col = runs_relation.column("repetition");

    // First appearance in the runs relation fixes the instance order.
    let mut instance_ids: Vec<String> = Vec::new();
    let mut instance_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut runs: Vec<Vec<Option<RunRecord>>> = Vec::new();
    for row in &runs_relation.rows {
        if !repetition_is_one(row, repetition_col) {
            continue;
        }
        let id = row[instance_col]
            .as_str()
            .ok_or_else(|| inconsistent("instance_id must be textual"))?;
        let algorithm = row[algorithm_col]
            .as_str()
            .ok_or_else(|| inconsistent("algorithm must be textual"))?;
        let &a = algorithm_index.get(algorithm).ok_or_else(|| {
            inconsistent(format!("algorithm {algorithm:?} is not in the description"))
        })?;
        let i = *instance_of.entry(id.to_string()).or_insert_with(|| {
            instance_ids.push(id.to_string());
            runs.push(vec![None; n_algorithms]);
            instance_ids.len() - 1
        });
        if runs[i][a].is_some() {
            continue; // first occurrence wins
        }
        let solved = row[status_col]
            .as_str()
            .is_some_and(|s| s.eq_ignore_ascii_case("ok"));
        let runtime = match row[runtime_col].as_f64() {
            Some(t) => t,
            None if !solved => cutoff,
            None => {
                return Err(inconsistent(format!(
                    "run of {algorithm:?} on {id:?} is solved but has no runtime"
                )))
            }
        };
        let runtime = if solved { runtime.min(cutoff) } else { runtime };
        runs[i][a] = Some(RunRecord { runtime_seconds: runtime, solved });
    }

    let cv_file = "cv.arff";
    let cv_instance_col = required_column(&cv_relation, cv_file, "instance_id")?;
    let cv_fold_col = required_column(&cv_relation, cv_file, "fold")?;
    let cv_repetition_col = cv_relation.column("repetition");
    let mut fold_of: BTreeMap<&str, u32> = BTreeMap::new();
    for row in &cv_relation.rows {
        if !repetition_is_one(row, cv_repetition_col) {
            continue;
        }
        let id = row[cv_instance_col]
            .as_str()
            .ok_or_else(|| inconsistent("cv instance_id must be textual"))?;
        let fold = row[cv_fold_col]
            .as_f64()
            .filter(|&f| f >= 1.0 && f.fract() == 0.0)
            .ok_or_else(|| inconsistent(format!("bad fold value for instance {id:?}")))?;
        fold_of.entry(id).or_insert(fold as u32);
    }

    // Features are optional.
    let mut features_of: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    if dir.join("feature_values.arff").is_file() {
        let feature_relation = parse_named_arff(dir, "feature_values.arff")?;
        let f_instance_col =
            required_column(&feature_relation, "feature_values.arff", "instance_id")?;
        let f_repetition_col = feature_relation.column("repetition");
        let feature_cols: Vec<usize> = (0..feature_relation.attributes.len())
            .filter(|&c| c != f_instance_col && Some(c) != f_repetition_col)
            .collect();
        for row in &feature_relation.rows {
            if !repetition_is_one(row, f_repetition_col) {
                continue;
            }
            let Some(id) = row[f_instance_col].as_str() else {
                continue;
            };
            features_of
                .entry(id.to_string())
                .or_insert_with(|| feature_cols.iter().map(|&c| row[c].as_f64()).collect());
        }
    }

    // Keep instances that have a fold; demand a dense run matrix for them.
    let mut kept_ids = Vec::new();
    let mut kept_runs = Vec::new();
    let mut kept_features = Vec::new();
    let mut kept_folds = Vec::new();
    let mut dropped_without_cv = 0usize;
    let mut without_features = 0usize;
    for (i, id) in instance_ids.iter().enumerate() {
        let Some(&fold) = fold_of.get(id.as_str()) else {
            dropped_without_cv += 1;
            continue;
        };
        let mut row = Vec::with_capacity(n_algorithms);
        for (a, run) in runs[i].iter().enumerate() {
            let run = run.ok_or_else(|| {
                inconsistent(format!(
                    "no run of algorithm {:?} on instance {id:?}",
                    description.algorithms[a]
                ))
            })?;
            row.push(run);
        }
        let features = features_of.get(id).cloned();
        if features.is_none() {
            without_features += 1;
        }
        kept_ids.push(id.clone());
        kept_runs.extend(row);
        kept_features.push(features);
        kept_folds.push(fold);
    }

    let scenario = Scenario::new(
        description.scenario_id,
        description.algorithms,
        cutoff,
        kept_ids,
        kept_runs,
        kept_features,
        kept_folds,
    )?;
    Ok(ScenarioLoad { scenario, dropped_without_cv, without_features })
}

/// Manifest ingestion failures.
#[derive(Debug, Error)]
pub enum ManifestError {
    /// A line without any path.
    #[error("manifest line {0}: instance without a file path")]
    MissingPath(usize),
    /// IO failure reading the manifest or an instance file.
    #[error("reading {path}: {source}")]
    Io {
        /// Path being read.
        path: String,
        /// The underlying IO error.
        #[source]
        source: std::io::Error,
    },
    /// An instance file above [`MAX_INSTANCE_FILE_BYTES`].
    #[error("instance file {path} is {size} bytes, above the {limit}-byte cap")]
    FileTooLarge {
        /// Offending file.
        path: String,
        /// Its size.
        size: u64,
        /// The cap.
        limit: u64,
    },
}

/// Maps instance ids to the raw files that make them up (model file first
/// for multi-file formats).
#[derive(Debug, Clone, Default)]
pub struct InstanceManifest {
    entries: BTreeMap<String, Vec<PathBuf>>,
}

impl InstanceManifest {
    /// Parses manifest text: one `<instance_id>\t<path>[\t<path>...]` line
    /// per instance. Relative paths resolve against `base_dir`; the first
    /// line wins for a repeated id.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ManifestError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let mut parts = raw.split('\t');
            let id = parts.next().unwrap_or("").trim();
            let paths: Vec<PathBuf> = parts
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| {
                    let path = Path::new(p);
                    if path.is_absolute() {
                        path.to_path_buf()
                    } else {
                        base_dir.join(path)
                    }
                })
                .collect();
            if id.is_empty() || paths.is_empty() {
                return Err(ManifestError::MissingPath(idx + 1));
            }
            entries.entry(id.to_string()).or_insert(paths);
        }
        Ok(Self { entries })
    }

    /// Loads a manifest file, resolving relative paths against its parent
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// File paths of one instance, if listed.
    pub fn paths(&self, instance_id: &str) -> Option<&[PathBuf]> {
        self.entries.get(instance_id).map(Vec::as_slice)
    }

    /// Number of listed instances.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when no instance is listed.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates over `(instance_id, paths)` in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[PathBuf])> {
        self.entries.iter().map(|(id, p)| (id.as_str(), p.as_slice()))
    }
}

/// Reads the raw bytes of every file of one instance, enforcing the size cap.
pub fn read_instance_files(paths: &[PathBuf]) -> Result<Vec<Vec<u8>>, ManifestError> {
    let mut blobs = Vec::with_capacity(paths.len());
    for path in paths {
        let display = path.display().to_string();
        let meta = fs::metadata(path)
            .map_err(|source| ManifestError::Io { path: display.clone(), source })?;
        if meta.len() > MAX_INSTANCE_FILE_BYTES {
            return Err(ManifestError::FileTooLarge {
                path: display,
                size: meta.len(),
                limit: MAX_INSTANCE_FILE_BYTES,
            });
        }
        let mut buf = Vec::with_capacity(meta.len() as usize);
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|source| ManifestError::Io { path: display, source })?;
        blobs.push(buf);
    }
    Ok(blobs)
}
