//! Command implementations: cache population, cross-validated evaluation,
//! the one-dimension-at-a-time ablation grid, and one-off selection.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;
use zerofolio_core::eval::{
    cross_validate, overall_par10, pooled_vbs, EmbeddingSource, SelectorSpec,
};
use zerofolio_core::forest::RandomForestConfig;
use zerofolio_core::scenario::Scenario;
use zerofolio_core::selector::{
    score_algorithms, select, vote_scores, AlgorithmScores, Metric, SelectorConfig, Weighting,
};
use zerofolio_core::serialize::{serialize_instance, SerializationConfig};
use zerofolio_core::stats::gap_closed;
use zerofolio_core::tfidf::{tfidf_embed, tfidf_fit, TfIdfModel};
use zerofolio_core::EmbeddingVector;

use crate::aslib::{
    load_scenario, read_instance_files, AslibError, InstanceManifest, ManifestError, ScenarioLoad,
};
use crate::cache::{cache_get, cache_put, CacheError, CacheKey};
use crate::embed::{corpus_fingerprint, BackendConfig, BackendKind, EmbedError, RemoteBackend};
use crate::report::{build_report, emit_report, EvaluationReport, ReportError, ReportFormat};
use crate::state::{StateBackend, StateError, StateInstance, TrainedState};

/// Everything a command needs to run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Scenario directory.
    pub scenario_dir: PathBuf,
    /// Instance-file manifest path.
    pub manifest: PathBuf,
    /// Embedding cache directory.
    pub cache_dir: PathBuf,
    /// Embedding backend.
    pub backend: BackendConfig,
    /// Serialization budget and shuffle flag (the seed field is unused; the
    /// `seeds` list below drives serialization).
    pub serialization: SerializationConfig,
    /// k-NN configuration.
    pub selector: SelectorConfig,
    /// Random-forest configuration.
    pub rf: RandomForestConfig,
    /// Serialization seeds for the embedding selector.
    pub seeds: Vec<u64>,
    /// Hybrid fusion weight.
    pub alpha: f64,
    /// Report destination; stdout when absent.
    pub output: Option<PathBuf>,
    /// Report format.
    pub format: ReportFormat,
    /// Worker threads for fold evaluation and tree training.
    pub jobs: usize,
    /// Persist full-training-set selector state here after evaluation.
    pub save_state: Option<PathBuf>,
}

/// Command failures, classified for exit codes.
#[derive(Debug, Error)]
pub enum RunError {
    /// Bad arguments or selector names.
    #[error("{0}")]
    Usage(String),
    /// Scenario ingestion failure.
    #[error(transparent)]
    Aslib(#[from] AslibError),
    /// Manifest or instance-file failure.
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    /// Remote backend failure.
    #[error(transparent)]
    Embed(#[from] EmbedError),
    /// Cache failure.
    #[error(transparent)]
    Cache(#[from] CacheError),
    /// Report construction failure.
    #[error(transparent)]
    Report(#[from] ReportError),
    /// Trained-state failure.
    #[error(transparent)]
    State(#[from] StateError),
    /// Output write failure.
    #[error("writing {path}: {source}")]
    Output {
        /// Path being written.
        path: String,
        /// The underlying IO error.
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 usage, 2 data/parse, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Aslib(_) | RunError::Manifest(_) | RunError::State(_)
            | RunError::Report(_) | RunError::Output { .. } => 2,
            RunError::Embed(_) | RunError::Cache(_) => 3,
        }
    }
}

/// Runs `f` inside a rayon pool of `jobs` threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool builds")
        .install(f)
}

/// Instance blobs read off disk, plus per-instance read failures.
struct LoadedInstances {
    blobs: BTreeMap<usize, Vec<Vec<u8>>>,
    failures: Vec<(String, String)>,
}

fn read_covered_instances(scenario: &Scenario, manifest: &InstanceManifest) -> LoadedInstances {
    let mut blobs = BTreeMap::new();
    let mut failures = Vec::new();
    for (id, paths) in manifest.iter() {
        let Some(idx) = scenario.instance_index(id) else {
            continue; // manifest rows for unknown instances are ignored
        };
        match read_instance_files(paths) {
            Ok(b) => {
                blobs.insert(idx, b);
            }
            Err(e) => failures.push((id.to_string(), e.to_string())),
        }
    }
    LoadedInstances { blobs, failures }
}

fn texts_for(
    blobs: &BTreeMap<usize, Vec<Vec<u8>>>,
    budget_chars: usize,
    seeds: &[u64],
    shuffle: bool,
) -> BTreeMap<(usize, u64), String> {
    let mut texts = BTreeMap::new();
    for (&idx, files) in blobs {
        for &seed in seeds {
            let cfg = SerializationConfig { budget_chars, seed, shuffle };
            texts.insert((idx, seed), serialize_instance(files, &cfg));
        }
    }
    texts
}

/// The non-empty payload actually sent to a remote API; cache keys stay tied
/// to the original serialized text.
fn remote_payload(text: &str) -> String {
    if text.is_empty() {
        " ".to_string()
    } else {
        text.to_string()
    }
}

/// Cache population summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedSummary {
    /// Pairs embedded fresh during this run.
    pub embedded: usize,
    /// Pairs already present in the cache.
    pub cached: usize,
    /// Pairs that failed (unreadable files, backend errors).
    pub failed: usize,
    /// Human-readable failure descriptions.
    pub failures: Vec<String>,
}

/// Populates the embedding cache for every `(instance, seed)` pair in the
/// manifest. Idempotent; one failure does not abort the batch.
pub fn cmd_embed(cfg: &RunConfig) -> Result<EmbedSummary, RunError> {
    let ScenarioLoad { scenario, .. } = load_scenario(&cfg.scenario_dir)?;
    let manifest = InstanceManifest::load(&cfg.manifest)?;
    let loaded = read_covered_instances(&scenario, &manifest);
    let texts = texts_for(
        &loaded.blobs,
        cfg.serialization.budget_chars,
        &cfg.seeds,
        cfg.serialization.shuffle,
    );

    let mut summary = EmbedSummary {
        embedded: 0,
        cached: 0,
        failed: loaded.failures.len() * cfg.seeds.len(),
        failures: loaded
            .failures
            .iter()
            .map(|(id, e)| format!("{id}: {e}"))
            .collect(),
    };

    match cfg.backend.kind {
        BackendKind::TfIdf => {
            for &seed in &cfg.seeds {
                let corpus: Vec<&String> =
                    texts.iter().filter(|((_, s), _)| *s == seed).map(|(_, t)| t).collect();
                if corpus.is_empty() {
                    continue;
                }
                let model_id = cfg.backend.cache_model_id(Some(&corpus_fingerprint(&corpus)));
                let model = tfidf_fit(&corpus, &cfg.backend.tfidf);
                for ((_, s), text) in &texts {
                    if *s != seed {
                        continue;
                    }
                    let key = CacheKey::for_text(text, &model_id);
                    if cache_get(&key, &cfg.cache_dir)?.is_some() {
                        summary.cached += 1;
                    } else {
                        cache_put(&key, &tfidf_embed(text, &model), &cfg.cache_dir)?;
                        summary.embedded += 1;
                    }
                }
            }
        }
        BackendKind::Remote => {
            let model_id = cfg.backend.cache_model_id(None);
            let mut misses: Vec<(CacheKey, String)> = Vec::new();
            for text in texts.values() {
                let key = CacheKey::for_text(text, &model_id);
                if cache_get(&key, &cfg.cache_dir)?.is_some() {
                    summary.cached += 1;
                } else {
                    misses.push((key, remote_payload(text)));
                }
            }
            if !misses.is_empty() {
                let backend = RemoteBackend::new(&cfg.backend)?;
                let batches: Vec<&[(CacheKey, String)]> =
                    misses.chunks(cfg.backend.batch_size.max(1)).collect();
                for batch in batches {
                    let payloads: Vec<String> = batch.iter().map(|(_, t)| t.clone()).collect();
                    match backend.embed(&payloads) {
                        Ok(vectors) => {
                            for ((key, _), vector) in batch.iter().zip(vectors) {
                                cache_put(key, &vector, &cfg.cache_dir)?;
                                summary.embedded += 1;
                            }
                        }
                        Err(e) => {
                            summary.failed += batch.len();
                            summary.failures.push(e.to_string());
                        }
                    }
                }
            }
        }
    }
    Ok(summary)
}

/// Resolves texts to vectors, cache-first, calling the remote API for misses.
fn resolve_remote_vectors(
    cfg: &RunConfig,
    texts: &BTreeMap<(usize, u64), String>,
) -> Result<BTreeMap<(usize, u64), EmbeddingVector>, RunError> {
    let model_id = cfg.backend.cache_model_id(None);
    let mut vectors = BTreeMap::new();
    let mut miss_keys: Vec<((usize, u64), CacheKey)> = Vec::new();
    let mut miss_payloads: Vec<String> = Vec::new();
    for (&pair, text) in texts {
        let key = CacheKey::for_text(text, &model_id);
        match cache_get(&key, &cfg.cache_dir)? {
            Some(v) => {
                vectors.insert(pair, v);
            }
            None => {
                miss_keys.push((pair, key));
                miss_payloads.push(remote_payload(text));
            }
        }
    }
    if !miss_keys.is_empty() {
        let backend = RemoteBackend::new(&cfg.backend)?;
        let fresh = backend.embed(&miss_payloads)?;
        for ((pair, key), vector) in miss_keys.into_iter().zip(fresh) {
            cache_put(&key, &vector, &cfg.cache_dir)?;
            vectors.insert(pair, vector);
        }
    }
    Ok(vectors)
}

/// Parses `--selectors` tokens into named specs.
pub fn parse_selectors(
    tokens: &[String],
    cfg: &RunConfig,
) -> Result<Vec<(String, SelectorSpec)>, RunError> {
    if tokens.is_empty() {
        return Err(RunError::Usage("at least one selector is required".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(RunError::Usage("--seeds must list at least one seed".into()));
    }
    let mut specs = Vec::new();
    for token in tokens {
        let spec = match token.as_str() {
            "sbs" => SelectorSpec::SingleBest,
            "zf" | "zerofolio" => SelectorSpec::KnnEmbedding {
                config: cfg.selector.clone(),
                seeds: cfg.seeds.clone(),
            },
            "zf-v2" => SelectorSpec::KnnEmbedding {
                config: cfg.selector.clone(),
                seeds: vec![0, 1],
            },
            "rf" => SelectorSpec::RandomForest { config: cfg.rf.clone() },
            "hybrid" => SelectorSpec::Hybrid {
                alpha: cfg.alpha,
                knn: cfg.selector.clone(),
                seeds: cfg.seeds.clone(),
                rf: cfg.rf.clone(),
            },
            "concat" => SelectorSpec::ConcatKnn {
                config: cfg.selector.clone(),
                seeds: cfg.seeds.clone(),
            },
            other => {
                return Err(RunError::Usage(format!(
                    "unknown selector {other:?} (expected sbs, zf, zf-v2, rf, hybrid, concat)"
                )))
            }
        };
        specs.push((token.clone(), spec));
    }
    Ok(specs)
}

fn seeds_needed(specs: &[(String, SelectorSpec)], fallback: &[u64]) -> Vec<u64> {
    let mut seeds: BTreeSet<u64> = specs.iter().flat_map(|(_, s)| s.seeds().iter().copied()).collect();
    if seeds.is_empty() {
        seeds.extend(fallback.iter().copied());
    }
    seeds.into_iter().collect()
}

/// Full cross-validated evaluation; returns the report and its rendered form.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    selector_tokens: &[String],
) -> Result<(EvaluationReport, String), RunError> {
    let specs = parse_selectors(selector_tokens, cfg)?;
    let load = load_scenario(&cfg.scenario_dir)?;
    let scenario = &load.scenario;
    if load.dropped_without_cv > 0 {
        eprintln!(
            "warning: dropped {} instance(s) without a fold assignment",
            load.dropped_without_cv
        );
    }
    let manifest = InstanceManifest::load(&cfg.manifest)?;
    let loaded = read_covered_instances(scenario, &manifest);
    for (id, why) in &loaded.failures {
        eprintln!("warning: skipping instance {id}: {why}");
    }

    let seeds = seeds_needed(&specs, &cfg.seeds);
    let texts = texts_for(
        &loaded.blobs,
        cfg.serialization.budget_chars,
        &seeds,
        cfg.serialization.shuffle,
    );
    let source = match cfg.backend.kind {
        BackendKind::TfIdf => EmbeddingSource::TfIdfTexts {
            texts: texts.clone(),
            config: cfg.backend.tfidf.clone(),
        },
        BackendKind::Remote => {
            EmbeddingSource::Vectors(resolve_remote_vectors(cfg, &texts)?)
        }
    };
    let eligible = source.coverage(&seeds);

    let report =
        with_jobs(cfg.jobs, || build_report(scenario, &source, &eligible, &specs))?;
    let rendered = emit_report(&report, cfg.format);
    write_output(cfg.output.as_deref(), &rendered)?;

    if let Some(state_path) = &cfg.save_state {
        let state = build_trained_state(cfg, scenario, &eligible, &texts)?;
        state.save(state_path)?;
    }
    Ok((report, rendered))
}

fn write_output(path: Option<&Path>, rendered: &str) -> Result<(), RunError> {
    match path {
        Some(p) => std::fs::write(p, rendered).map_err(|source| RunError::Output {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

/// Trains on the full eligible set and records cache references per seed.
fn build_trained_state(
    cfg: &RunConfig,
    scenario: &Scenario,
    eligible: &BTreeSet<usize>,
    texts: &BTreeMap<(usize, u64), String>,
) -> Result<TrainedState, RunError> {
    let seeds = cfg.seeds.clone();
    let backend = match cfg.backend.kind {
        BackendKind::Remote => StateBackend::Remote {
            model_id: cfg.backend.model_id.clone(),
            endpoint_url: cfg.backend.endpoint_url.clone(),
        },
        BackendKind::TfIdf => {
            // One corpus fingerprint across all seeds makes a single cache
            // model id; the corpus is every (instance, seed) text.
            let corpus: Vec<&String> = texts.values().collect();
            let cache_model_id =
                cfg.backend.cache_model_id(Some(&corpus_fingerprint(&corpus)));
            let mut idf_per_seed = BTreeMap::new();
            for &seed in &seeds {
                let seed_corpus: Vec<&String> = eligible
                    .iter()
                    .filter_map(|&i| texts.get(&(i, seed)))
                    .collect();
                if seed_corpus.is_empty() {
                    return Err(RunError::Usage(format!(
                        "no serialized texts for seed {seed}; cannot save state"
                    )));
                }
                let model = tfidf_fit(&seed_corpus, &cfg.backend.tfidf);
                for &i in eligible {
                    if let Some(text) = texts.get(&(i, seed)) {
                        let key = CacheKey::for_text(text, &cache_model_id);
                        if cache_get(&key, &cfg.cache_dir)?.is_none() {
                            cache_put(&key, &tfidf_embed(text, &model), &cfg.cache_dir)?;
                        }
                    }
                }
                idf_per_seed.insert(seed, model.idf().to_vec());
            }
            StateBackend::TfIdf {
                config: cfg.backend.tfidf.clone(),
                cache_model_id,
                idf_per_seed,
            }
        }
    };
    let model_id = backend.cache_model_id().to_string();

    let mut instances = Vec::with_capacity(eligible.len());
    let mut par10_matrix = Vec::with_capacity(eligible.len());
    for &i in eligible {
        let mut content_hash_per_seed = BTreeMap::new();
        for &seed in &seeds {
            let text = texts.get(&(i, seed)).ok_or_else(|| {
                RunError::Usage(format!("missing serialized text for instance index {i}"))
            })?;
            content_hash_per_seed
                .insert(seed, CacheKey::for_text(text, &model_id).content_hex());
        }
        instances.push(StateInstance {
            id: scenario.instances()[i].clone(),
            content_hash_per_seed,
        });
        par10_matrix.push(scenario.par10_row(i));
    }

    Ok(TrainedState {
        schema_version: 1,
        scenario_name: scenario.name().to_string(),
        algorithms: scenario.algorithms().to_vec(),
        cutoff_seconds: scenario.cutoff_seconds(),
        selector: cfg.selector.clone(),
        budget_chars: cfg.serialization.budget_chars,
        shuffle: cfg.serialization.shuffle,
        seeds,
        backend,
        instances,
        par10_matrix,
    })
}

/// A dimension of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateDim {
    /// Line shuffling on/off.
    Shuffle,
    /// Manhattan vs cosine.
    Metric,
    /// Inverse-distance vs uniform.
    Weighting,
    /// Neighbor count.
    K,
    /// Single seed vs two-seed voting.
    Seeds,
}

impl AblateDim {
    /// Every dimension, in output order.
    pub fn all() -> Vec<AblateDim> {
        vec![
            AblateDim::Shuffle,
            AblateDim::Metric,
            AblateDim::Weighting,
            AblateDim::K,
            AblateDim::Seeds,
        ]
    }

    /// Parses a `--grid` token.
    pub fn parse(token: &str) -> Result<AblateDim, RunError> {
        match token {
            "shuffle" => Ok(AblateDim::Shuffle),
            "metric" => Ok(AblateDim::Metric),
            "weighting" => Ok(AblateDim::Weighting),
            "k" => Ok(AblateDim::K),
            "seeds" => Ok(AblateDim::Seeds),
            other => Err(RunError::Usage(format!(
                "unknown grid dimension {other:?} (expected shuffle, metric, weighting, k, seeds)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
struct AblateVariant {
    name: &'static str,
    shuffle: bool,
    metric: Metric,
    weighting: Weighting,
    k: usize,
    seeds: Vec<u64>,
}

fn ablate_variants(dims: &[AblateDim], full_grid: bool, base_seed: u64) -> Vec<AblateVariant> {
    let standard = AblateVariant {
        name: "standard",
        shuffle: true,
        metric: Metric::Manhattan,
        weighting: Weighting::InverseDistance,
        k: 10,
        seeds: vec![base_seed],
    };
    let mut variants = vec![standard.clone()];
    for dim in dims {
        match dim {
            AblateDim::Shuffle => {
                variants.push(AblateVariant { name: "no-shuffle", shuffle: false, ..standard.clone() })
            }
            AblateDim::Metric => {
                variants.push(AblateVariant { name: "cosine", metric: Metric::Cosine, ..standard.clone() })
            }
            AblateDim::Weighting => variants.push(AblateVariant {
                name: "uniform",
                weighting: Weighting::Uniform,
                ..standard.clone()
            }),
            AblateDim::K => {
                variants.push(AblateVariant { name: "k=5", k: 5, ..standard.clone() });
                variants.push(AblateVariant { name: "k=20", k: 20, ..standard.clone() });
            }
            AblateDim::Seeds => variants.push(AblateVariant {
                name: "2-seed",
                seeds: vec![0, 1],
                ..standard.clone()
            }),
        }
    }
    if full_grid {
        variants.push(AblateVariant {
            name: "naive",
            shuffle: false,
            metric: Metric::Cosine,
            weighting: Weighting::Uniform,
            k: 10,
            seeds: vec![base_seed],
        });
    }
    variants
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Manhattan => "manhattan",
        Metric::Cosine => "cosine",
    }
}

fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::InverseDistance => "inverse",
        Weighting::Uniform => "uniform",
    }
}

/// Runs the one-dimension-at-a-time ablation grid and returns CSV.
pub fn cmd_ablate(cfg: &RunConfig, dims: &[AblateDim]) -> Result<String, RunError> {
    let full_grid = dims.len() == AblateDim::all().len();
    let base_seed = cfg.seeds.first().copied().unwrap_or(0);
    let variants = ablate_variants(dims, full_grid, base_seed);

    let load = load_scenario(&cfg.scenario_dir)?;
    let scenario = &load.scenario;
    let manifest = InstanceManifest::load(&cfg.manifest)?;
    let loaded = read_covered_instances(scenario, &manifest);

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "scenario",
            "variant",
            "shuffle",
            "metric",
            "weighting",
            "k",
            "seeds",
            "instances",
            "par10_mean",
            "gap_closed_percent",
        ])
        .unwrap();

    let mut shared: Option<(BTreeSet<usize>, f64, f64)> = None; // (eligible, sbs, vbs)
    for variant in &variants {
        let texts = texts_for(
            &loaded.blobs,
            cfg.serialization.budget_chars,
            &variant.seeds,
            variant.shuffle,
        );
        let source = match cfg.backend.kind {
            BackendKind::TfIdf => EmbeddingSource::TfIdfTexts {
                texts,
                config: cfg.backend.tfidf.clone(),
            },
            BackendKind::Remote => {
                EmbeddingSource::Vectors(resolve_remote_vectors(cfg, &texts)?)
            }
        };
        let eligible = source.coverage(&variant.seeds);
        let (eligible, sbs, vbs) = match &shared {
            Some((e, s, v)) => (e.clone(), *s, *v),
            None => {
                let sbs_results = with_jobs(cfg.jobs, || {
                    cross_validate(scenario, &source, &eligible, &SelectorSpec::SingleBest)
                })
                .map_err(|source| ReportError::Eval { selector: "sbs".into(), source })?;
                let sbs = overall_par10(&sbs_results);
                let vbs = pooled_vbs(scenario, &eligible);
                shared = Some((eligible.clone(), sbs, vbs));
                (eligible, sbs, vbs)
            }
        };

        let spec = SelectorSpec::KnnEmbedding {
            config: SelectorConfig {
                k: variant.k,
                metric: variant.metric,
                weighting: variant.weighting,
            },
            seeds: variant.seeds.clone(),
        };
        let results = with_jobs(cfg.jobs, || cross_validate(scenario, &source, &eligible, &spec))
            .map_err(|source| ReportError::Eval { selector: variant.name.into(), source })?;
        let par10 = overall_par10(&results);
        let gap = gap_closed(sbs, par10, vbs)
            .map_err(|_| ReportError::DegenerateGap { sbs, vbs })?;
        let seeds_label = variant
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join("+");
        writer
            .write_record([
                scenario.name(),
                variant.name,
                if variant.shuffle { "true" } else { "false" },
                metric_name(variant.metric),
                weighting_name(variant.weighting),
                &variant.k.to_string(),
                &seeds_label,
                &eligible.len().to_string(),
                &par10.to_string(),
                &gap.to_string(),
            ])
            .unwrap();
    }

    let rendered = String::from_utf8(writer.into_inner().unwrap()).unwrap();
    write_output(cfg.output.as_deref(), &rendered)?;
    Ok(rendered)
}

/// Outcome of a one-off selection.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Chosen algorithm name.
    pub algorithm: String,
    /// Voted per-algorithm scores (lower is better), in portfolio order.
    pub scores: Vec<(String, f64)>,
}

/// Selects an algorithm for one instance (one or more raw files) using a
/// previously saved trained state.
pub fn cmd_select(
    state_path: &Path,
    cache_dir: &Path,
    api_key_env: &str,
    instance_files: &[PathBuf],
) -> Result<Selection, RunError> {
    if instance_files.is_empty() {
        return Err(RunError::Usage("select needs at least one instance file".into()));
    }
    let state = TrainedState::load(state_path)?;
    let selectors = state.selectors(cache_dir)?;
    let blobs = read_instance_files(instance_files)?;

    let mut per_seed_scores: Vec<AlgorithmScores> = Vec::with_capacity(selectors.len());
    for (seed, selector) in &selectors {
        let serialization = SerializationConfig {
            budget_chars: state.budget_chars,
            seed: *seed,
            shuffle: state.shuffle,
        };
        let text = serialize_instance(&blobs, &serialization);
        let query = match &state.backend {
            StateBackend::TfIdf { config, idf_per_seed, .. } => {
                let idf = idf_per_seed.get(seed).ok_or_else(|| {
                    StateError::Inconsistent(format!("no IDF weights for seed {seed}"))
                })?;
                let model = TfIdfModel::from_parts(config.clone(), idf.clone()).ok_or_else(
                    || StateError::Inconsistent("IDF length disagrees with dimensions".into()),
                )?;
                tfidf_embed(&text, &model)
            }
            StateBackend::Remote { model_id, endpoint_url } => {
                let key = CacheKey::for_text(&text, model_id);
                match cache_get(&key, cache_dir)? {
                    Some(v) => v,
                    None => {
                        let backend_cfg = BackendConfig {
                            kind: BackendKind::Remote,
                            model_id: model_id.clone(),
                            endpoint_url: endpoint_url.clone(),
                            api_key_env: api_key_env.to_string(),
                            ..BackendConfig::default()
                        };
                        let backend = RemoteBackend::new(&backend_cfg)?;
                        let vector = backend
                            .embed(&[remote_payload(&text)])?
                            .into_iter()
                            .next()
                            .ok_or_else(|| {
                                EmbedError::BadResponse("empty embedding response".into())
                            })?;
                        cache_put(&key, &vector, cache_dir)?;
                        vector
                    }
                }
            }
        };
        per_seed_scores
            .push(score_algorithms(&query, selector).map_err(|e| {
                StateError::Inconsistent(format!("scoring failed: {e}"))
            })?);
    }

    let voted = vote_scores(&per_seed_scores)
        .map_err(|e| StateError::Inconsistent(format!("voting failed: {e}")))?;
    let pick = select(&voted);
    Ok(Selection {
        algorithm: state.algorithms[pick].clone(),
        scores: state
            .algorithms
            .iter()
            .cloned()
            .zip(voted.scores.iter().copied())
            .collect(),
    })
}

/// Re-emits a saved JSON report in another format.
pub fn cmd_report(
    input: &Path,
    format: ReportFormat,
    output: Option<&Path>,
) -> Result<String, RunError> {
    let text = std::fs::read_to_string(input).map_err(|source| RunError::Output {
        path: input.display().to_string(),
        source,
    })?;
    let report: EvaluationReport = serde_json::from_str(&text).map_err(|e| {
        RunError::Usage(format!("{} is not a saved JSON report: {e}", input.display()))
    })?;
    let rendered = emit_report(&report, format);
    write_output(output, &rendered)?;
    Ok(rendered)
}
