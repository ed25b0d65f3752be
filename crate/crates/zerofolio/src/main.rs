//! The `zerofolio` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use zerofolio::embed::{BackendConfig, BackendKind};
use zerofolio::report::ReportFormat;
use zerofolio::run::{
    cmd_ablate, cmd_embed, cmd_evaluate, cmd_report, cmd_select, AblateDim, RunConfig, RunError,
};
use zerofolio_core::forest::RandomForestConfig;
use zerofolio_core::selector::{Metric, SelectorConfig, Weighting};
use zerofolio_core::serialize::SerializationConfig;

#[derive(Parser)]
#[command(
    name = "zerofolio",
    about = "Feature-free algorithm selection: serialize instances as seeded shuffled text, embed them, select solvers with weighted k-NN, and evaluate on scenario benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Populate the embedding cache for every manifest instance.
    Embed(EmbedArgs),
    /// Cross-validate selectors and write an evaluation report.
    Evaluate(EvaluateArgs),
    /// Vary one configuration dimension at a time and write a CSV grid.
    Ablate(AblateArgs),
    /// Select an algorithm for one instance using saved trained state.
    Select(SelectArgs),
    /// Re-emit a saved JSON report in another format.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Remote,
    Tfidf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Manhattan,
    Cosine,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    Inverse,
    Uniform,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Json,
}

/// Flags shared by the scenario-level commands; unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Args)]
struct CommonArgs {
    /// Scenario directory (description.txt, algorithm_runs.arff, cv.arff).
    #[arg(long)]
    scenario_dir: PathBuf,
    /// Instance manifest: one `<instance_id>\t<path>[\t<path>...]` line each.
    #[arg(long)]
    manifest: PathBuf,
    /// Embedding cache directory.
    #[arg(long)]
    cache_dir: PathBuf,
    /// TOML config file (flags win over file values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding backend.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Remote embedding model name.
    #[arg(long)]
    model: Option<String>,
    /// Remote embeddings endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Serialization character budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated serialization seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Keep raw file order instead of shuffling lines.
    #[arg(long)]
    no_shuffle: bool,
    /// Neighbor count.
    #[arg(long)]
    k: Option<usize>,
    /// Distance metric.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Neighbor weighting.
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    /// Hybrid fusion weight in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// TF-IDF output dimensionality.
    #[arg(long)]
    dimensions: Option<usize>,
    /// Smallest character n-gram length.
    #[arg(long)]
    ngram_min: Option<usize>,
    /// Largest character n-gram length.
    #[arg(long)]
    ngram_max: Option<usize>,
    /// Maximum in-flight remote requests.
    #[arg(long)]
    max_parallel: Option<usize>,
    /// Retries per remote request.
    #[arg(long)]
    max_retries: Option<u32>,
    /// Texts per remote request.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Environment variable holding the API key (the key itself is never a
    /// flag).
    #[arg(long)]
    api_key_env: Option<String>,
    /// Random-forest tree count.
    #[arg(long)]
    rf_trees: Option<usize>,
    /// Random-forest seed.
    #[arg(long)]
    rf_seed: Option<u64>,
    /// Report/grid output path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads (folds, trees); defaults to the logical CPU count.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated selectors: sbs, zf, zf-v2, rf, hybrid, concat.
    #[arg(long, value_delimiter = ',', default_value = "sbs,zf")]
    selectors: Vec<String>,
    /// Persist full-training-set selector state here for `select`.
    #[arg(long)]
    save_state: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated grid dimensions (default: all of shuffle, metric,
    /// weighting, k, seeds, plus the naive row).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<String>>,
}

#[derive(Args)]
struct SelectArgs {
    /// Trained state file written by `evaluate --save-state`.
    #[arg(long)]
    state: PathBuf,
    /// Embedding cache directory.
    #[arg(long)]
    cache_dir: PathBuf,
    /// Environment variable holding the API key (remote states only).
    #[arg(long, default_value = "ZEROFOLIO_API_KEY")]
    api_key_env: String,
    /// Raw instance file(s), model file first for multi-file formats.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved JSON report.
    #[arg(long)]
    input: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
    /// Output path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Optional TOML configuration; every key mirrors a flag.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    backend: Option<String>,
    model: Option<String>,
    endpoint: Option<String>,
    budget: Option<usize>,
    seeds: Option<Vec<u64>>,
    shuffle: Option<bool>,
    k: Option<usize>,
    metric: Option<String>,
    weighting: Option<String>,
    alpha: Option<f64>,
    dimensions: Option<usize>,
    ngram_min: Option<usize>,
    ngram_max: Option<usize>,
    max_parallel: Option<usize>,
    max_retries: Option<u32>,
    batch_size: Option<usize>,
    api_key_env: Option<String>,
    rf_trees: Option<usize>,
    rf_seed: Option<u64>,
    format: Option<String>,
    jobs: Option<usize>,
}

fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig, RunError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        RunError::Usage(format!("cannot read config {}: {e}", path.display()))
    })?;
    toml::from_str(&text)
        .map_err(|e| RunError::Usage(format!("bad config {}: {e}", path.display())))
}

fn parse_enum<T: Copy>(
    value: Option<&str>,
    table: &[(&str, T)],
    what: &str,
) -> Result<Option<T>, RunError> {
    let Some(value) = value else { return Ok(None) };
    table
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| Some(v))
        .ok_or_else(|| RunError::Usage(format!("bad {what} {value:?} in config file")))
}

fn resolve_config(common: &CommonArgs, save_state: Option<PathBuf>) -> Result<RunConfig, RunError> {
    let file = load_file_config(common.config.as_ref())?;

    let backend_kind = match common.backend {
        Some(BackendArg::Remote) => BackendKind::Remote,
        Some(BackendArg::Tfidf) => BackendKind::TfIdf,
        None => parse_enum(
            file.backend.as_deref(),
            &[("remote", BackendKind::Remote), ("tfidf", BackendKind::TfIdf)],
            "backend",
        )?
        .unwrap_or(BackendKind::TfIdf),
    };
    let metric = match common.metric {
        Some(MetricArg::Manhattan) => Metric::Manhattan,
        Some(MetricArg::Cosine) => Metric::Cosine,
        None => parse_enum(
            file.metric.as_deref(),
            &[("manhattan", Metric::Manhattan), ("cosine", Metric::Cosine)],
            "metric",
        )?
        .unwrap_or(Metric::Manhattan),
    };
    let weighting = match common.weighting {
        Some(WeightingArg::Inverse) => Weighting::InverseDistance,
        Some(WeightingArg::Uniform) => Weighting::Uniform,
        None => parse_enum(
            file.weighting.as_deref(),
            &[("inverse", Weighting::InverseDistance), ("uniform", Weighting::Uniform)],
            "weighting",
        )?
        .unwrap_or(Weighting::InverseDistance),
    };
    let format = match common.format {
        Some(f) => to_format(f),
        None => parse_enum(
            file.format.as_deref(),
            &[
                ("csv", ReportFormat::Csv),
                ("markdown", ReportFormat::Markdown),
                ("json", ReportFormat::Json),
            ],
            "format",
        )?
        .unwrap_or_default(),
    };

    let shuffle = if common.no_shuffle { false } else { file.shuffle.unwrap_or(true) };
    let defaults = BackendConfig::default();
    let tfidf_defaults = defaults.tfidf.clone();
    let backend = BackendConfig {
        kind: backend_kind,
        model_id: common.model.clone().or(file.model).unwrap_or_default(),
        endpoint_url: common.endpoint.clone().or(file.endpoint).unwrap_or_default(),
        tfidf: zerofolio_core::tfidf::TfIdfConfig {
            dimensions: common.dimensions.or(file.dimensions).unwrap_or(tfidf_defaults.dimensions),
            ngram_min: common.ngram_min.or(file.ngram_min).unwrap_or(tfidf_defaults.ngram_min),
            ngram_max: common.ngram_max.or(file.ngram_max).unwrap_or(tfidf_defaults.ngram_max),
        },
        max_parallel: common.max_parallel.or(file.max_parallel).unwrap_or(defaults.max_parallel),
        max_retries: common.max_retries.or(file.max_retries).unwrap_or(defaults.max_retries),
        batch_size: common.batch_size.or(file.batch_size).unwrap_or(defaults.batch_size),
        api_key_env: common
            .api_key_env
            .clone()
            .or(file.api_key_env)
            .unwrap_or(defaults.api_key_env),
        initial_backoff_ms: defaults.initial_backoff_ms,
    };

    let jobs = common
        .jobs
        .or(file.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));

    Ok(RunConfig {
        scenario_dir: common.scenario_dir.clone(),
        manifest: common.manifest.clone(),
        cache_dir: common.cache_dir.clone(),
        backend,
        serialization: SerializationConfig {
            budget_chars: common.budget.or(file.budget).unwrap_or(10_000),
            seed: 0,
            shuffle,
        },
        selector: SelectorConfig {
            k: common.k.or(file.k).unwrap_or(10),
            metric,
            weighting,
        },
        rf: RandomForestConfig {
            n_trees: common.rf_trees.or(file.rf_trees).unwrap_or(100),
            seed: common.rf_seed.or(file.rf_seed).unwrap_or(0),
            bootstrap: true,
        },
        seeds: common.seeds.clone().or(file.seeds).unwrap_or_else(|| vec![0]),
        alpha: common.alpha.or(file.alpha).unwrap_or(0.5),
        output: common.output.clone(),
        format,
        jobs,
        save_state,
    })
}

fn to_format(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Markdown => ReportFormat::Markdown,
        FormatArg::Json => ReportFormat::Json,
    }
}

fn run(cli: Cli) -> Result<ExitCode, RunError> {
    match cli.command {
        Command::Embed(args) => {
            let cfg = resolve_config(&args.common, None)?;
            let summary = cmd_embed(&cfg)?;
            println!(
                "embedded {} cached {} failed {}",
                summary.embedded, summary.cached, summary.failed
            );
            for failure in &summary.failures {
                eprintln!("failure: {failure}");
            }
            // Partial failure keeps the successes but signals via the exit code.
            Ok(if summary.failed > 0 { ExitCode::from(4) } else { ExitCode::SUCCESS })
        }
        Command::Evaluate(args) => {
            let cfg = resolve_config(&args.common, args.save_state.clone())?;
            cmd_evaluate(&cfg, &args.selectors)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate(args) => {
            let cfg = resolve_config(&args.common, None)?;
            let dims = match &args.grid {
                None => AblateDim::all(),
                Some(tokens) => tokens
                    .iter()
                    .map(|t| AblateDim::parse(t))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            cmd_ablate(&cfg, &dims)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Select(args) => {
            let selection = cmd_select(&args.state, &args.cache_dir, &args.api_key_env, &args.files)?;
            println!("selected: {}", selection.algorithm);
            for (name, score) in &selection.scores {
                println!("score {name} {score}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            cmd_report(&args.input, to_format(args.format), args.output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
