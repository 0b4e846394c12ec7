//! The `topicscope` command line tool.
//!
//! Stages communicate through files only:
//!
//! ```text
//! fetch   -> metadata.jsonl
//! prepare -> corpus dir (corpus.jsonl, provenance.json, profile.json)
//! tune    -> trials.csv
//! fit     -> model dir
//! export  -> topics.json, series_w{1..4}.json, heatmap.csv, documents.csv
//! test    -> JSON on stdout
//! serve   -> HTTP API
//! ```
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 domain error,
//! 4 I/O error.

mod error;
mod fetch;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use topicscope::config::RunConfig;
use topicscope::dynamics::BinWidth;
use topicscope::embedstore::{load_embeddings, EmbeddingMatrix};
use topicscope::ingest::{CleanCorpus, DateWindow};
use topicscope::model::TopicModel;
use topicscope::persistence::{load_model, save_model};
use topicscope::pipeline::{self, FitParams};
use topicscope::tune::{best_trial, parse_trials_csv, trials_csv, TrialResult};
use topicscope_service::TestResponse;

pub use error::{CliError, ExitKind};

#[derive(Debug, Parser)]
#[command(name = "topicscope", version, about = "Temporal topic mining over document embeddings")]
pub struct Cli {
    /// Cap on worker threads for parallel stages (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download a corpus from a paged JSON endpoint ([fetch] section).
    Fetch(FetchArgs),
    /// Print field coverage and date histograms of the raw metadata.
    Profile(ConfigArg),
    /// Filter and deduplicate the metadata into a corpus directory.
    Prepare(PrepareArgs),
    /// Grid search over reduction and clustering parameters.
    Tune(TuneArgs),
    /// Fit the full model and save it.
    Fit(FitArgs),
    /// Compare a topic's intensity in two date windows.
    Test(TestArgs),
    /// Write topic terms, series and the heatmap as plain files.
    Export(ExportArgs),
    /// Serve the HTTP API over a saved model.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output JSON-lines file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Corpus directory written by `prepare`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embedding file; overrides `embeddings.path`.
    #[arg(long)]
    pub emb: Option<PathBuf>,
    /// Overrides the config `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub emb: Option<PathBuf>,
    /// Model directory; overrides `serve.model_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Take parameters from the best trial of a `tune` table instead of
    /// the [cluster] section.
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Replace an existing model directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub topic: usize,
    /// First window as `start,end` (inclusive ISO dates).
    #[arg(long, value_parser = parse_window)]
    pub w1: (NaiveDate, NaiveDate),
    #[arg(long, value_parser = parse_window)]
    pub w2: (NaiveDate, NaiveDate),
    /// Bin width in weeks.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=4))]
    pub bins: u32,
    #[arg(long, default_value_t = topicscope::stats::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Terms per topic in topics.json.
    #[arg(long, default_value_t = 30)]
    pub top_n: usize,
    /// Bin width behind heatmap.csv.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=4))]
    pub heatmap_weeks: u32,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Supplies `serve.*` defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Allowed CORS origin; repeatable.
    #[arg(long = "cors")]
    pub cors: Vec<String>,
}

fn parse_window(s: &str) -> Result<(NaiveDate, NaiveDate), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `start,end`, got `{s}`"))?;
    let date = |v: &str| v.trim().parse::<NaiveDate>().map_err(|e| format!("`{v}`: {e}"));
    Ok((date(a)?, date(b)?))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    Ok(RunConfig::load(path)?)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn embeddings(cfg: &RunConfig, flag: Option<&PathBuf>) -> Result<EmbeddingMatrix, CliError> {
    let path = flag.unwrap_or(&cfg.embeddings.path);
    if !path.is_file() {
        return Err(CliError::usage(format!("embeddings file not found: {}", path.display())));
    }
    Ok(load_embeddings(path, cfg.embeddings.embedding_format()?)?)
}

fn corpus(dir: &Path) -> Result<CleanCorpus, CliError> {
    if !dir.is_dir() {
        return Err(CliError::usage(format!("corpus directory not found: {}", dir.display())));
    }
    Ok(CleanCorpus::read_dir(dir)?)
}

fn model(dir: &Path) -> Result<TopicModel, CliError> {
    if !dir.join("manifest.json").is_file() {
        return Err(CliError::usage(format!("no model at {} (manifest.json missing)", dir.display())));
    }
    Ok(load_model(dir)?)
}

/// RFC 3339 creation time; `SOURCE_DATE_EPOCH` pins it for reproducible
/// artifacts.
fn created_at() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse::<i64>().ok());
    let t = pinned.and_then(|s| DateTime::<Utc>::from_timestamp(s, 0)).unwrap_or_else(Utc::now);
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn prepare(a: &PrepareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let prepared = pipeline::prepare(&cfg)?;
    prepared.corpus.write_dir(&a.out)?;
    write_file(&a.out.join("profile.json"), pretty(&prepared.profile))?;
    write_file(&a.out.join("skipped_rows.json"), pretty(&prepared.skipped))?;
    print_json(out, &prepared.corpus.provenance)
}

#[derive(Serialize)]
struct BestTrial<'a> {
    trials: usize,
    best: &'a TrialResult,
}

fn tune(a: &TuneArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let grid = cfg.grid.as_ref().ok_or_else(|| CliError::usage("config has no [grid] section"))?;
    let corpus = corpus(&a.corpus)?;
    let emb = embeddings(&cfg, a.emb.as_ref())?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let outcome = pipeline::tune(&corpus, &emb, &grid.grid(), grid.subsample_fraction, seed)?;
    write_file(&a.out, trials_csv(&outcome.trials))?;
    let best = &outcome.best;
    info!("best trial {} with validity {:?}", best.trial, best.dbcv);
    print_json(out, &BestTrial { trials: outcome.trials.len(), best })
}

fn fit_params(cfg: &RunConfig, trials: Option<&PathBuf>) -> Result<FitParams, CliError> {
    let reduce_frequent_words = cfg.represent.reduce_frequent_words;
    if let Some(path) = trials {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let rows = parse_trials_csv(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let best = best_trial(&rows)
            .filter(|t| t.dbcv.is_some())
            .ok_or_else(|| CliError::domain(format!("{}: no trial has a defined validity score", path.display())))?;
        info!("using trial {} from {}", best.trial, path.display());
        return Ok(FitParams { reduce_k: best.params.reduce_k, cluster: best.params.cluster, reduce_frequent_words });
    }
    let cluster = cfg.cluster.as_ref().ok_or_else(|| CliError::usage("no clustering parameters: add a [cluster] section or pass --trials"))?;
    Ok(FitParams { reduce_k: cfg.reduce.k, cluster: cluster.params(), reduce_frequent_words })
}

#[derive(Serialize)]
struct FitSummary {
    model_dir: String,
    documents: usize,
    topics: usize,
    outliers: usize,
    vocabulary: usize,
    config_hash: String,
}

fn fit(a: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let dir = a.out.clone().or_else(|| cfg.serve.model_dir.clone()).ok_or_else(|| CliError::usage("no model directory: pass --out or set serve.model_dir"))?;
    let params = fit_params(&cfg, a.trials.as_ref())?;
    let corpus = corpus(&a.corpus)?;
    let emb = embeddings(&cfg, a.emb.as_ref())?;
    let overlays = pipeline::load_overlays(&cfg)?;
    let model = pipeline::fit(&corpus, &emb, &params, overlays, &cfg.hash(), created_at())?;
    let manifest = save_model(&model, &dir, a.force)?;
    print_json(
        out,
        &FitSummary {
            model_dir: dir.display().to_string(),
            documents: manifest.counts.documents,
            topics: manifest.counts.topics,
            outliers: manifest.outliers,
            vocabulary: manifest.counts.vocabulary,
            config_hash: manifest.config_hash,
        },
    )
}

fn test(a: &TestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let m = model(&a.model)?;
    let width = BinWidth::new(a.bins)?;
    let w1 = DateWindow::new(a.w1.0, a.w1.1).map_err(|e| CliError::domain(format!("--w1: {e}")))?;
    let w2 = DateWindow::new(a.w2.0, a.w2.1).map_err(|e| CliError::domain(format!("--w2: {e}")))?;
    let t = m.test_windows(a.topic, &w1, &w2, width, a.alpha)?;
    print_json(
        out,
        &TestResponse {
            topic_id: a.topic,
            window1: [w1.start, w1.end],
            window2: [w2.start, w2.end],
            bin_weeks: a.bins,
            alpha: a.alpha,
            overlapping: t.overlapping,
            result: t.result,
        },
    )
}

#[derive(Serialize)]
struct TopicSeriesExport {
    topic_id: usize,
    counts: Vec<u32>,
    intensities: Vec<f64>,
}

#[derive(Serialize)]
struct SeriesExport {
    bin_weeks: u32,
    bin_starts: Vec<NaiveDate>,
    totals: Vec<u32>,
    outliers: Vec<u32>,
    topics: Vec<TopicSeriesExport>,
}

fn export(a: &ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let m = model(&a.model)?;
    let cards = (0..m.n_topics())
        .map(|t| m.topic_card(t, a.top_n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::domain(e.to_string()))?;
    write_file(&a.out.join("topics.json"), pretty(&cards))?;
    for w in BinWidth::ALL {
        let ts = m.series(w);
        let topics = (0..ts.n_topics())
            .map(|t| Ok(TopicSeriesExport { topic_id: t, counts: ts.counts(t)?.to_vec(), intensities: ts.intensities(t)? }))
            .collect::<Result<Vec<_>, topicscope::dynamics::DynamicsError>>()?;
        let export = SeriesExport {
            bin_weeks: w.weeks(),
            bin_starts: (0..ts.n_bins()).map(|b| ts.bin_start(b)).collect(),
            totals: ts.totals().to_vec(),
            outliers: ts.outliers().to_vec(),
            topics,
        };
        write_file(&a.out.join(format!("series_w{}.json", w.weeks())), pretty(&export))?;
    }
    write_file(&a.out.join("heatmap.csv"), m.heatmap_csv(BinWidth::new(a.heatmap_weeks)?)?)?;
    let mut docs = String::from("record_id,publish_date,topic\n");
    for ((id, date), label) in m.doc_ids.iter().zip(&m.doc_dates).zip(m.assignment.labels()) {
        docs.push_str(&format!("{id},{date},{label}\n"));
    }
    write_file(&a.out.join("documents.csv"), docs)?;
    print_json(out, &serde_json::json!({ "out": a.out.display().to_string(), "topics": m.n_topics() }))
}

fn serve(a: &ServeArgs, threads: Option<usize>, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.config.as_deref().map(load_config).transpose()?;
    let section = cfg.map(|c| c.serve).unwrap_or_default();
    let dir = a.model.clone().or(section.model_dir).ok_or_else(|| CliError::usage("no model directory: pass --model or set serve.model_dir"))?;
    let bind = a.bind.clone().unwrap_or(section.bind_addr);
    let cors = if a.cors.is_empty() { section.cors_origins } else { a.cors.clone() };
    let m = Arc::new(model(&dir)?);
    let app = topicscope_service::router(m.clone(), &cors).map_err(|e| CliError::usage(e.to_string()))?;
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        rt.worker_threads(n.max(1));
    }
    let rt = rt.enable_all().build().map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
    rt.block_on(async {
        let listener = topicscope_service::bind(&bind).await.map_err(|e| CliError { kind: ExitKind::Io, message: e.to_string() })?;
        let addr = listener.local_addr().map_err(|e| CliError::io(Path::new(&bind), e))?;
        info!("serving {} topics from {}", m.n_topics(), dir.display());
        writeln!(out, "listening on http://{addr}").and_then(|_| out.flush()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        topicscope_service::serve(listener, app, shutdown).await.map_err(|e| CliError { kind: ExitKind::Io, message: e.to_string() })
    })
}

/// Runs one command, writing its primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists (tests running several
        // commands in one process); the existing pool is then kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Fetch(a) => fetch::run(a, out),
        Command::Profile(a) => {
            let prepared = pipeline::prepare(&load_config(&a.config)?)?;
            print_json(out, &prepared.profile)
        }
        Command::Prepare(a) => prepare(a, out),
        Command::Tune(a) => tune(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Test(a) => test(a, out),
        Command::Export(a) => export(a, out),
        Command::Serve(a) => serve(a, cli.threads, out),
    }
}
