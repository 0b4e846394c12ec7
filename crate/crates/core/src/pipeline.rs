//! Stage wiring used by the command line tool: prepare, tune and fit.

use chrono::NaiveDate;
use log::{info, warn};

use crate::cluster::{density_cluster, DensityParams};
use crate::config::RunConfig;
use crate::dynamics::{build_series, load_cases, load_events, BinWidth, OverlaySeries};
use crate::embedstore::{align, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::ingest::{parse_metadata, profile_corpus, CleanCorpus, CorpusProfile, RowError};
use crate::matrix::Matrix;
use crate::model::{round_f32, ModelInfo, TopicModel};
use crate::reduce::{pca_fit, pca_transform, Projection};
use crate::represent::{build_class_counts, class_tfidf};
use crate::stopwords::{stopword_hash, STOPWORD_LIST_ID};
use crate::tune::{grid_search, Grid, TuneOutcome};

pub struct Prepared {
    pub corpus: CleanCorpus,
    pub profile: CorpusProfile,
    pub skipped: Vec<RowError>,
}

/// Parses the configured metadata file, then filters and deduplicates it.
/// The profile describes the raw parsed records.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let path = &cfg.corpus.path;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_metadata(std::io::BufReader::new(file), cfg.corpus.source_format()?, &cfg.corpus.schema)?;
    for row in parsed.skipped.iter().take(20) {
        warn!("{}: line {}: {}", path.display(), row.line, row.message);
    }
    let profile = profile_corpus(&parsed.records);
    let mut corpus = CleanCorpus::prepare(parsed.records, &cfg.filter.spec()?);
    corpus.provenance.malformed_rows = parsed.skipped.len();
    info!(
        "prepared {} records ({} dropped, {} malformed rows)",
        corpus.records.len(),
        corpus.provenance.total_dropped(),
        parsed.skipped.len()
    );
    Ok(Prepared { corpus, profile, skipped: parsed.skipped })
}

/// Embeddings of the corpus records, in corpus order.
pub fn aligned_vectors(corpus: &CleanCorpus, emb: &EmbeddingMatrix) -> Result<(CleanCorpus, Matrix)> {
    let a = align(&corpus.records, emb)?;
    if a.corpus_only > 0 || a.embedding_only > 0 {
        warn!("{} records lack embeddings, {} embeddings lack records", a.corpus_only, a.embedding_only);
    }
    let kept = CleanCorpus { records: a.records, window: corpus.window, provenance: corpus.provenance.clone() };
    Ok((kept, a.embeddings.vectors().clone()))
}

pub fn tune(corpus: &CleanCorpus, emb: &EmbeddingMatrix, grid: &Grid, fraction: f64, seed: u64) -> Result<TuneOutcome> {
    let (_, x) = aligned_vectors(corpus, emb)?;
    Ok(grid_search(&x, grid, fraction, seed)?)
}

pub fn load_overlays(cfg: &RunConfig) -> Result<OverlaySeries> {
    let mut out = OverlaySeries::default();
    if let Some(p) = &cfg.overlays.cases {
        out.cases = load_cases(p)?;
    }
    if let Some(p) = &cfg.overlays.events {
        out.events = load_events(p)?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitParams {
    pub reduce_k: usize,
    pub cluster: DensityParams,
    pub reduce_frequent_words: bool,
}

fn rounded_projection(p: Projection) -> Projection {
    let Projection { mean, basis, explained_variance_ratio, degenerate } = p;
    let (rows, cols) = (basis.rows(), basis.cols());
    Projection {
        mean: mean.into_iter().map(round_f32).collect(),
        basis: Matrix::new(rows, cols, basis.into_vec().into_iter().map(round_f32).collect()),
        explained_variance_ratio: explained_variance_ratio.into_iter().map(round_f32).collect(),
        degenerate,
    }
}

fn centroids(x: &Matrix, labels: &[i32], topics: usize) -> Matrix {
    let mut sums = Matrix::zeros(topics, x.cols());
    let mut counts = vec![0usize; topics];
    for (row, &l) in x.iter_rows().zip(labels) {
        if l >= 0 {
            counts[l as usize] += 1;
            for (s, v) in sums.row_mut(l as usize).iter_mut().zip(row) {
                *s += v;
            }
        }
    }
    for (t, &c) in counts.iter().enumerate() {
        for s in sums.row_mut(t) {
            *s = round_f32(*s / c.max(1) as f64);
        }
    }
    sums
}

/// Projection, density clustering, term weights and time series on the full
/// corpus. Documents without an embedding are left out.
pub fn fit(
    corpus: &CleanCorpus,
    emb: &EmbeddingMatrix,
    params: &FitParams,
    overlays: OverlaySeries,
    config_hash: &str,
    created_at: String,
) -> Result<TopicModel> {
    let (corpus, x) = aligned_vectors(corpus, emb)?;
    let projection = rounded_projection(pca_fit(&x, params.reduce_k)?);
    let reduced = pca_transform(&projection, &x)?;
    info!("reduced {} x {} to {} dimensions", x.rows(), x.cols(), reduced.cols());
    let fit = density_cluster(&reduced, &params.cluster)?;
    let assignment = fit.assignment;
    info!("{} topics, {:.1}% outliers", assignment.n_clusters(), 100.0 * assignment.outlier_fraction());
    let docs: Vec<&str> = corpus.records.iter().map(|r| r.abstract_text.as_str()).collect();
    let (vocab, counts) = build_class_counts(&docs, assignment.labels())?;
    let tfidf = class_tfidf(&vocab, &counts, params.reduce_frequent_words)?;
    let dates: Vec<NaiveDate> = corpus.dates();
    let topics = assignment.n_clusters();
    let series = BinWidth::ALL
        .iter()
        .map(|&w| build_series(assignment.labels(), &dates, topics, w, &corpus.window))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut tree = fit.tree;
    for node in &mut tree.nodes {
        node.birth_lambda = round_f32(node.birth_lambda);
        node.death_lambda = round_f32(node.death_lambda);
        node.stability = round_f32(node.stability);
    }
    for l in &mut tree.point_lambda {
        *l = round_f32(*l);
    }
    let info = ModelInfo {
        created_at,
        config_hash: config_hash.to_string(),
        stopword_list: STOPWORD_LIST_ID.to_string(),
        stopword_hash: stopword_hash(),
        window: corpus.window,
        documents: corpus.records.len(),
        topics,
        outliers: assignment.outlier_count(),
        vocabulary: vocab.len(),
        reduce_frequent_words: params.reduce_frequent_words,
        avg_tokens: tfidf.avg_tokens,
        embedding_dim: x.cols(),
        reduced_dim: reduced.cols(),
    };
    Ok(TopicModel {
        info,
        centroids: centroids(&reduced, assignment.labels(), topics),
        projection,
        doc_ids: corpus.records.iter().map(|r| r.record_id.clone()).collect(),
        doc_dates: dates,
        topic_sizes: assignment.sizes(),
        assignment,
        tree,
        vocab,
        weights: tfidf.weights.rounded_to_f32(),
        series,
        overlays,
    })
}
