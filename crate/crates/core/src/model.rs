//! The fitted topic model: every stage output needed to answer searches,
//! series requests and window tests without refitting.
//!
//! Floating-point state is held at the precision it is stored with on disk
//! (`f32`), so a model answers identically before and after a save/load
//! round trip.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterAssignment, CondensedTree};
use crate::dynamics::{series_for_topics, two_month_intervals, heatmap_csv, BinWidth, DynamicsError, OverlaySeries, TopicSeries, TopicTimeSeries};
use crate::ingest::DateWindow;
use crate::matrix::{dot, norm, Matrix};
use crate::reduce::{Projection, ReduceError};
use crate::represent::{search_topics, top_terms, RepresentError, SearchResult, SparseWeights, TopicCard, Vocabulary};
use crate::stats::{test_topic_windows, StatsError, WindowTest};

/// Terms attached to each search result card.
pub const CARD_TERMS: usize = 50;
/// Upper bound on the number of search results.
pub const MAX_RESULTS: usize = 20;

pub fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub created_at: String,
    pub config_hash: String,
    pub stopword_list: String,
    pub stopword_hash: String,
    pub window: DateWindow,
    pub documents: usize,
    pub topics: usize,
    pub outliers: usize,
    pub vocabulary: usize,
    pub reduce_frequent_words: bool,
    /// Mean token count per topic class.
    pub avg_tokens: f64,
    pub embedding_dim: usize,
    pub reduced_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicModel {
    pub info: ModelInfo,
    pub projection: Projection,
    pub doc_ids: Vec<String>,
    pub doc_dates: Vec<NaiveDate>,
    pub assignment: ClusterAssignment,
    pub tree: CondensedTree,
    pub vocab: Vocabulary,
    pub weights: SparseWeights,
    pub topic_sizes: Vec<usize>,
    /// Mean reduced coordinates of each topic's members, `topics x k`.
    pub centroids: Matrix,
    /// Series at bin widths 1 to 4 weeks, in that order.
    pub series: Vec<TopicTimeSeries>,
    pub overlays: OverlaySeries,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Represent(#[from] RepresentError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.topic_sizes.len()
    }

    pub fn has_topic(&self, topic: usize) -> bool {
        topic < self.n_topics()
    }

    pub fn series(&self, width: BinWidth) -> &TopicTimeSeries {
        &self.series[width.weeks() as usize - 1]
    }

    pub fn search(&self, query: &str, n: usize) -> Result<SearchResult, RepresentError> {
        search_topics(&self.weights, &self.vocab, &self.topic_sizes, query, n.min(MAX_RESULTS), CARD_TERMS)
    }

    pub fn topic_card(&self, topic: usize, n_terms: usize) -> Result<TopicCard, RepresentError> {
        Ok(TopicCard {
            topic_id: topic,
            size: *self.topic_sizes.get(topic).ok_or(RepresentError::UnknownTopic(topic))?,
            terms: top_terms(&self.weights, &self.vocab, topic, n_terms)?,
            similarity: None,
        })
    }

    /// Projects a raw embedding and ranks topics by cosine similarity to
    /// their reduced centroids, clamped to `[0, 1]`.
    pub fn search_by_embedding(&self, embedding: &[f64], n: usize) -> Result<Vec<TopicCard>, QueryError> {
        let q = self.projection.project_vector(embedding)?;
        let qn = norm(&q);
        let mut scored: Vec<(usize, f64)> = (0..self.n_topics())
            .map(|t| {
                let c = self.centroids.row(t);
                let denom = qn * norm(c);
                (t, if denom > 0.0 { (dot(&q, c) / denom).clamp(0.0, 1.0) } else { 0.0 })
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(n.min(MAX_RESULTS));
        scored
            .into_iter()
            .map(|(t, s)| Ok(TopicCard { similarity: Some(s), ..self.topic_card(t, CARD_TERMS)? }))
            .collect()
    }

    /// Series of one topic over `range` (the whole window when `None`).
    pub fn topic_series(&self, topic: usize, width: BinWidth, range: Option<DateWindow>) -> Result<TopicSeries, DynamicsError> {
        let range = range.unwrap_or(self.info.window);
        Ok(series_for_topics(self.series(width), &[topic], &range)?.remove(0))
    }

    pub fn test_windows(
        &self,
        topic: usize,
        window1: &DateWindow,
        window2: &DateWindow,
        width: BinWidth,
        alpha: f64,
    ) -> Result<WindowTest, StatsError> {
        test_topic_windows(self.series(width), topic, window1, window2, alpha)
    }

    /// Median intensity times 1000 per topic and two-month interval.
    pub fn heatmap_csv(&self, width: BinWidth) -> Result<String, DynamicsError> {
        let topics: Vec<usize> = (0..self.n_topics()).collect();
        heatmap_csv(self.series(width), &topics, &two_month_intervals(&self.info.window))
    }
}
