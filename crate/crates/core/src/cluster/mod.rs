//! Clustering algorithms and validity indices.
//!
//! * [`kmeans`], [`silhouette`] and [`select_k`] cover the exploratory
//!   centroid-based pass.
//! * [`core_distances`], [`MutualReachability`], [`build_mst`] and
//!   [`condense_and_extract`] make up hierarchical density clustering;
//!   [`density_cluster`] runs them end to end.
//! * [`dbcv`] scores a density clustering.
//!
//! Distances are computed densely (O(n^2) time, O(n) extra memory: no
//! distance matrix is materialized), which is intended for up to roughly
//! twenty thousand points.

mod condense;
mod dbcv;
mod density;
mod kmeans;
mod silhouette;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{dot, euclidean, norm};

pub use condense::{condense_and_extract, CondensedNode, CondensedTree};
pub use dbcv::{all_points_core_distances, dbcv};
pub use density::{build_mst, core_distances, density_cluster, DensityResult, MstEdge, MutualReachability};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};
pub use silhouette::{select_k, silhouette, KSelection};

pub const OUTLIER: i32 = -1;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k must be in 1..={n}, got {k}")]
    InvalidK { k: usize, n: usize },
    #[error("k range {lo}..={hi} must lie within 2..={n}")]
    InvalidRange { lo: usize, hi: usize, n: usize },
    #[error("silhouette needs at least 2 clusters, found {0}")]
    TooFewClusters(usize),
    #[error("need more than min_samples={min_samples} points, got {n}")]
    TooFewPoints { n: usize, min_samples: usize },
    #[error("undefined validity: {0}")]
    UndefinedValidity(String),
    #[error("invalid density parameters: {0}")]
    InvalidParams(String),
    #[error("labels cover {labels} points but the data has {rows}")]
    LabelMismatch { labels: usize, rows: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// Angular distance `1 - cos(a, b)`.
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Cosine => {
                let (na, nb) = (norm(a), norm(b));
                if na == 0.0 || nb == 0.0 {
                    return if na == nb { 0.0 } else { 1.0 };
                }
                (1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(ClusterError::InvalidParams(format!("unknown metric `{s}`"))),
        }
    }
}

/// How clusters are read off the condensed tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Every leaf of the condensed tree.
    #[default]
    Leaf,
    /// Excess-of-mass: the stability-maximizing antichain.
    Eom,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::Leaf => "leaf",
            Selection::Eom => "eom",
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leaf" => Ok(Selection::Leaf),
            "eom" => Ok(Selection::Eom),
            _ => Err(ClusterError::InvalidParams(format!("unknown selection `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DensityParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub selection: Selection,
}

impl DensityParams {
    /// `min_samples` defaults to `min_cluster_size`.
    pub fn new(min_cluster_size: usize) -> Self {
        Self {
            min_cluster_size,
            min_samples: min_cluster_size,
            metric: Metric::Euclidean,
            selection: Selection::Leaf,
        }
    }

    pub fn with_min_samples(mut self, min_samples: usize) -> Self {
        self.min_samples = min_samples;
        self
    }

    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.selection = selection;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_cluster_size < 2 {
            return Err(ClusterError::InvalidParams("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples == 0 || self.min_samples > self.min_cluster_size {
            return Err(ClusterError::InvalidParams(format!(
                "min_samples must be in 1..={}, got {}",
                self.min_cluster_size, self.min_samples
            )));
        }
        Ok(())
    }
}

/// Per-row labels: [`OUTLIER`] or a cluster id in `0..n_clusters`, numbered
/// by decreasing size with ties broken by the smallest member row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<i32>,
    n_clusters: usize,
}

impl ClusterAssignment {
    /// Renumbers arbitrary non-negative labels into canonical order. Negative
    /// labels become outliers.
    pub fn from_raw(raw: &[i64]) -> Self {
        use std::collections::BTreeMap;
        // raw label -> (size, first row)
        let mut stats: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
        for (i, &l) in raw.iter().enumerate() {
            if l >= 0 {
                let e = stats.entry(l).or_insert((0, i));
                e.0 += 1;
            }
        }
        let mut order: Vec<(i64, usize, usize)> = stats.into_iter().map(|(l, (s, f))| (l, s, f)).collect();
        order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let remap: std::collections::HashMap<i64, i32> =
            order.iter().enumerate().map(|(new, &(old, _, _))| (old, new as i32)).collect();
        let labels = raw.iter().map(|l| remap.get(l).copied().unwrap_or(OUTLIER)).collect();
        Self { labels, n_clusters: order.len() }
    }

    pub fn all_outliers(n: usize) -> Self {
        Self { labels: vec![OUTLIER; n], n_clusters: 0 }
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_clusters];
        for &l in &self.labels {
            if l >= 0 {
                s[l as usize] += 1;
            }
        }
        s
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    pub fn outlier_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.outlier_count() as f64 / self.labels.len() as f64
        }
    }
}

/// Adjusted Rand index between two labelings. Outliers count as one more
/// class.
pub fn adjusted_rand_index(a: &[i32], b: &[i32]) -> f64 {
    use std::collections::HashMap;
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(i32, i32), f64> = HashMap::new();
    let mut ra: HashMap<i32, f64> = HashMap::new();
    let mut rb: HashMap<i32, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sa: f64 = ra.values().map(|&c| comb2(c)).sum();
    let sb: f64 = rb.values().map(|&c| comb2(c)).sum();
    let expected = sa * sb / comb2(n);
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_numbering() {
        let a = ClusterAssignment::from_raw(&[7, 3, 3, -1, 7, 9, 9]);
        // sizes: 7 -> 2 (first row 0), 3 -> 2 (first row 1), 9 -> 2 (first row 5)
        assert_eq!(a.labels(), &[0, 1, 1, -1, 0, 2, 2]);
        let b = ClusterAssignment::from_raw(&[1, 0, 0, 0]);
        assert_eq!(b.labels(), &[1, 0, 0, 0]);
        assert_eq!(b.sizes(), vec![3, 1]);
        assert_eq!(ClusterAssignment::all_outliers(3).outlier_fraction(), 1.0);
    }

    #[test]
    fn cosine_distance() {
        assert!((Metric::Cosine.distance(&[1.0, 0.0], &[0.0, 2.0]) - 1.0).abs() < 1e-12);
        assert!(Metric::Cosine.distance(&[1.0, 1.0], &[3.0, 3.0]).abs() < 1e-12);
        assert_eq!(Metric::Cosine.distance(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn ari_extremes() {
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]) - 1.0).abs() < 1e-12);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(DensityParams::new(100).with_min_samples(10).validate().is_ok());
        assert!(DensityParams::new(5).with_min_samples(10).validate().is_err());
        assert!(DensityParams::new(1).validate().is_err());
    }
}
