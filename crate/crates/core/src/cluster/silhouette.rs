use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kmeans, ClusterError, KMeansOptions};
use crate::matrix::{euclidean, Matrix};

/// Mean silhouette over non-outlier points (Euclidean distance).
///
/// Per point `s = (b - a) / max(a, b)`, where `a` is the mean distance to the
/// rest of its cluster and `b` the smallest mean distance to another
/// cluster. Singleton clusters and `a = b = 0` give `s = 0`. Outliers are
/// left out of every mean.
pub fn silhouette(x: &Matrix, labels: &[i32]) -> Result<f64, ClusterError> {
    if labels.len() != x.rows() {
        return Err(ClusterError::LabelMismatch { labels: labels.len(), rows: x.rows() });
    }
    let n_clusters = labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut sizes = vec![0usize; n_clusters];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        sizes[l as usize] += 1;
    }
    let present = sizes.iter().filter(|&&s| s > 0).count();
    if present < 2 {
        return Err(ClusterError::TooFewClusters(present));
    }
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] >= 0).collect();
    let total: f64 = members
        .par_iter()
        .map(|&i| {
            let own = labels[i] as usize;
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_clusters];
            for &j in &members {
                if j != i {
                    sums[labels[j] as usize] += euclidean(x.row(i), x.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..n_clusters)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / members.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub best_k: usize,
    /// `(k, mean silhouette)` for every k tried, ascending k.
    pub scores: Vec<(usize, f64)>,
}

/// Runs k-means for every k in `k_min..=k_max` and keeps the silhouette
/// maximizer (smallest k on ties).
pub fn select_k(
    x: &Matrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<KSelection, ClusterError> {
    let n = x.rows();
    if k_min < 2 || k_min > k_max || k_max > n {
        return Err(ClusterError::InvalidRange { lo: k_min, hi: k_max, n });
    }
    let mut scores = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let r = kmeans(x, k, seed, opts)?;
        scores.push((k, silhouette(x, r.assignment.labels())?));
    }
    let best_k = scores
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((k, s)),
        })
        .unwrap()
        .0;
    Ok(KSelection { best_k, scores })
}
