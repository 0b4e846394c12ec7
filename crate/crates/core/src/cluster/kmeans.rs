use rayon::prelude::*;

use super::{ClusterAssignment, ClusterError};
use crate::matrix::{squared_euclidean, Matrix};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Converged once no centroid moves farther than this.
    pub tol: f64,
    /// Independent k-means++ restarts (seeds `seed`, `seed + 1`, ...); the
    /// lowest-inertia run wins, earliest on ties.
    pub n_init: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-6, n_init: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// Row `c` is the centroid of cluster `c`.
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd iterations from k-means++ seeding. An emptied cluster is reseeded
/// at the point farthest from its assigned centroid.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansResult, ClusterError> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    let mut best: Option<KMeansResult> = None;
    for run in 0..opts.n_init.max(1) {
        let r = lloyd(x, k, seed.wrapping_add(run as u64), opts);
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one run"))
}

fn plus_plus_seeds(x: &Matrix, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let n = x.rows();
    let mut chosen = vec![rng.index(n)];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_euclidean(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.unit_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target above the final sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Every remaining point coincides with a centroid.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.index(free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_euclidean(x.row(i), x.row(next)));
        }
    }
    chosen
}

fn assign(x: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..centroids.rows() {
                let d = squared_euclidean(row, centroids.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

fn lloyd(x: &Matrix, k: usize, seed: u64, opts: &KMeansOptions) -> KMeansResult {
    let (n, d) = (x.rows(), x.cols());
    let mut rng = SeededRng::new(seed);
    let seeds = plus_plus_seeds(x, k, &mut rng);
    let mut centroids = x.select_rows(&seeds);
    let mut history = Vec::new();
    let mut iterations = 0;
    let (mut labels, mut dist) = assign(x, &centroids);
    history.push(dist.iter().sum());

    while iterations < opts.max_iter {
        iterations += 1;
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] == 0 {
                // Farthest point from its own centroid not already taken.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None::<usize>, |b, i| match b {
                        Some(j) if dist[j] >= dist[i] => Some(j),
                        _ => Some(i),
                    })
                    .unwrap();
                taken[far] = true;
                sums.row_mut(c).copy_from_slice(x.row(far));
                counts[c] = 1;
                dist[far] = 0.0;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let new: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            shift = shift.max(squared_euclidean(&new, centroids.row(c)).sqrt());
            centroids.row_mut(c).copy_from_slice(&new);
        }
        let (l, dd) = assign(x, &centroids);
        labels = l;
        dist = dd;
        history.push(dist.iter().sum());
        if shift < opts.tol {
            break;
        }
    }

    let raw: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
    let assignment = ClusterAssignment::from_raw(&raw);
    // Reorder centroid rows to the canonical numbering.
    let mut ordered = Matrix::zeros(k, d);
    let mut placed = vec![false; k];
    for (i, &old) in labels.iter().enumerate() {
        let new = assignment.labels()[i] as usize;
        if !placed[new] {
            ordered.row_mut(new).copy_from_slice(centroids.row(old));
            placed[new] = true;
        }
    }
    // Centroids left without members (possible with duplicate points) go last.
    let mut spare = (0..k).filter(|c| !labels.contains(c));
    for (slot, done) in placed.iter().enumerate() {
        if !done {
            if let Some(c) = spare.next() {
                ordered.row_mut(slot).copy_from_slice(centroids.row(c));
            }
        }
    }
    KMeansResult {
        inertia: *history.last().unwrap(),
        assignment,
        centroids: ordered,
        inertia_history: history,
        iterations,
    }
}
