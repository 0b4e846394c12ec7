use rayon::prelude::*;

use super::{build_mst, ClusterError, Metric};
use crate::matrix::Matrix;

/// All-points core distance of every member of one cluster:
/// `(sum_{j != o} d(o, j)^-D / (m - 1))^(-1/D)` with `D` the data
/// dimension. Evaluated in log space so large `D` neither overflows nor
/// underflows; a member with a duplicate gets 0.
pub fn all_points_core_distances(x: &Matrix, members: &[usize], metric: Metric) -> Vec<f64> {
    let m = members.len();
    let dim = x.cols().max(1) as f64;
    members
        .par_iter()
        .map(|&o| {
            if m < 2 {
                return 0.0;
            }
            let mut logs = Vec::with_capacity(m - 1);
            for &j in members {
                if j == o {
                    continue;
                }
                let d = metric.distance(x.row(o), x.row(j));
                if d == 0.0 {
                    return 0.0;
                }
                logs.push(-dim * d.ln());
            }
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
            (-(lse - ((m - 1) as f64).ln()) / dim).exp()
        })
        .collect()
}

struct ClusterShape {
    members: Vec<usize>,
    core: Vec<f64>,
    /// Positions (into `members`) of internal MST nodes.
    internal: Vec<usize>,
    sparseness: f64,
}

fn shape(x: &Matrix, members: Vec<usize>, metric: Metric) -> ClusterShape {
    let core = all_points_core_distances(x, &members, metric);
    let mr = |a: usize, b: usize| {
        metric.distance(x.row(members[a]), x.row(members[b])).max(core[a]).max(core[b])
    };
    let mst = build_mst(members.len(), mr);
    let mut degree = vec![0usize; members.len()];
    for e in &mst {
        degree[e.a] += 1;
        degree[e.b] += 1;
    }
    let mut internal: Vec<usize> = (0..members.len()).filter(|&i| degree[i] >= 2).collect();
    let internal_edges: Vec<f64> = mst
        .iter()
        .filter(|e| degree[e.a] >= 2 && degree[e.b] >= 2)
        .map(|e| e.weight)
        .collect();
    let sparseness = if internal_edges.is_empty() {
        mst.iter().map(|e| e.weight).fold(0.0, f64::max)
    } else {
        internal_edges.into_iter().fold(0.0, f64::max)
    };
    if internal.is_empty() {
        internal = (0..members.len()).collect();
    }
    ClusterShape { members, core, internal, sparseness }
}

/// Density-based clustering validation index in `[-1, 1]`. Outliers
/// (negative labels) are excluded from every density computation but count
/// toward the total that weights each cluster. Needs at least two clusters
/// with at least two members each.
pub fn dbcv(x: &Matrix, labels: &[i32], metric: Metric) -> Result<f64, ClusterError> {
    if labels.len() != x.rows() {
        return Err(ClusterError::LabelMismatch { labels: labels.len(), rows: x.rows() });
    }
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            groups[l as usize].push(i);
        }
    }
    groups.retain(|g| !g.is_empty());
    if groups.len() < 2 {
        return Err(ClusterError::UndefinedValidity(format!(
            "needs at least 2 clusters, found {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(ClusterError::UndefinedValidity(format!(
            "cluster containing row {} has a single member",
            g[0]
        )));
    }
    let shapes: Vec<ClusterShape> = groups.into_par_iter().map(|g| shape(x, g, metric)).collect();

    let k = shapes.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let separations: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&shapes[i], &shapes[j]);
            let mut best = f64::INFINITY;
            for &p in &a.internal {
                for &q in &b.internal {
                    let d = metric
                        .distance(x.row(a.members[p]), x.row(b.members[q]))
                        .max(a.core[p])
                        .max(b.core[q]);
                    best = best.min(d);
                }
            }
            best
        })
        .collect();
    let mut min_sep = vec![f64::INFINITY; k];
    for (&(i, j), &s) in pairs.iter().zip(&separations) {
        min_sep[i] = min_sep[i].min(s);
        min_sep[j] = min_sep[j].min(s);
    }

    let total = labels.len() as f64;
    Ok(shapes
        .iter()
        .zip(&min_sep)
        .map(|(s, &sep)| {
            let denom = sep.max(s.sparseness);
            let v = if denom == 0.0 { 0.0 } else { (sep - s.sparseness) / denom };
            s.members.len() as f64 / total * v
        })
        .sum())
}
