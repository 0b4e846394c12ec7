use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{condense_and_extract, ClusterAssignment, ClusterError, CondensedTree, DensityParams, Metric};
use crate::matrix::Matrix;

/// Distance from each point to its `min_samples`-th nearest neighbour, the
/// point itself excluded.
pub fn core_distances(x: &Matrix, min_samples: usize, metric: Metric) -> Result<Vec<f64>, ClusterError> {
    let n = x.rows();
    if min_samples == 0 || n <= min_samples {
        return Err(ClusterError::TooFewPoints { n, min_samples });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| metric.distance(x.row(i), x.row(j)))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

/// `max(core(a), core(b), dist(a, b))`, evaluated on demand.
#[derive(Clone, Copy, Debug)]
pub struct MutualReachability<'a> {
    pub points: &'a Matrix,
    pub core: &'a [f64],
    pub metric: Metric,
}

impl MutualReachability<'_> {
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let d = self.metric.distance(self.points.row(a), self.points.row(b));
        d.max(self.core[a]).max(self.core[b])
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Dense `n x n` matrix, for small inputs and tests.
    pub fn matrix(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m.set(a, b, self.distance(a, b));
                }
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl MstEdge {
    /// Ordering key: weight, then the endpoint pair with the smaller first.
    pub fn key(&self) -> (f64, usize, usize) {
        (self.weight, self.a.min(self.b), self.a.max(self.b))
    }
}

fn key_less(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (a.1, a.2) < (b.1, b.2),
    }
}

/// Prim's algorithm over the complete graph on `n` vertices with edge
/// weights `weight(a, b)`. Starts from vertex 0; among equal weights the edge
/// with the lexicographically smaller endpoint pair wins. Returns the `n - 1`
/// edges in the order they joined the tree.
pub fn build_mst<F>(n: usize, weight: F) -> Vec<MstEdge>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let in_tree_ref = &in_tree;
        best.par_iter_mut().enumerate().for_each(|(v, slot)| {
            if in_tree_ref[v] {
                return;
            }
            let w = weight(current, v);
            let cand = (w, current.min(v), current.max(v));
            let have = (slot.0, slot.1.min(v), slot.1.max(v));
            if slot.1 == usize::MAX || key_less(cand, have) {
                *slot = (w, current);
            }
        });
        let mut pick: Option<(usize, (f64, usize, usize))> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let (w, from) = best[v];
            let key = (w, from.min(v), from.max(v));
            if pick.is_none_or(|(_, k)| key_less(key, k)) {
                pick = Some((v, key));
            }
        }
        let (v, _) = pick.expect("a vertex remains outside the tree");
        in_tree[v] = true;
        edges.push(MstEdge { a: best[v].1, b: v, weight: best[v].0 });
        current = v;
    }
    edges
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityResult {
    pub core_distances: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub tree: CondensedTree,
    pub assignment: ClusterAssignment,
}

/// Core distances, mutual-reachability MST, condensation and extraction.
/// Inputs too small to hold a cluster come back as all outliers.
pub fn density_cluster(x: &Matrix, params: &DensityParams) -> Result<DensityResult, ClusterError> {
    params.validate()?;
    let n = x.rows();
    if n < params.min_cluster_size || n <= params.min_samples {
        return Ok(DensityResult {
            core_distances: Vec::new(),
            mst: Vec::new(),
            tree: CondensedTree::root_only(n),
            assignment: ClusterAssignment::all_outliers(n),
        });
    }
    let core = core_distances(x, params.min_samples, params.metric)?;
    let mr = MutualReachability { points: x, core: &core, metric: params.metric };
    let mst = build_mst(n, |a, b| mr.distance(a, b));
    let (tree, assignment) = condense_and_extract(&mst, n, params.min_cluster_size, params.selection)?;
    Ok(DensityResult { core_distances: core, mst, tree, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn random_points(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.unit_f64() * 10.0).collect()).collect();
        Matrix::from_rows(&rows)
    }

    /// Kruskal with a plain union-find, as an independent MST weight oracle.
    fn kruskal_weight(n: usize, w: &dyn Fn(usize, usize) -> f64) -> f64 {
        let mut edges: Vec<(f64, usize, usize)> =
            (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| (w(a, b), a, b)).collect();
        edges.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut total = 0.0;
        for (wt, a, b) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                total += wt;
            }
        }
        total
    }

    #[test]
    fn collinear_core_distances() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        assert_eq!(core_distances(&x, 1, Metric::Euclidean).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(core_distances(&x, 2, Metric::Euclidean).unwrap(), vec![2.0, 1.0, 2.0]);
        assert!(core_distances(&x, 3, Metric::Euclidean).is_err());
    }

    #[test]
    fn duplicates_have_zero_core_distance() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]]);
        let core = core_distances(&x, 1, Metric::Euclidean).unwrap();
        assert_eq!(&core[..2], &[0.0, 0.0]);
    }

    #[test]
    fn core_distances_match_brute_force_sort() {
        let x = random_points(50, 2, 4);
        for k in [1, 3, 7] {
            let core = core_distances(&x, k, Metric::Euclidean).unwrap();
            for i in 0..50 {
                let mut d: Vec<f64> = (0..50).filter(|&j| j != i)
                    .map(|j| crate::matrix::euclidean(x.row(i), x.row(j))).collect();
                d.sort_by(f64::total_cmp);
                assert_eq!(core[i], d[k - 1]);
            }
        }
    }

    #[test]
    fn mutual_reachability_rules() {
        let x = Matrix::from_rows(&[[0.0], [2.0]]);
        let zero = [0.0, 0.0];
        let mr = MutualReachability { points: &x, core: &zero, metric: Metric::Euclidean };
        assert_eq!(mr.distance(0, 1), 2.0);
        let cores = [5.0, 1.0];
        let mr = MutualReachability { points: &x, core: &cores, metric: Metric::Euclidean };
        assert_eq!(mr.distance(0, 1), 5.0);

        let x = random_points(20, 3, 8);
        let core = core_distances(&x, 4, Metric::Euclidean).unwrap();
        let mr = MutualReachability { points: &x, core: &core, metric: Metric::Euclidean };
        let m = mr.matrix();
        for a in 0..20 {
            for b in 0..20 {
                if a == b {
                    continue;
                }
                let d = crate::matrix::euclidean(x.row(a), x.row(b));
                assert_eq!(m.get(a, b), d.max(core[a]).max(core[b]));
                assert_eq!(m.get(a, b), m.get(b, a));
            }
        }
    }

    #[test]
    fn two_points_single_edge() {
        let e = build_mst(2, |_, _| 3.5);
        assert_eq!(e, vec![MstEdge { a: 0, b: 1, weight: 3.5 }]);
    }

    #[test]
    fn path_data_gives_the_path() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0], [6.0], [10.0]]);
        let e = build_mst(5, |a, b| crate::matrix::euclidean(x.row(a), x.row(b)));
        let mut pairs: Vec<(usize, usize)> = e.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn prim_matches_kruskal_weight() {
        let x = random_points(30, 3, 12);
        let core = core_distances(&x, 3, Metric::Euclidean).unwrap();
        let mr = MutualReachability { points: &x, core: &core, metric: Metric::Euclidean };
        let prim: f64 = build_mst(30, |a, b| mr.distance(a, b)).iter().map(|e| e.weight).sum();
        let oracle = kruskal_weight(30, &|a, b| mr.distance(a, b));
        assert!((prim - oracle).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mst_weight_ignores_vertex_relabeling(seed: u64, n in 2usize..25) {
            // Integer weights force many ties; relabel vertices by reversal.
            let mut rng = SeededRng::new(seed);
            let w: Vec<Vec<f64>> = {
                let mut m = vec![vec![0.0; n]; n];
                for a in 0..n {
                    for b in a + 1..n {
                        let v = rng.below(4) as f64;
                        m[a][b] = v;
                        m[b][a] = v;
                    }
                }
                m
            };
            let fwd: f64 = build_mst(n, |a, b| w[a][b]).iter().map(|e| e.weight).sum();
            let rev: f64 = build_mst(n, |a, b| w[n - 1 - a][n - 1 - b]).iter().map(|e| e.weight).sum();
            prop_assert_eq!(fwd, rev);
            prop_assert_eq!(fwd, kruskal_weight(n, &|a, b| w[a][b]));
        }
    }
}
