use serde::{Deserialize, Serialize};

use super::{ClusterAssignment, ClusterError, MstEdge, Selection};

/// One cluster of the condensed hierarchy. Density levels are
/// `lambda = 1 / distance`; a zero distance gives `lambda = inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedNode {
    pub parent: Option<usize>,
    pub birth_lambda: f64,
    /// Largest lambda at which a point or child cluster left this cluster.
    pub death_lambda: f64,
    pub size: usize,
    pub stability: f64,
    pub children: Vec<usize>,
    pub selected: bool,
}

impl CondensedNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Clusters indexed by id; id 0 is the root holding every point. Parents
/// always have smaller ids than their children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub nodes: Vec<CondensedNode>,
    /// Cluster each point fell out of, and the lambda at which it did.
    pub point_cluster: Vec<usize>,
    pub point_lambda: Vec<f64>,
}

impl CondensedTree {
    pub fn root_only(n: usize) -> Self {
        Self {
            nodes: vec![CondensedNode {
                parent: None,
                birth_lambda: 0.0,
                death_lambda: 0.0,
                size: n,
                stability: 0.0,
                children: Vec::new(),
                selected: false,
            }],
            point_cluster: vec![0; n],
            point_lambda: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.nodes[c].is_leaf()).collect()
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.nodes[c].selected).collect()
    }
}

fn lambda(weight: f64) -> f64 {
    if weight > 0.0 {
        1.0 / weight
    } else {
        f64::INFINITY
    }
}

fn excess(lambda: f64, birth: f64) -> f64 {
    if lambda == birth {
        0.0
    } else {
        lambda - birth
    }
}

/// Single-linkage dendrogram built from MST edges: node ids below `n` are
/// points, node `n + t` is the `t`-th merge.
struct Dendrogram {
    n: usize,
    children: Vec<(usize, usize)>,
    weight: Vec<f64>,
    size: Vec<usize>,
}

impl Dendrogram {
    fn from_mst(mst: &[MstEdge], n: usize) -> Self {
        let mut edges = mst.to_vec();
        edges.sort_by(|x, y| {
            let (kx, ky) = (x.key(), y.key());
            kx.0.total_cmp(&ky.0).then((kx.1, kx.2).cmp(&(ky.1, ky.2)))
        });
        let mut parent: Vec<usize> = (0..n).collect();
        let mut node_of: Vec<usize> = (0..n).collect();
        let mut d = Dendrogram { n, children: Vec::new(), weight: Vec::new(), size: Vec::new() };
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in edges {
            let (lo, hi) = (e.a.min(e.b), e.a.max(e.b));
            let (ra, rb) = (find(&mut parent, lo), find(&mut parent, hi));
            debug_assert_ne!(ra, rb, "MST edges never close a cycle");
            let (left, right) = (node_of[ra], node_of[rb]);
            let id = n + d.children.len();
            let size = d.node_size(left) + d.node_size(right);
            d.children.push((left, right));
            d.weight.push(e.weight);
            d.size.push(size);
            parent[ra] = rb;
            node_of[rb] = id;
        }
        d
    }

    fn node_size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.size[node - self.n]
        }
    }

    fn root(&self) -> usize {
        if self.children.is_empty() {
            0
        } else {
            self.n + self.children.len() - 1
        }
    }

    fn points_under(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if v < self.n {
                out.push(v);
            } else {
                let (l, r) = self.children[v - self.n];
                stack.push(r);
                stack.push(l);
            }
        }
    }
}

/// Condenses the single-linkage hierarchy of `mst` (a spanning tree over `n`
/// points) with minimum cluster size `min_cluster_size`, then selects flat
/// clusters. The root is never selected, so data without any split is all
/// outliers.
pub fn condense_and_extract(
    mst: &[MstEdge],
    n: usize,
    min_cluster_size: usize,
    selection: Selection,
) -> Result<(CondensedTree, ClusterAssignment), ClusterError> {
    if min_cluster_size < 2 {
        return Err(ClusterError::InvalidParams("min_cluster_size must be at least 2".into()));
    }
    if n > 0 && mst.len() != n - 1 {
        return Err(ClusterError::InvalidParams(format!(
            "spanning tree over {n} points needs {} edges, got {}",
            n - 1,
            mst.len()
        )));
    }
    if n < min_cluster_size {
        return Ok((CondensedTree::root_only(n), ClusterAssignment::all_outliers(n)));
    }
    let dendro = Dendrogram::from_mst(mst, n);
    let mut tree = CondensedTree::root_only(n);
    let mut scratch = Vec::new();
    let mut stack = vec![(dendro.root(), 0usize)];
    while let Some((node, cid)) = stack.pop() {
        if node < n {
            // Only reachable when the whole input is one point.
            tree.point_cluster[node] = cid;
            tree.point_lambda[node] = tree.nodes[cid].birth_lambda;
            continue;
        }
        let (l, r) = dendro.children[node - n];
        let lam = lambda(dendro.weight[node - n]);
        let (big_l, big_r) = (
            dendro.node_size(l) >= min_cluster_size,
            dendro.node_size(r) >= min_cluster_size,
        );
        let birth = tree.nodes[cid].birth_lambda;
        let node_c = &mut tree.nodes[cid];
        node_c.death_lambda = node_c.death_lambda.max(lam);
        if big_l && big_r {
            let mut ids = [0usize; 2];
            for (slot, child) in [l, r].into_iter().enumerate() {
                let size = dendro.node_size(child);
                let id = tree.nodes.len();
                tree.nodes.push(CondensedNode {
                    parent: Some(cid),
                    birth_lambda: lam,
                    death_lambda: lam,
                    size,
                    stability: 0.0,
                    children: Vec::new(),
                    selected: false,
                });
                tree.nodes[cid].children.push(id);
                tree.nodes[cid].stability += excess(lam, birth) * size as f64;
                ids[slot] = id;
            }
            stack.push((r, ids[1]));
            stack.push((l, ids[0]));
        } else {
            for (child, big) in [(l, big_l), (r, big_r)] {
                if big {
                    stack.push((child, cid));
                } else {
                    scratch.clear();
                    dendro.points_under(child, &mut scratch);
                    for &p in &scratch {
                        tree.point_cluster[p] = cid;
                        tree.point_lambda[p] = lam;
                    }
                    tree.nodes[cid].stability += excess(lam, birth) * scratch.len() as f64;
                }
            }
        }
    }
    select(&mut tree, selection);
    let assignment = labels_from_selection(&tree);
    Ok((tree, assignment))
}

fn select(tree: &mut CondensedTree, selection: Selection) {
    let m = tree.nodes.len();
    match selection {
        Selection::Leaf => {
            for c in 1..m {
                tree.nodes[c].selected = tree.nodes[c].is_leaf();
            }
        }
        Selection::Eom => {
            let mut best = vec![0.0; m];
            for c in (1..m).rev() {
                let own = tree.nodes[c].stability;
                if tree.nodes[c].is_leaf() {
                    best[c] = own;
                    tree.nodes[c].selected = true;
                    continue;
                }
                let below: f64 = tree.nodes[c].children.iter().map(|&k| best[k]).sum();
                if own >= below {
                    best[c] = own;
                    tree.nodes[c].selected = true;
                    let mut stack = tree.nodes[c].children.clone();
                    while let Some(k) = stack.pop() {
                        tree.nodes[k].selected = false;
                        stack.extend_from_slice(&tree.nodes[k].children);
                    }
                } else {
                    best[c] = below;
                }
            }
        }
    }
}

fn labels_from_selection(tree: &CondensedTree) -> ClusterAssignment {
    let m = tree.nodes.len();
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for c in 1..m {
        owner[c] = if tree.nodes[c].selected {
            Some(c)
        } else {
            tree.nodes[c].parent.and_then(|p| owner[p])
        };
    }
    let raw: Vec<i64> = tree
        .point_cluster
        .iter()
        .map(|&c| owner[c].map_or(-1, |s| s as i64))
        .collect();
    ClusterAssignment::from_raw(&raw)
}
