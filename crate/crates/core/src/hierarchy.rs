//! Agglomerative clustering over a similarity matrix and the automatic dendrogram cut.
//!
//! Clusters are merged by minimum pairwise similarity: the similarity of two
//! clusters is the lowest similarity between any member of one and any member
//! of the other. Each internal node of the resulting [`Dendrogram`] therefore
//! stores the minimum similarity among all leaves beneath it, and node values
//! never increase on the way to the root.
//!
//! The flat clustering is read off the tree at a threshold `T` placed at the
//! midpoint of `[mu - sigma, mu]`, where `mu` and `sigma` are the mean and
//! population standard deviation of the off-diagonal similarities.
//!
//! Ties between equally similar cluster pairs are broken on object ids, never
//! on matrix position, so reordering the input does not change the result.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;

/// Cut level for a dendrogram together with the statistics it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutThreshold {
    /// The similarity level at which the dendrogram is cut.
    pub t: f64,
    /// Mean of the strict upper-triangle similarities.
    pub mu: f64,
    /// Population standard deviation of the strict upper-triangle similarities.
    pub sigma: f64,
    /// `true` when `t` was supplied by the caller instead of derived from `mu` and `sigma`.
    #[serde(default)]
    pub overridden: bool,
}

impl CutThreshold {
    /// Midpoint of `[mu - sigma, mu]`.
    pub fn midpoint(mu: f64, sigma: f64) -> Self {
        Self {
            t: (2.0 * mu - sigma) / 2.0,
            mu,
            sigma,
            overridden: false,
        }
    }

    /// Replace the cut level, keeping the matrix statistics for reporting.
    pub fn with_override(self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!(
                "threshold override {t} is outside [0, 1]"
            )));
        }
        Ok(Self {
            t,
            overridden: true,
            ..self
        })
    }
}

/// Mean and population standard deviation of the off-diagonal similarities, and the midpoint cut.
pub fn compute_threshold(matrix: &SimilarityMatrix) -> Result<CutThreshold> {
    if matrix.len() < 2 {
        return Err(Error::degenerate(
            "at least two objects are needed to compute a cut threshold",
        ));
    }
    // Summing in sorted order makes the statistics independent of object order.
    let mut values: Vec<f64> = matrix.upper_triangle().collect();
    values.sort_by(f64::total_cmp);
    let m = values.len() as f64;
    let mu = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
    Ok(CutThreshold::midpoint(mu.clamp(0.0, 1.0), var.sqrt()))
}

/// Minimum similarity between any member of `a` and any member of `b`.
pub fn cluster_similarity<S: AsRef<str>>(
    a: &[S],
    b: &[S],
    matrix: &SimilarityMatrix,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("cluster similarity needs two non-empty clusters"));
    }
    let a = resolve(a, matrix)?;
    let b = resolve(b, matrix)?;
    if a.iter().any(|i| b.contains(i)) {
        return Err(Error::invalid("clusters passed to cluster similarity overlap"));
    }
    let mut min = f64::INFINITY;
    for &i in &a {
        for &j in &b {
            min = min.min(matrix.get(i, j));
        }
    }
    Ok(min)
}

fn resolve<S: AsRef<str>>(ids: &[S], matrix: &SimilarityMatrix) -> Result<Vec<usize>> {
    ids.iter().map(|id| matrix.require_index(id.as_ref())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// A single object, addressed by its position in the source matrix.
    Leaf { object: usize },
    /// A merge of two earlier nodes.
    Internal { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DendrogramNode {
    pub id: usize,
    /// 1 for leaves; the merge similarity for internal nodes.
    pub value: f64,
    /// Number of leaves beneath this node.
    pub size: usize,
    pub kind: NodeKind,
}

/// Binary merge tree.
///
/// Nodes `0..n` are the leaves in matrix order; node `n + s` is the merge
/// performed at step `s`. The last node is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    ids: Vec<String>,
    nodes: Vec<DendrogramNode>,
}

impl Dendrogram {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn nodes(&self) -> &[DendrogramNode] {
        &self.nodes
    }

    pub fn root(&self) -> &DendrogramNode {
        self.nodes.last().expect("a dendrogram has at least one node")
    }

    pub fn node(&self, id: usize) -> &DendrogramNode {
        &self.nodes[id]
    }

    /// Object positions beneath `node`, ascending.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[node].size);
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            match self.nodes[id].kind {
                NodeKind::Leaf { object } => out.push(object),
                NodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Merge similarities in the order the merges were performed.
    pub fn merge_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes[self.ids.len()..].iter().map(|n| n.value)
    }

    /// Leaf groups hanging from the maximal nodes whose value is at least `t`.
    ///
    /// Groups are ordered by their first object position; members are ascending.
    pub fn cut(&self, t: f64) -> Vec<Vec<usize>> {
        let mut groups = Vec::new();
        let mut stack = vec![self.root().id];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            match node.kind {
                NodeKind::Internal { left, right } if node.value < t => {
                    stack.push(left);
                    stack.push(right);
                }
                _ => groups.push(self.leaves(id)),
            }
        }
        groups.sort_unstable_by_key(|g| g[0]);
        groups
    }
}

/// Position of every id in sorted-id order; used as the tie-break key.
fn id_ranks(ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut rank = vec![0; ids.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Build the full merge tree with minimum-similarity linkage.
///
/// At every step the most similar pair of clusters is merged. Among pairs of
/// equal similarity the one with the smallest sorted member-id lists wins;
/// since clusters are disjoint that comparison reduces to comparing each
/// cluster's smallest id.
///
/// Each active cluster caches its best partner. Linkage values only shrink
/// after a merge, so only clusters whose cached partner was consumed need a
/// full rescan, which keeps the typical cost quadratic.
pub fn build_dendrogram(matrix: &SimilarityMatrix) -> Result<Dendrogram> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::degenerate("cannot build a dendrogram over zero objects"));
    }
    let ids = matrix.ids().to_vec();
    let mut nodes: Vec<DendrogramNode> = (0..n)
        .map(|i| DendrogramNode {
            id: i,
            value: 1.0,
            size: 1,
            kind: NodeKind::Leaf { object: i },
        })
        .collect();

    let mut sim: Vec<f64> = (0..n).flat_map(|i| matrix.row(i).iter().copied()).collect();
    let mut key = id_ranks(&ids);
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];

    // `true` when pair (a, b) at value `va` beats pair (c, d) at value `vc`.
    let beats = |key: &[usize], va: f64, a: usize, b: usize, vc: f64, c: usize, d: usize| {
        if va != vc {
            return va > vc;
        }
        let pa = (key[a].min(key[b]), key[a].max(key[b]));
        let pc = (key[c].min(key[d]), key[c].max(key[d]));
        pa < pc
    };

    let rescan = |x: usize, active: &[usize], sim: &[f64], key: &[usize]| {
        let mut found: Option<(usize, f64)> = None;
        for &y in active {
            if y == x {
                continue;
            }
            let v = sim[x * n + y];
            match found {
                Some((b, bv)) if !beats(key, v, x, y, bv, x, b) => {}
                _ => found = Some((y, v)),
            }
        }
        found
    };

    for &x in &active {
        best[x] = rescan(x, &active, &sim, &key);
    }

    while active.len() > 1 {
        let mut pick: Option<(usize, usize, f64)> = None;
        for &x in &active {
            let (y, v) = best[x].expect("every active cluster has a partner");
            match pick {
                Some((p, q, pv)) if !beats(&key, v, x, y, pv, p, q) => {}
                _ => pick = Some((x, y, v)),
            }
        }
        let (p, q, value) = pick.expect("at least two active clusters");
        let (keep, gone) = if key[p] < key[q] { (p, q) } else { (q, p) };

        let id = nodes.len();
        nodes.push(DendrogramNode {
            id,
            value,
            size: nodes[node_of[keep]].size + nodes[node_of[gone]].size,
            kind: NodeKind::Internal {
                left: node_of[keep],
                right: node_of[gone],
            },
        });
        node_of[keep] = id;
        key[keep] = key[keep].min(key[gone]);
        let pos = active.iter().position(|&x| x == gone).expect("active");
        active.remove(pos);
        best[gone] = None;

        for &x in &active {
            if x != keep {
                let v = sim[keep * n + x].min(sim[gone * n + x]);
                sim[keep * n + x] = v;
                sim[x * n + keep] = v;
            }
        }
        if active.len() == 1 {
            break;
        }
        best[keep] = rescan(keep, &active, &sim, &key);
        for i in 0..active.len() {
            let x = active[i];
            if x == keep {
                continue;
            }
            let (y, bv) = best[x].expect("active cluster has a partner");
            if y == keep || y == gone {
                best[x] = rescan(x, &active, &sim, &key);
            } else {
                let v = sim[x * n + keep];
                if beats(&key, v, x, keep, bv, x, y) {
                    best[x] = Some((keep, v));
                }
            }
        }
    }

    Ok(Dendrogram { ids, nodes })
}

/// Partition of a set of object ids into disjoint, non-empty clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    source_ids: Vec<String>,
    clusters: Vec<Vec<String>>,
    threshold: CutThreshold,
}

impl Clustering {
    /// Validate that `clusters` is an exact partition of `source_ids`.
    pub fn new(
        source_ids: Vec<String>,
        clusters: Vec<Vec<String>>,
        threshold: CutThreshold,
    ) -> Result<Self> {
        let mut owner: HashMap<&str, Option<usize>> =
            source_ids.iter().map(|id| (id.as_str(), None)).collect();
        if owner.len() != source_ids.len() {
            return Err(Error::invalid("clustering source ids contain duplicates"));
        }
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::invalid(format!("cluster {} is empty", c + 1)));
            }
            for id in members {
                match owner.get_mut(id.as_str()) {
                    None => {
                        return Err(Error::invalid(format!(
                            "cluster member `{id}` is not a known object"
                        )))
                    }
                    Some(Some(_)) => {
                        return Err(Error::invalid(format!(
                            "object `{id}` appears in more than one cluster"
                        )))
                    }
                    Some(slot) => *slot = Some(c),
                }
            }
        }
        if let Some(id) = source_ids.iter().find(|id| owner[id.as_str()].is_none()) {
            return Err(Error::invalid(format!("object `{id}` is not in any cluster")));
        }
        Ok(Self {
            source_ids,
            clusters,
            threshold,
        })
    }

    pub fn source_ids(&self) -> &[String] {
        &self.source_ids
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn len(&self) -> usize {
        self.source_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_ids.is_empty()
    }

    pub fn threshold(&self) -> CutThreshold {
        self.threshold
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Index of the cluster holding `id`.
    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.iter().any(|m| m == id))
    }

    /// Order-free view of the partition, for comparisons.
    pub fn canonical(&self) -> BTreeSet<BTreeSet<String>> {
        self.clusters
            .iter()
            .map(|c| c.iter().cloned().collect())
            .collect()
    }
}

/// Fragment `dendrogram` at `threshold.t`.
pub fn cut_dendrogram(dendrogram: &Dendrogram, threshold: CutThreshold) -> Clustering {
    let ids = dendrogram.ids();
    let clusters = dendrogram
        .cut(threshold.t)
        .into_iter()
        .map(|g| g.into_iter().map(|i| ids[i].clone()).collect())
        .collect();
    Clustering {
        source_ids: ids.to_vec(),
        clusters,
        threshold,
    }
}

/// Build the dendrogram and cut it at the midpoint threshold.
pub fn cluster(matrix: &SimilarityMatrix) -> Result<Clustering> {
    cluster_with(matrix, None)
}

/// As [`cluster`], optionally replacing the derived cut level with `threshold_override`.
pub fn cluster_with(matrix: &SimilarityMatrix, threshold_override: Option<f64>) -> Result<Clustering> {
    cluster_full(matrix, threshold_override).map(|(_, clustering)| clustering)
}

/// Build, threshold and cut in one go, keeping the dendrogram.
pub fn cluster_full(
    matrix: &SimilarityMatrix,
    threshold_override: Option<f64>,
) -> Result<(Dendrogram, Clustering)> {
    let mut threshold = compute_threshold(matrix)?;
    if let Some(t) = threshold_override {
        threshold = threshold.with_override(t)?;
    }
    let dendrogram = build_dendrogram(matrix)?;
    let clustering = cut_dendrogram(&dendrogram, threshold);
    Ok((dendrogram, clustering))
}
