//! Agglomerative hierarchical clustering over squared Euclidean dissimilarity.
//!
//! Node ids follow one convention throughout the crate: leaves are `0..n`,
//! and the internal node created by the `m`-th merge (0-based) is `n + m`.
//! The root is therefore `2n - 2`.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, ShcError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageKind {
    Ward,
    Single,
    Complete,
    Average,
}

impl std::str::FromStr for LinkageKind {
    type Err = ShcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ward" => Ok(LinkageKind::Ward),
            "single" => Ok(LinkageKind::Single),
            "complete" => Ok(LinkageKind::Complete),
            "average" => Ok(LinkageKind::Average),
            other => Err(ShcError::InvalidConfig(format!(
                "unknown linkage {other:?}"
            ))),
        }
    }
}

/// Observation-level dissimilarity. Only squared Euclidean is supported; other
/// measures are not rotation invariant and would break the null model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dissimilarity {
    #[default]
    SquaredEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge<T> {
    pub left: usize,
    pub right: usize,
    pub height: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<T> {
    pub n_leaves: usize,
    pub merges: Vec<Merge<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    /// Validates labels against `k`: all in range and every cluster nonempty.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut counts = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(ShcError::InvalidK { k: l + 1, n: k });
            }
            counts[l] += 1;
        }
        if counts.contains(&0) {
            return Err(ShcError::InvalidData("empty cluster in assignment".into()));
        }
        Ok(ClusterAssignment { labels, k })
    }

    /// Two-cluster assignment from one side of a bipartition.
    pub fn from_split(n: usize, first: &[usize]) -> Result<Self> {
        let mut labels = vec![1usize; n];
        for &i in first {
            labels[i] = 0;
        }
        Self::new(labels, 2)
    }

    pub fn members(&self, label: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }
}

impl<T: Scalar> Dendrogram<T> {
    pub fn root(&self) -> usize {
        2 * self.n_leaves - 2
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.n_leaves - 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    fn merge_of(&self, node: usize) -> Result<&Merge<T>> {
        if node >= self.n_nodes() {
            return Err(ShcError::UnknownNode(node));
        }
        if self.is_leaf(node) {
            return Err(ShcError::NotInternal(node));
        }
        Ok(&self.merges[node - self.n_leaves])
    }

    pub fn children(&self, node: usize) -> Result<(usize, usize)> {
        self.merge_of(node).map(|m| (m.left, m.right))
    }

    /// Merge height of an internal node; leaves sit at height zero.
    pub fn height(&self, node: usize) -> Result<T> {
        if node < self.n_leaves {
            return Ok(T::zero());
        }
        self.merge_of(node).map(|m| m.height)
    }

    pub fn size(&self, node: usize) -> Result<usize> {
        if node < self.n_leaves {
            return Ok(1);
        }
        self.merge_of(node).map(|m| m.size)
    }

    /// Leaves under `node`, ascending.
    pub fn leaves(&self, node: usize) -> Result<Vec<usize>> {
        if node >= self.n_nodes() {
            return Err(ShcError::UnknownNode(node));
        }
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            if id < self.n_leaves {
                out.push(id);
            } else {
                let m = &self.merges[id - self.n_leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Parent of every node; `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n_nodes()];
        for (m, merge) in self.merges.iter().enumerate() {
            parent[merge.left] = Some(self.n_leaves + m);
            parent[merge.right] = Some(self.n_leaves + m);
        }
        parent
    }

    /// Leaves in left-to-right drawing order (no crossing branches).
    pub fn leaf_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_leaves);
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            if id < self.n_leaves {
                out.push(id);
            } else {
                let m = &self.merges[id - self.n_leaves];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }

    /// Checks the structural invariants of a merge list.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_leaves;
        if n < 2 || self.merges.len() != n - 1 {
            return Err(ShcError::InvalidData(format!(
                "{} merges for {n} leaves",
                self.merges.len()
            )));
        }
        let mut used = vec![false; self.n_nodes()];
        for (m, merge) in self.merges.iter().enumerate() {
            let id = n + m;
            for child in [merge.left, merge.right] {
                if child >= id || used[child] {
                    return Err(ShcError::InvalidData(format!(
                        "merge {m} has invalid child {child}"
                    )));
                }
                used[child] = true;
            }
            let size = self.size(merge.left)? + self.size(merge.right)?;
            if size != merge.size {
                return Err(ShcError::InvalidData(format!("merge {m} size mismatch")));
            }
            if !(merge.height >= T::zero()) {
                return Err(ShcError::InvalidData(format!(
                    "merge {m} has negative height"
                )));
            }
        }
        Ok(())
    }
}

/// Full N x N matrix of squared Euclidean distances between rows.
pub fn pairwise_sq_euclidean<T: Scalar>(data: &DataMatrix<T>) -> Vec<Vec<T>> {
    let n = data.n_obs();
    let x = data.values().as_standard_layout();
    let p = data.n_vars();
    let flat = x.as_slice().expect("standard layout");
    let mut d = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        let xi = &flat[i * p..(i + 1) * p];
        for j in (i + 1)..n {
            let s = sq_dist(xi, &flat[j * p..(j + 1) * p]);
            d[i][j] = s;
            d[j][i] = s;
        }
    }
    d
}

/// Squared distance with eight independent accumulators so the loop vectorizes.
fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (u, v) in ca.zip(cb) {
        for k in 0..8 {
            let diff = u[k] - v[k];
            acc[k] += diff * diff;
        }
    }
    let mut tail = T::zero();
    for (&u, &v) in ra.iter().zip(rb) {
        let diff = u - v;
        tail += diff * diff;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn agglomerate<T: Scalar>(data: &DataMatrix<T>, linkage: LinkageKind) -> Result<Dendrogram<T>> {
    agglomerate_with(data, linkage, Dissimilarity::SquaredEuclidean)
}

pub fn agglomerate_with<T: Scalar>(
    data: &DataMatrix<T>,
    linkage: LinkageKind,
    dissimilarity: Dissimilarity,
) -> Result<Dendrogram<T>> {
    let n = data.n_obs();
    if n < 2 {
        return Err(ShcError::TooFewObservations { need: 2, got: n });
    }
    let d = match dissimilarity {
        Dissimilarity::SquaredEuclidean => pairwise_sq_euclidean(data),
    };
    Ok(agglomerate_dissimilarities(d, linkage))
}

/// Agglomerates from a precomputed symmetric dissimilarity matrix using the
/// Lance-Williams update with a cached nearest neighbour per active cluster.
///
/// Ties between candidate merges are broken by the lexicographically smallest
/// (min node id, max node id) pair.
pub fn agglomerate_dissimilarities<T: Scalar>(
    mut d: Vec<Vec<T>>,
    linkage: LinkageKind,
) -> Dendrogram<T> {
    let n = d.len();
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![T::infinity(); n];

    let nearest = |d: &[Vec<T>], active: &[bool], node_id: &[usize], i: usize| -> (usize, T) {
        let mut best = usize::MAX;
        let mut best_d = T::infinity();
        for j in 0..d.len() {
            if j == i || !active[j] {
                continue;
            }
            let dij = d[i][j];
            if best == usize::MAX || dij < best_d || (dij == best_d && node_id[j] < node_id[best]) {
                best = j;
                best_d = dij;
            }
        }
        (best, best_d)
    };

    for i in 0..n {
        let (j, dj) = nearest(&d, &active, &node_id, i);
        nn[i] = j;
        nn_dist[i] = dj;
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n.saturating_sub(1) {
        // Global minimum over cached nearest neighbours.
        let mut best: Option<(usize, T, (usize, usize))> = None;
        for i in (0..n).filter(|&i| active[i]) {
            let j = nn[i];
            let key = ordered(node_id[i], node_id[j]);
            let better = match &best {
                None => true,
                Some((_, bd, bkey)) => nn_dist[i] < *bd || (nn_dist[i] == *bd && key < *bkey),
            };
            if better {
                best = Some((i, nn_dist[i], key));
            }
        }
        let (i, height, _) = best.expect("at least two active clusters remain");
        let j = nn[i];
        let (a, b) = if node_id[i] < node_id[j] {
            (i, j)
        } else {
            (j, i)
        };
        let (na, nb) = (size[a], size[b]);
        let dab = d[a][b];

        merges.push(Merge {
            left: node_id[a],
            right: node_id[b],
            height,
            size: na + nb,
        });

        // New cluster takes slot `a`; slot `b` retires.
        active[b] = false;
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            let updated = lance_williams(linkage, d[k][a], d[k][b], dab, na, nb, size[k]);
            d[k][a] = updated;
            d[a][k] = updated;
        }
        size[a] = na + nb;
        node_id[a] = n + m;

        if m + 2 == n {
            break;
        }
        let (j, dj) = nearest(&d, &active, &node_id, a);
        nn[a] = j;
        nn_dist[a] = dj;
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            if nn[k] == a || nn[k] == b {
                let (j, dj) = nearest(&d, &active, &node_id, k);
                nn[k] = j;
                nn_dist[k] = dj;
            } else if d[k][a] < nn_dist[k] {
                nn[k] = a;
                nn_dist[k] = d[k][a];
            }
        }
    }

    Dendrogram {
        n_leaves: n,
        merges,
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Dissimilarity between cluster `k` and the union of clusters `a` and `b`.
#[inline]
fn lance_williams<T: Scalar>(
    linkage: LinkageKind,
    d_ka: T,
    d_kb: T,
    d_ab: T,
    size_a: usize,
    size_b: usize,
    size_k: usize,
) -> T {
    match linkage {
        LinkageKind::Single => d_ka.min(d_kb),
        LinkageKind::Complete => d_ka.max(d_kb),
        LinkageKind::Average => {
            let (na, nb) = (T::of_usize(size_a), T::of_usize(size_b));
            (na * d_ka + nb * d_kb) / (na + nb)
        }
        LinkageKind::Ward => {
            let (na, nb, nk) = (
                T::of_usize(size_a),
                T::of_usize(size_b),
                T::of_usize(size_k),
            );
            ((nk + na) * d_ka + (nk + nb) * d_kb - nk * d_ab) / (na + nb + nk)
        }
    }
}

/// The partition left after undoing the last `k - 1` merges. Labels are
/// numbered by first appearance in leaf order.
pub fn cut_k<T: Scalar>(dend: &Dendrogram<T>, k: usize) -> Result<ClusterAssignment> {
    let n = dend.n_leaves;
    if k == 0 || k > n {
        return Err(ShcError::InvalidK { k, n });
    }
    // Union-find over the first n - k merges, keyed by node id.
    let mut parent: Vec<usize> = (0..dend.n_nodes()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (m, merge) in dend.merges.iter().take(n - k).enumerate() {
        let id = n + m;
        let l = find(&mut parent, merge.left);
        let r = find(&mut parent, merge.right);
        parent[l] = id;
        parent[r] = id;
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for leaf in 0..n {
        let r = find(&mut parent, leaf);
        let next = label_of_root.len();
        labels.push(*label_of_root.entry(r).or_insert(next));
    }
    ClusterAssignment::new(labels, k)
}

/// Leaf sets of the two subtrees joined at an internal node.
pub fn node_split<T: Scalar>(
    dend: &Dendrogram<T>,
    node: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (l, r) = dend.children(node)?;
    Ok((dend.leaves(l)?, dend.leaves(r)?))
}
