//! Outlier removal: each instance keeps only its largest connected component
//! in the undirected KNN graph.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::KnnSubgraph;
use crate::model::SegmentationResult;

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `false` when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Relabels to 0 every point outside its instance's largest component.
///
/// `labels[i]` is the instance of KNN row `i`. Edges count in either direction;
/// equal-size components resolve to the one holding the smallest index.
pub fn largest_components(labels: &[u32], knn: &KnnSubgraph) -> Result<Vec<u32>> {
    if labels.len() != knn.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a {}-point neighbor graph",
            labels.len(),
            knn.n()
        )));
    }
    let mut sets = DisjointSet::new(labels.len());
    for (i, &li) in labels.iter().enumerate() {
        if li == 0 {
            continue;
        }
        for &j in knn.neighbors(i) {
            if labels[j] == li {
                sets.union(i, j);
            }
        }
    }

    // instance -> (size, root) of the best component so far;
    // scanning in index order means the first root seen has the smallest index.
    let mut best: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (i, &li) in labels.iter().enumerate() {
        if li == 0 {
            continue;
        }
        let root = sets.find(i);
        let size = sets.component_size(root);
        best.entry(li)
            .and_modify(|(best_size, best_root)| {
                if size > *best_size {
                    *best_size = size;
                    *best_root = root;
                }
            })
            .or_insert((size, root));
    }

    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            if li != 0 && sets.find(i) == best[&li].1 {
                li
            } else {
                0
            }
        })
        .collect())
}

/// Applies [`largest_components`] to the in-view points of a full-cloud result.
///
/// `fov[r]` is the cloud index of KNN row `r`.
pub fn remove_outliers(
    labels: &SegmentationResult,
    knn: &KnnSubgraph,
    fov: &[usize],
) -> Result<SegmentationResult> {
    if fov.len() != knn.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} view indices for a {}-point neighbor graph",
            fov.len(),
            knn.n()
        )));
    }
    let ids = labels.instance_ids();
    let mut local = Vec::with_capacity(fov.len());
    for &g in fov {
        local.push(*ids.get(g).ok_or_else(|| {
            Error::DimensionMismatch(format!("view index {g} beyond {} points", ids.len()))
        })?);
    }
    let kept = largest_components(&local, knn)?;
    let mut out = ids.to_vec();
    for (&g, &l) in fov.iter().zip(&kept) {
        out[g] = l;
    }
    labels.relabeled(out)
}
