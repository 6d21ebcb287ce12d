//! Exact k-nearest-neighbor search over 3D points.
//!
//! Neighbors are ordered by `(squared distance, index)`, so equidistant points
//! resolve to the lower index and results are fully deterministic.

use std::cmp::Ordering;

use crate::model::Point;

const LEAF_SIZE: usize = 8;

pub fn squared_distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// A neighbor candidate: squared distance and point index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_sq: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.distance_sq
            .total_cmp(&other.distance_sq)
            .then(self.index.cmp(&other.index))
    }
}

/// Balanced kd-tree stored implicitly in a permutation of point indices.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Point],
    order: Vec<usize>,
    // split axis of the internal node whose pivot sits at this position of `order`
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            axes: vec![0; points.len()],
        };
        tree.build(0, points.len());
        tree
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let axis = self.widest_axis(lo, hi);
        let mid = lo + (hi - lo) / 2;
        let points = self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        self.axes[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    fn widest_axis(&self, lo: usize, hi: usize) -> usize {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            for a in 0..3 {
                min[a] = min[a].min(self.points[i][a]);
                max[a] = max[a].max(self.points[i][a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to point `query`, excluding `query` itself, nearest first.
    pub fn nearest_excluding(&self, query: usize, k: usize) -> Vec<Neighbor> {
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(0, self.points.len(), &self.points[query], Some(query), k, &mut best);
        }
        best
    }

    /// The `k` nearest points to an arbitrary location, nearest first.
    pub fn nearest(&self, location: &Point, k: usize) -> Vec<Neighbor> {
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(0, self.points.len(), location, None, k, &mut best);
        }
        best
    }

    fn consider(&self, idx: usize, q: &Point, skip: Option<usize>, k: usize, best: &mut Vec<Neighbor>) {
        if Some(idx) == skip {
            return;
        }
        let cand = Neighbor {
            index: idx,
            distance_sq: squared_distance(q, &self.points[idx]),
        };
        if best.len() == k {
            if cand.cmp_key(&best[k - 1]) != Ordering::Less {
                return;
            }
            best.pop();
        }
        let pos = best.partition_point(|b| b.cmp_key(&cand) == Ordering::Less);
        best.insert(pos, cand);
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        q: &Point,
        skip: Option<usize>,
        k: usize,
        best: &mut Vec<Neighbor>,
    ) {
        if hi - lo <= LEAF_SIZE {
            for &idx in &self.order[lo..hi] {
                self.consider(idx, q, skip, k, best);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let pivot = self.order[mid];
        let axis = self.axes[mid] as usize;
        self.consider(pivot, q, skip, k, best);
        let diff = q[axis] - self.points[pivot][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, skip, k, best);
        // `<=` keeps equidistant candidates on the far side reachable for the index tie-break.
        if best.len() < k || diff * diff <= best[best.len() - 1].distance_sq {
            self.search(far.0, far.1, q, skip, k, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(points: &[Point], query: usize, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != query)
            .map(|j| (squared_distance(&points[query], &points[j]), j))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, j)| j).collect()
    }

    #[test]
    fn small_cases() {
        let pts = [[0.0, 0.0, 0.0]];
        assert!(KdTree::new(&pts).nearest_excluding(0, 10).is_empty());

        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let tree = KdTree::new(&pts);
        let nn: Vec<usize> = tree.nearest_excluding(0, 10).iter().map(|n| n.index).collect();
        assert_eq!(nn, vec![1, 2]);
        assert_eq!(tree.nearest(&[0.9, 0.0, 0.0], 1)[0].index, 1);
    }

    #[test]
    fn ties_prefer_lower_index() {
        // Lattice with many equidistant neighbors.
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        // duplicates
        pts.push([2.0, 2.0, 1.0]);
        pts.push([2.0, 2.0, 1.0]);
        let tree = KdTree::new(&pts);
        for q in 0..pts.len() {
            for k in [1, 4, 7, 10] {
                let got: Vec<usize> = tree.nearest_excluding(q, k).iter().map(|n| n.index).collect();
                assert_eq!(got, brute_force(&pts, q, k), "query {q} k {k}");
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((-5i32..5, -5i32..5, -5i32..5), 1..120),
            k in 1usize..14,
        ) {
            // Integer coordinates produce lots of exact ties.
            let pts: Vec<Point> = raw.iter().map(|&(x, y, z)| [x as f64 * 0.5, y as f64, z as f64 * 0.25]).collect();
            let tree = KdTree::new(&pts);
            for q in 0..pts.len() {
                let got: Vec<usize> = tree.nearest_excluding(q, k).iter().map(|n| n.index).collect();
                prop_assert_eq!(got, brute_force(&pts, q, k));
            }
        }
    }
}
