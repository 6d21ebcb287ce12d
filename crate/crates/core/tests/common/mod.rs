//! Random scenes and brute-force reference implementations shared by the
//! integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use ldls_core::graph::{assemble_normalized, build_knn_subgraph, build_pixel_subgraph, DiffusionGraph, KnnSubgraph};
use ldls_core::projection::{fov_indices, project_points};
use ldls_core::{CameraCalibration, DiffusionParams, Mask, MaskInstance, MaskSet, PointCloud};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Scene {
    pub cloud: PointCloud,
    pub calib: CameraCalibration,
    pub masks: MaskSet,
}

pub fn identity_calib(w: u32, h: u32) -> CameraCalibration {
    CameraCalibration::from_row_slice(&[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0.], w, h).unwrap()
}

/// Points scattered in front of (and a few behind) an identity camera, with
/// random blobby masks that may overlap.
pub fn random_scene(rng: &mut impl Rng, max_points: usize, max_side: u32, max_masks: u32) -> Scene {
    let w = rng.random_range(2..=max_side);
    let h = rng.random_range(2..=max_side);
    let n = rng.random_range(1..=max_points);
    let points = (0..n)
        .map(|_| {
            let z = if rng.random_bool(0.1) {
                rng.random_range(-3.0..-0.5)
            } else {
                rng.random_range(0.5..6.0)
            };
            let u = rng.random_range(-1.5..w as f64 + 0.5);
            let v = rng.random_range(-1.5..h as f64 + 0.5);
            [u * z, v * z, z]
        })
        .collect();
    let n_pixels = (w * h) as usize;
    let m = rng.random_range(0..=max_masks);
    let instances = (1..=m)
        .map(|k| {
            let (u0, v0) = (rng.random_range(0..w), rng.random_range(0..h));
            let (u1, v1) = (rng.random_range(u0..w) + 1, rng.random_range(v0..h) + 1);
            let mut mask = Mask::empty(n_pixels);
            for v in v0..v1 {
                for u in u0..u1 {
                    if rng.random_bool(0.85) {
                        mask.set((v * w + u) as usize, true);
                    }
                }
            }
            let class_id = rng.random_range(1..=3);
            MaskInstance {
                instance_index: k,
                class_id,
                class_name: format!("class{class_id}"),
                score: Some(rng.random_range(0.0..=1.0)),
                mask,
            }
        })
        .collect();
    Scene {
        cloud: PointCloud::new(points).unwrap(),
        calib: identity_calib(w, h),
        masks: MaskSet::new(w, h, instances).unwrap(),
    }
}

pub fn random_params(rng: &mut impl Rng, lambda: std::ops::Range<f64>) -> DiffusionParams {
    DiffusionParams {
        lambda: rng.random_range(lambda),
        k_neighbors: rng.random_range(1..=8),
        sigma: rng.random_range(0.2..3.0),
        box_size: [1, 3, 5][rng.random_range(0..3)],
        ..DiffusionParams::default()
    }
}

pub struct Built {
    pub fov: Vec<usize>,
    pub knn: KnnSubgraph,
    pub graph: DiffusionGraph,
}

/// `None` when no point is in view.
pub fn build(scene: &Scene, params: &DiffusionParams) -> Option<Built> {
    let projected = project_points(&scene.cloud, &scene.calib);
    let fov = fov_indices(&projected);
    if fov.is_empty() {
        return None;
    }
    let pts: Vec<_> = fov.iter().map(|&i| scene.cloud.points()[i]).collect();
    let knn = build_knn_subgraph(&pts, params.k_neighbors, params.sigma).unwrap();
    let pix = build_pixel_subgraph(&projected, &fov, params.box_size, params.lambda).unwrap();
    let graph = assemble_normalized(&knn, &pix).unwrap();
    Some(Built { fov, knn, graph })
}

/// The whole `(n + P) × (n + P)` transition matrix, pixel block the identity.
pub fn full_matrix(graph: &DiffusionGraph) -> DMatrix<f64> {
    let n = graph.n();
    let np = graph.n_pixels();
    let mut g = DMatrix::zeros(n + np, n + np);
    for i in 0..n {
        for (j, w) in graph.a().row(i) {
            g[(i, j)] += w;
        }
        for (p, w) in graph.b().row(i) {
            g[(i, n + p)] += w;
        }
    }
    for p in 0..np {
        g[(n + p, n + p)] = 1.0;
    }
    g
}

/// Initial `(n + P) × (M + 1)` label matrix: zero points, one-hot pixels.
pub fn full_labels(masks: &MaskSet, n: usize) -> DMatrix<f64> {
    let np = masks.n_pixels();
    let cols = masks.len() + 1;
    let mut z = DMatrix::zeros(n + np, cols);
    for p in 0..np {
        let mut covered = false;
        for inst in masks.instances() {
            if inst.mask.contains(p) {
                z[(n + p, inst.instance_index as usize)] = 1.0;
                covered = true;
            }
        }
        if !covered {
            z[(n + p, 0)] = 1.0;
        }
    }
    z
}

/// Largest same-label component per instance by explicit DFS over undirected edges.
pub fn dfs_largest_components(labels: &[u32], knn: &KnnSubgraph) -> Vec<u32> {
    let n = labels.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in knn.neighbors(i) {
            if labels[i] != 0 && labels[i] == labels[j] && i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if labels[start] == 0 || comp[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut stack = vec![start];
        let mut these = Vec::new();
        comp[start] = id;
        while let Some(x) = stack.pop() {
            these.push(x);
            for &y in &adj[x] {
                if comp[y] == usize::MAX {
                    comp[y] = id;
                    stack.push(y);
                }
            }
        }
        members.push(these);
    }
    // per label: largest, ties to the component containing the smallest index
    let mut keep: BTreeMap<u32, usize> = BTreeMap::new();
    for (id, m) in members.iter().enumerate() {
        let label = labels[m[0]];
        let min_idx = *m.iter().min().unwrap();
        match keep.get(&label) {
            Some(&other) => {
                let o = &members[other];
                let o_min = *o.iter().min().unwrap();
                if m.len() > o.len() || (m.len() == o.len() && min_idx < o_min) {
                    keep.insert(label, id);
                }
            }
            None => {
                keep.insert(label, id);
            }
        }
    }
    (0..n)
        .map(|i| {
            if labels[i] != 0 && keep[&labels[i]] == comp[i] {
                labels[i]
            } else {
                0
            }
        })
        .collect()
}

fn members(ids: &[u32], id: u32) -> HashSet<usize> {
    ids.iter().enumerate().filter(|(_, &x)| x == id).map(|(i, _)| i).collect()
}

pub fn set_iou(a: &HashSet<usize>, b: &HashSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Best total IoU over every one-to-one same-class pairing, by enumeration.
pub fn brute_force_total_iou(
    pred_ids: &[u32],
    pred_class: &[u32],
    truth_ids: &[u32],
    truth_class: &[u32],
) -> f64 {
    fn instances(ids: &[u32], class: &[u32]) -> BTreeMap<u32, (u32, HashSet<usize>)> {
        let mut out = BTreeMap::new();
        for &id in ids.iter().collect::<BTreeSet<_>>() {
            if id == 0 {
                continue;
            }
            let set = members(ids, id);
            let c = class[*set.iter().next().unwrap()];
            out.insert(id, (c, set));
        }
        out
    }
    fn go(pred: &[&(u32, HashSet<usize>)], truth: &[&(u32, HashSet<usize>)], used: &mut [bool]) -> f64 {
        let Some((first, rest)) = pred.split_first() else {
            return 0.0;
        };
        let mut best = go(rest, truth, used);
        for t in 0..truth.len() {
            if !used[t] && truth[t].0 == first.0 {
                used[t] = true;
                best = best.max(set_iou(&first.1, &truth[t].1) + go(rest, truth, used));
                used[t] = false;
            }
        }
        best
    }
    let p = instances(pred_ids, pred_class);
    let t = instances(truth_ids, truth_class);
    let pv: Vec<_> = p.values().collect();
    let tv: Vec<_> = t.values().collect();
    go(&pv, &tv, &mut vec![false; tv.len()])
}

/// Random instance labeling with up to `max_inst` instances of classes 1..=`classes`.
pub fn random_instance_labels(rng: &mut impl Rng, n: usize, max_inst: u32, classes: u32) -> (Vec<u32>, Vec<u32>) {
    let m = rng.random_range(0..=max_inst);
    let class_of: Vec<u32> = (0..=m).map(|k| if k == 0 { 0 } else { rng.random_range(1..=classes) }).collect();
    let ids: Vec<u32> = (0..n).map(|_| rng.random_range(0..=m)).collect();
    let cls = ids.iter().map(|&i| class_of[i as usize]).collect();
    (ids, cls)
}

/// Clone of `ids` with a few points moved to other instances, keeping the class map.
pub fn perturb(rng: &mut impl Rng, ids: &[u32], flips: usize) -> Vec<u32> {
    let mut out = ids.to_vec();
    let max = ids.iter().copied().max().unwrap_or(0);
    for _ in 0..flips {
        let i = rng.random_range(0..ids.len());
        out[i] = rng.random_range(0..=max);
    }
    out
}
