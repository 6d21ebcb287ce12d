//! Label vectors, the diffusion iteration, and per-point label assignment.
//!
//! Column `m` of the point block holds the likelihood of instance `m`
//! (`0` is background). Pixel labels are constant sources, so each iteration is
//! `z ← A·z + B·z_pix` with `B·z_pix` computed once.

use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;
use crate::model::{Diagnostics, MaskSet, SegmentationResult};

/// For every pixel, the instances whose mask covers it. Uncovered pixels are background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelLabels {
    n_columns: usize,
    offsets: Vec<usize>,
    instances: Vec<u32>,
}

impl PixelLabels {
    pub fn from_masks(masks: &MaskSet) -> Self {
        let n_pixels = masks.n_pixels();
        let mut counts = vec![0usize; n_pixels];
        for inst in masks.instances() {
            for (p, &bit) in inst.mask.bits().iter().enumerate() {
                counts[p] += bit as usize;
            }
        }
        let mut offsets = Vec::with_capacity(n_pixels + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let mut instances = vec![0u32; offsets[n_pixels]];
        let mut fill = offsets[..n_pixels].to_vec();
        for inst in masks.instances() {
            for (p, &bit) in inst.mask.bits().iter().enumerate() {
                if bit {
                    instances[fill[p]] = inst.instance_index;
                    fill[p] += 1;
                }
            }
        }
        Self {
            n_columns: masks.len() + 1,
            offsets,
            instances,
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `M + 1`.
    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    /// Instances covering pixel `p`, ascending. Empty means background.
    pub fn covering(&self, p: usize) -> &[u32] {
        &self.instances[self.offsets[p]..self.offsets[p + 1]]
    }

    /// Dense 0/1 label row of pixel `p`.
    pub fn row(&self, p: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n_columns];
        let cover = self.covering(p);
        if cover.is_empty() {
            row[0] = 1.0;
        }
        for &m in cover {
            row[m as usize] = 1.0;
        }
        row
    }
}

/// Point likelihoods (`n × (M+1)`, row-major) plus the fixed pixel labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    n_points: usize,
    z: Vec<f64>,
    pixels: PixelLabels,
}

impl LabelField {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_columns(&self) -> usize {
        self.pixels.n_columns
    }

    /// Row-major point likelihoods.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn point_row(&self, i: usize) -> &[f64] {
        let w = self.n_columns();
        &self.z[i * w..(i + 1) * w]
    }

    pub fn pixels(&self) -> &PixelLabels {
        &self.pixels
    }
}

/// Zero point block; pixel block taken from the masks.
pub fn init_label_field(masks: &MaskSet, n_points: usize) -> LabelField {
    let pixels = PixelLabels::from_masks(masks);
    LabelField {
        n_points,
        z: vec![0.0; n_points * pixels.n_columns],
        pixels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionReport {
    pub iterations_run: usize,
    pub converged: bool,
    /// Largest absolute entry change of the last iteration; infinite if none ran.
    pub max_delta: f64,
}

/// Stepwise driver for the diffusion iteration.
pub struct Diffuser<'g> {
    graph: &'g DiffusionGraph,
    field: LabelField,
    source: Vec<f64>,
    next: Vec<f64>,
}

impl<'g> Diffuser<'g> {
    pub fn new(graph: &'g DiffusionGraph, field: LabelField) -> Result<Self> {
        if graph.n() != field.n_points {
            return Err(Error::DimensionMismatch(format!(
                "graph has {} point rows, label field has {}",
                graph.n(),
                field.n_points
            )));
        }
        if graph.n_pixels() != field.pixels.n_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "graph has {} pixel columns, label field has {}",
                graph.n_pixels(),
                field.pixels.n_pixels()
            )));
        }
        let width = field.n_columns();
        let mut source = vec![0.0; field.z.len()];
        for (i, acc) in source.chunks_exact_mut(width).enumerate() {
            for (p, w) in graph.b().row(i) {
                let cover = field.pixels.covering(p);
                if cover.is_empty() {
                    acc[0] += w;
                }
                for &m in cover {
                    acc[m as usize] += w;
                }
            }
        }
        let next = vec![0.0; field.z.len()];
        Ok(Self {
            graph,
            field,
            source,
            next,
        })
    }

    /// One update of every column; returns the largest absolute change.
    pub fn step(&mut self) -> f64 {
        let width = self.field.n_columns();
        self.graph
            .a()
            .mul_dense(&self.field.z, width, &mut self.next);
        let mut max_delta = 0.0f64;
        for ((n, s), old) in self.next.iter_mut().zip(&self.source).zip(&self.field.z) {
            // each entry is a convex combination of values in [0, 1]; clamp the rounding
            *n = (*n + s).min(1.0);
            max_delta = max_delta.max((*n - old).abs());
        }
        std::mem::swap(&mut self.field.z, &mut self.next);
        max_delta
    }

    pub fn field(&self) -> &LabelField {
        &self.field
    }

    pub fn into_field(self) -> LabelField {
        self.field
    }
}

/// Iterates until the largest entry change drops below `tolerance` or `max_iters` is reached.
pub fn diffuse(
    graph: &DiffusionGraph,
    field: LabelField,
    max_iters: usize,
    tolerance: f64,
) -> Result<(LabelField, DiffusionReport)> {
    let mut diffuser = Diffuser::new(graph, field)?;
    let mut max_delta = f64::INFINITY;
    let mut iterations_run = 0;
    while iterations_run < max_iters {
        max_delta = diffuser.step();
        iterations_run += 1;
        if max_delta < tolerance {
            break;
        }
    }
    let report = DiffusionReport {
        iterations_run,
        converged: max_delta < tolerance,
        max_delta,
    };
    Ok((diffuser.into_field(), report))
}

/// Most likely instance of a likelihood row.
///
/// Background wins ties with objects and all-zero rows; object ties go to the lowest index.
pub fn argmax_label(row: &[f64]) -> u32 {
    let mut best = 0usize;
    let mut best_score = row.first().copied().unwrap_or(0.0);
    for (m, &score) in row.iter().enumerate().skip(1) {
        if score > best_score {
            best = m;
            best_score = score;
        }
    }
    best as u32
}

/// Labels each in-view point by its most likely instance; out-of-view points are background.
pub fn assign_labels(
    field: &LabelField,
    fov: &[usize],
    n_total: usize,
    masks: &MaskSet,
) -> Result<SegmentationResult> {
    if field.n_points() != fov.len() {
        return Err(Error::DimensionMismatch(format!(
            "label field has {} points, view index list has {}",
            field.n_points(),
            fov.len()
        )));
    }
    if field.n_columns() != masks.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "label field has {} columns, mask set has {} instances",
            field.n_columns(),
            masks.len()
        )));
    }
    let mut ids = vec![0u32; n_total];
    for (local, &global) in fov.iter().enumerate() {
        let slot = ids.get_mut(global).ok_or_else(|| {
            Error::DimensionMismatch(format!("view index {global} beyond {n_total} points"))
        })?;
        *slot = argmax_label(field.point_row(local));
    }
    SegmentationResult::from_instances(
        ids,
        &masks.catalog(),
        Diagnostics {
            points_in_fov: fov.len(),
            ..Diagnostics::default()
        },
    )
}
