//! Browser demo: a synthetic frame segmented three ways, plus the diffusion
//! convergence curve. Every lidar ray of the synthetic frames hits its own
//! pixel, so per-point results are returned as `width × height` images.

use ldls_core::diffusion::{init_label_field, Diffuser};
use ldls_core::graph::{assemble_normalized, build_knn_subgraph, build_pixel_subgraph};
use ldls_core::metrics::{match_instances, semantic_metrics, LabeledPoints};
use ldls_core::projection::{fov_indices, project_points};
use ldls_core::synthetic::{render, SceneSpec, SyntheticScene};
use ldls_core::{direct_projection, segment, DiffusionParams, Error, Point};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    Diffusion,
    Full,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "direct" => Ok(Mode::Direct),
            "diffusion" => Ok(Mode::Diffusion),
            "full" => Ok(Mode::Full),
            other => Err(Error::InvalidParams(format!("unknown mode {other:?}"))),
        }
    }
}

pub fn scene_spec(kind: &str, bleed: u32, shift_u: i32, shift_v: i32) -> Result<SceneSpec, Error> {
    let mut spec = match kind {
        "depth_step" => SceneSpec::depth_step(),
        "crowded" => SceneSpec::crowded(),
        other => return Err(Error::InvalidParams(format!("unknown scene {other:?}"))),
    };
    spec.mask_bleed = bleed;
    spec.mask_shift = (shift_u, shift_v);
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub labels: Vec<u32>,
    /// Mean semantic IoU over the classes present in the truth.
    pub mean_iou: f64,
    pub matched_instances: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn mean_iou(scene: &SyntheticScene, pred_classes: &[u32]) -> Result<f64, Error> {
    let mut classes: Vec<u32> = scene.truth.instance_table().values().map(|i| i.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    let report = semantic_metrics(pred_classes, scene.truth.class_ids(), &classes)?;
    let ious: Vec<f64> = report.classes.iter().filter_map(|c| c.iou).collect();
    Ok(if ious.is_empty() { 0.0 } else { ious.iter().sum::<f64>() / ious.len() as f64 })
}

pub fn run(scene: &SyntheticScene, mode: Mode, params: DiffusionParams) -> Result<Run, Error> {
    let (result, iterations, converged) = match mode {
        Mode::Direct => (direct_projection(&scene.cloud, &scene.calib, &scene.masks)?, 0, false),
        Mode::Diffusion | Mode::Full => {
            let params = DiffusionParams {
                outlier_removal: mode == Mode::Full,
                ..params
            };
            let seg = segment(&scene.cloud, &scene.calib, &scene.masks, &params)?;
            let d = seg.result.diagnostics;
            (seg.result, d.iterations_run, d.converged)
        }
    };
    let matching = match_instances(LabeledPoints::from(&result), LabeledPoints::from(&scene.truth))?;
    Ok(Run {
        mean_iou: mean_iou(scene, result.class_ids())?,
        matched_instances: matching.pairs.iter().filter(|p| p.iou >= 0.5).count(),
        labels: result.instance_ids().to_vec(),
        iterations,
        converged,
    })
}

/// Largest entry change of each diffusion iteration.
pub fn convergence(scene: &SyntheticScene, params: &DiffusionParams) -> Result<Vec<f64>, Error> {
    params.validate()?;
    let projected = project_points(&scene.cloud, &scene.calib);
    let fov = fov_indices(&projected);
    if fov.is_empty() {
        return Ok(Vec::new());
    }
    let points: Vec<Point> = fov.iter().map(|&i| scene.cloud.points()[i]).collect();
    let knn = build_knn_subgraph(&points, params.k_neighbors, params.sigma)?;
    let pix = build_pixel_subgraph(&projected, &fov, params.box_size, params.lambda)?;
    let graph = assemble_normalized(&knn, &pix)?;
    let mut diffuser = Diffuser::new(&graph, init_label_field(&scene.masks, fov.len()))?;
    Ok((0..params.max_iters).map(|_| diffuser.step()).collect())
}

/// Lowest instance covering each pixel, 0 where no mask does.
pub fn mask_image(scene: &SyntheticScene) -> Vec<u32> {
    (0..scene.masks.n_pixels())
        .map(|p| {
            scene
                .masks
                .instances()
                .iter()
                .find(|m| m.mask.contains(p))
                .map_or(0, |m| m.instance_index)
        })
        .collect()
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    scene: SyntheticScene,
    width: u32,
    height: u32,
}

#[wasm_bindgen]
impl Demo {
    /// `kind` is `"depth_step"` or `"crowded"`.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, bleed: u32, shift_u: i32, shift_v: i32) -> Result<Demo, JsError> {
        let spec = scene_spec(kind, bleed, shift_u, shift_v).map_err(js)?;
        Ok(Demo {
            scene: render(&spec).map_err(js)?,
            width: spec.width,
            height: spec.height,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn instances(&self) -> u32 {
        self.scene.masks.len() as u32
    }

    pub fn truth(&self) -> Vec<u32> {
        self.scene.truth.instance_ids().to_vec()
    }

    pub fn masks(&self) -> Vec<u32> {
        mask_image(&self.scene)
    }

    pub fn depth(&self) -> Vec<f32> {
        self.scene.cloud.points().iter().map(|p| p[2] as f32).collect()
    }

    /// `mode` is `"direct"`, `"diffusion"` (no outlier removal) or `"full"`.
    #[allow(clippy::too_many_arguments)]
    pub fn segment(
        &self,
        mode: &str,
        k: usize,
        sigma: f64,
        lambda: f64,
        box_size: u32,
        max_iters: usize,
    ) -> Result<Segmented, JsError> {
        let params = DiffusionParams {
            k_neighbors: k,
            sigma,
            lambda,
            box_size,
            max_iters,
            ..DiffusionParams::default()
        };
        let r = run(&self.scene, Mode::parse(mode).map_err(js)?, params).map_err(js)?;
        Ok(Segmented(r))
    }

    pub fn convergence(
        &self,
        k: usize,
        sigma: f64,
        lambda: f64,
        box_size: u32,
        max_iters: usize,
    ) -> Result<Vec<f64>, JsError> {
        let params = DiffusionParams {
            k_neighbors: k,
            sigma,
            lambda,
            box_size,
            max_iters,
            ..DiffusionParams::default()
        };
        convergence(&self.scene, &params).map_err(js)
    }
}

#[wasm_bindgen]
pub struct Segmented(Run);

#[wasm_bindgen]
impl Segmented {
    pub fn labels(&self) -> Vec<u32> {
        self.0.labels.clone()
    }

    #[wasm_bindgen(getter, js_name = meanIou)]
    pub fn mean_iou(&self) -> f64 {
        self.0.mean_iou
    }

    #[wasm_bindgen(getter, js_name = matchedInstances)]
    pub fn matched_instances(&self) -> usize {
        self.0.matched_instances
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.0.converged
    }
}
