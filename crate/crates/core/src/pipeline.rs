//! End-to-end segmentation of one frame, and the direct-projection baseline.

use crate::diffusion::{assign_labels, diffuse, init_label_field, DiffusionReport};
use crate::error::{Error, Result};
use crate::graph::{assemble_normalized, build_knn_subgraph, build_pixel_subgraph};
use crate::model::{
    CameraCalibration, Diagnostics, DiffusionParams, MaskSet, Point, PointCloud,
    SegmentationResult,
};
use crate::projection::{fov_indices, project_points};
use crate::refine::remove_outliers;

/// Pipeline stages, reported in order as each one finishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Project,
    NeighborGraph,
    PixelGraph,
    Normalize,
    Diffuse,
    Assign,
    OutlierRemoval,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Project => "project",
            Stage::NeighborGraph => "knn_graph",
            Stage::PixelGraph => "pixel_graph",
            Stage::Normalize => "normalize",
            Stage::Diffuse => "diffuse",
            Stage::Assign => "assign",
            Stage::OutlierRemoval => "outlier_removal",
        }
    }
}

fn check_frame(calib: &CameraCalibration, masks: &MaskSet) -> Result<()> {
    if (calib.width(), calib.height()) != (masks.width(), masks.height()) {
        return Err(Error::DimensionMismatch(format!(
            "calibration image is {}x{}, masks are {}x{}",
            calib.width(),
            calib.height(),
            masks.width(),
            masks.height()
        )));
    }
    Ok(())
}

/// Full pipeline output.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub result: SegmentationResult,
    /// `None` when no point was in view and diffusion never ran.
    pub report: Option<DiffusionReport>,
}

pub fn segment(
    cloud: &PointCloud,
    calib: &CameraCalibration,
    masks: &MaskSet,
    params: &DiffusionParams,
) -> Result<Segmentation> {
    segment_observed(cloud, calib, masks, params, |_| {})
}

/// [`segment`], calling `on_stage` after each stage completes.
pub fn segment_observed(
    cloud: &PointCloud,
    calib: &CameraCalibration,
    masks: &MaskSet,
    params: &DiffusionParams,
    mut on_stage: impl FnMut(Stage),
) -> Result<Segmentation> {
    params.validate()?;
    check_frame(calib, masks)?;

    let projected = project_points(cloud, calib);
    let fov = fov_indices(&projected);
    on_stage(Stage::Project);
    if fov.is_empty() {
        return Ok(Segmentation {
            result: SegmentationResult::background(cloud.len(), Diagnostics::default()),
            report: None,
        });
    }

    let points: Vec<Point> = fov.iter().map(|&i| cloud.points()[i]).collect();
    let knn = build_knn_subgraph(&points, params.k_neighbors, params.sigma)?;
    on_stage(Stage::NeighborGraph);
    let pix = build_pixel_subgraph(&projected, &fov, params.box_size, params.lambda)?;
    on_stage(Stage::PixelGraph);
    let graph = assemble_normalized(&knn, &pix)?;
    on_stage(Stage::Normalize);

    let field = init_label_field(masks, fov.len());
    let (field, report) = diffuse(&graph, field, params.max_iters, params.tolerance)?;
    on_stage(Stage::Diffuse);

    let mut result = assign_labels(&field, &fov, cloud.len(), masks)?;
    result.diagnostics = Diagnostics {
        iterations_run: report.iterations_run,
        converged: report.converged,
        points_in_fov: fov.len(),
    };
    on_stage(Stage::Assign);

    if params.outlier_removal {
        result = remove_outliers(&result, &knn, &fov)?;
        on_stage(Stage::OutlierRemoval);
    }
    Ok(Segmentation {
        result,
        report: Some(report),
    })
}

/// Labels each in-view point by the mask its rounded projection lands in.
///
/// Overlapping masks resolve to the lowest instance index. No diffusion and no
/// outlier removal take place.
pub fn direct_projection(
    cloud: &PointCloud,
    calib: &CameraCalibration,
    masks: &MaskSet,
) -> Result<SegmentationResult> {
    check_frame(calib, masks)?;
    let projected = project_points(cloud, calib);
    let fov = fov_indices(&projected);
    let mut ids = vec![0u32; cloud.len()];
    for &i in &fov {
        let pixel = projected
            .pixel_index(i)
            .expect("in-view points have a pixel");
        ids[i] = masks
            .instances()
            .iter()
            .find(|inst| inst.mask.contains(pixel))
            .map_or(0, |inst| inst.instance_index);
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
