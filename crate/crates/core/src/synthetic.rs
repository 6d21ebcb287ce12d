//! Deterministic synthetic frames: box-shaped objects in front of a flat wall,
//! seen by a pinhole camera, with optionally sloppy 2D masks.
//!
//! Points are generated in the camera frame, so the calibration is the
//! intrinsic matrix padded with a zero column.

use crate::error::{Error, Result};
use crate::model::{
    CameraCalibration, Diagnostics, InstanceCatalog, Mask, MaskInstance, MaskSet, PointCloud,
    SegmentationResult,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    /// Pixel rectangle `[u0, u1) × [v0, v1)` covered by the object's front face.
    pub u0: u32,
    pub v0: u32,
    pub u1: u32,
    pub v1: u32,
    pub depth: f64,
    pub class_id: u32,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub wall_depth: f64,
    pub objects: Vec<SceneObject>,
    /// Masks grow by this many pixels on every side (boundary bleed).
    pub mask_bleed: u32,
    /// Masks shift by this many pixels, imitating extrinsic calibration error.
    pub mask_shift: (i32, i32),
    /// One lidar ray every `ray_step` pixels in each direction.
    pub ray_step: u32,
}

impl SceneSpec {
    /// One object in front of a wall; the mask bleeds two pixels past its silhouette.
    pub fn depth_step() -> Self {
        Self {
            width: 64,
            height: 48,
            focal: 100.0,
            wall_depth: 20.0,
            objects: vec![SceneObject {
                u0: 22,
                v0: 14,
                u1: 40,
                v1: 34,
                depth: 10.0,
                class_id: 3,
                class_name: "car".into(),
            }],
            mask_bleed: 2,
            mask_shift: (0, 0),
            ray_step: 1,
        }
    }

    /// A 200×75 frame (15,000 rays) with ten objects in two rows.
    pub fn crowded() -> Self {
        let objects = (0..10)
            .map(|k| {
                let col = (k % 5) as u32;
                let row = (k / 5) as u32;
                SceneObject {
                    u0: 8 + col * 38,
                    v0: 6 + row * 36,
                    u1: 8 + col * 38 + 26,
                    v1: 6 + row * 36 + 28,
                    depth: 8.0 + k as f64,
                    class_id: if k % 2 == 0 { 3 } else { 1 },
                    class_name: if k % 2 == 0 { "car" } else { "person" }.into(),
                }
            })
            .collect();
        Self {
            width: 200,
            height: 75,
            focal: 120.0,
            wall_depth: 30.0,
            objects,
            mask_bleed: 2,
            mask_shift: (1, 0),
            ray_step: 1,
        }
    }
}

/// A rendered frame with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub calib: CameraCalibration,
    pub masks: MaskSet,
    pub truth: SegmentationResult,
}

fn principal_point(spec: &SceneSpec) -> (f64, f64) {
    ((spec.width as f64 - 1.0) / 2.0, (spec.height as f64 - 1.0) / 2.0)
}

pub fn render(spec: &SceneSpec) -> Result<SyntheticScene> {
    if spec.ray_step == 0 || !(spec.focal > 0.0) || !(spec.wall_depth > 0.0) {
        return Err(Error::InvalidParams(
            "scene needs a positive ray step, focal length and wall depth".into(),
        ));
    }
    for obj in &spec.objects {
        if obj.u0 >= obj.u1 || obj.v0 >= obj.v1 || obj.u1 > spec.width || obj.v1 > spec.height {
            return Err(Error::InvalidParams(format!(
                "object rectangle [{}, {}) x [{}, {}) does not fit a {}x{} image",
                obj.u0, obj.u1, obj.v0, obj.v1, spec.width, spec.height
            )));
        }
        if !(obj.depth > 0.0) || obj.class_id == 0 {
            return Err(Error::InvalidParams(
                "objects need positive depth and a nonzero class".into(),
            ));
        }
    }
    let (cx, cy) = principal_point(spec);
    let f = spec.focal;
    let calib = CameraCalibration::from_row_slice(
        &[f, 0.0, cx, 0.0, 0.0, f, cy, 0.0, 0.0, 0.0, 1.0, 0.0],
        spec.width,
        spec.height,
    )?;

    let mut points = Vec::new();
    let mut truth_ids = Vec::new();
    for v in (0..spec.height).step_by(spec.ray_step as usize) {
        for u in (0..spec.width).step_by(spec.ray_step as usize) {
            let hit = spec
                .objects
                .iter()
                .enumerate()
                .filter(|(_, o)| (o.u0..o.u1).contains(&u) && (o.v0..o.v1).contains(&v))
                .min_by(|a, b| a.1.depth.total_cmp(&b.1.depth));
            let (depth, id) = match hit {
                Some((k, o)) => (o.depth, k as u32 + 1),
                None => (spec.wall_depth, 0),
            };
            points.push([
                (u as f64 - cx) * depth / f,
                (v as f64 - cy) * depth / f,
                depth,
            ]);
            truth_ids.push(id);
        }
    }
    let cloud = PointCloud::new(points)?;

    let n_pixels = spec.width as usize * spec.height as usize;
    let bleed = spec.mask_bleed as i64;
    let instances = spec
        .objects
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let mut mask = Mask::empty(n_pixels);
            let (du, dv) = (spec.mask_shift.0 as i64, spec.mask_shift.1 as i64);
            let us = (o.u0 as i64 - bleed + du).max(0)..(o.u1 as i64 + bleed + du).min(spec.width as i64);
            let vs = (o.v0 as i64 - bleed + dv).max(0)..(o.v1 as i64 + bleed + dv).min(spec.height as i64);
            for v in vs {
                for u in us.clone() {
                    mask.set(v as usize * spec.width as usize + u as usize, true);
                }
            }
            MaskInstance {
                instance_index: k as u32 + 1,
                class_id: o.class_id,
                class_name: o.class_name.clone(),
                score: Some(1.0),
                mask,
            }
        })
        .collect();
    let masks = MaskSet::new(spec.width, spec.height, instances)?;

    let catalog: InstanceCatalog = spec
        .objects
        .iter()
        .enumerate()
        .map(|(k, o)| (k as u32 + 1, (o.class_id, o.class_name.clone())))
        .collect();
    let truth = SegmentationResult::from_instances(truth_ids, &catalog, Diagnostics::default())?;
    Ok(SyntheticScene {
        cloud,
        calib,
        masks,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{fov_indices, project_points};

    #[test]
    fn every_ray_projects_back_to_its_pixel() {
        let scene = render(&SceneSpec::depth_step()).unwrap();
        let proj = project_points(&scene.cloud, &scene.calib);
        assert_eq!(fov_indices(&proj).len(), 64 * 48);
        for (i, p) in proj.points().iter().enumerate() {
            assert_eq!(p.pixel(), Some(((i % 64) as i64, (i / 64) as i64)));
        }
    }

    #[test]
    fn masks_bleed_around_objects() {
        let scene = render(&SceneSpec::depth_step()).unwrap();
        let mask = &scene.masks.instances()[0].mask;
        assert_eq!(mask.count(), (18 + 4) * (20 + 4));
        let object_points = scene.truth.instance_ids().iter().filter(|&&i| i == 1).count();
        assert_eq!(object_points, 18 * 20);
    }

    #[test]
    fn crowded_scene_size() {
        let scene = render(&SceneSpec::crowded()).unwrap();
        assert_eq!(scene.cloud.len(), 15_000);
        assert_eq!(scene.masks.len(), 10);
    }

    #[test]
    fn bad_rectangles_rejected() {
        let mut spec = SceneSpec::depth_step();
        spec.objects[0].u1 = 100;
        assert!(render(&spec).is_err());
    }
}
