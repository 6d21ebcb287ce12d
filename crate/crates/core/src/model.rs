//! Domain types shared by every pipeline stage.

use std::collections::BTreeMap;

use nalgebra::Matrix3x4;

use crate::error::{Error, Result};

/// A 3D point in the sensor frame, meters.
pub type Point = [f64; 3];

/// Ordered lidar point cloud. Point indices are stable through the whole pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    intensity: Option<Vec<f32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(index) = points
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinitePoint { index });
        }
        Ok(Self {
            points,
            intensity: None,
        })
    }

    /// Attaches a per-point intensity channel. The segmentation never reads it.
    pub fn with_intensity(points: Vec<Point>, intensity: Vec<f32>) -> Result<Self> {
        if intensity.len() != points.len() {
            return Err(Error::IntensityLength {
                points: points.len(),
                values: intensity.len(),
            });
        }
        let mut cloud = Self::new(points)?;
        cloud.intensity = Some(intensity);
        Ok(cloud)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        self.intensity.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Maps homogeneous sensor-frame points to homogeneous pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    projection: Matrix3x4<f64>,
    width: u32,
    height: u32,
}

impl CameraCalibration {
    pub fn new(projection: Matrix3x4<f64>, width: u32, height: u32) -> Result<Self> {
        if !projection.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCalibration(
                "projection matrix has non-finite entries".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCalibration(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            projection,
            width,
            height,
        })
    }

    /// Builds a calibration from the 12 row-major entries of the 3x4 matrix.
    pub fn from_row_slice(entries: &[f64; 12], width: u32, height: u32) -> Result<Self> {
        Self::new(Matrix3x4::from_row_slice(entries), width, height)
    }

    pub fn projection(&self) -> &Matrix3x4<f64> {
        &self.projection
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Binary pixel mask over a `width * height` image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(n_pixels: usize) -> Self {
        Self {
            bits: vec![false; n_pixels],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Sets `pixels` (row-major indices) in an otherwise empty mask.
    pub fn from_pixels(n_pixels: usize, pixels: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = vec![false; n_pixels];
        for p in pixels {
            let slot = bits.get_mut(p).ok_or_else(|| {
                Error::InvalidMaskSet(format!("pixel {p} outside a {n_pixels}-pixel image"))
            })?;
            *slot = true;
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, pixel: usize) -> bool {
        self.bits.get(pixel).copied().unwrap_or(false)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn set(&mut self, pixel: usize, value: bool) {
        self.bits[pixel] = value;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskInstance {
    pub instance_index: u32,
    pub class_id: u32,
    pub class_name: String,
    pub score: Option<f64>,
    pub mask: Mask,
}

/// Output of a 2D instance segmenter: `M` masks numbered `1..=M`.
///
/// Instance 0 (background) is implicit: a pixel covered by no mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    width: u32,
    height: u32,
    instances: Vec<MaskInstance>,
}

impl MaskSet {
    /// Validates and sorts instances by index.
    pub fn new(width: u32, height: u32, mut instances: Vec<MaskInstance>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMaskSet(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let n_pixels = width as usize * height as usize;
        instances.sort_by_key(|inst| inst.instance_index);
        for (k, inst) in instances.iter().enumerate() {
            if k > 0 && instances[k - 1].instance_index == inst.instance_index {
                return Err(Error::InvalidMaskSet(format!(
                    "duplicate instance index {}",
                    inst.instance_index
                )));
            }
            if inst.instance_index as usize != k + 1 {
                return Err(Error::InvalidMaskSet(format!(
                    "instance indices must be contiguous from 1, found {} at position {}",
                    inst.instance_index,
                    k + 1
                )));
            }
            if inst.class_id == 0 {
                return Err(Error::InvalidMaskSet(format!(
                    "instance {} has class id 0, which is reserved for background",
                    inst.instance_index
                )));
            }
            if inst.mask.len() != n_pixels {
                return Err(Error::InvalidMaskSet(format!(
                    "instance {} mask has {} pixels, image has {n_pixels}",
                    inst.instance_index,
                    inst.mask.len()
                )));
            }
            if let Some(score) = inst.score {
                if !(0.0..=1.0).contains(&score) {
                    return Err(Error::InvalidMaskSet(format!(
                        "instance {} score {score} outside [0, 1]",
                        inst.instance_index
                    )));
                }
            }
        }
        Ok(Self {
            width,
            height,
            instances,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, Vec::new())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn instances(&self) -> &[MaskInstance] {
        &self.instances
    }

    /// Number of object instances `M` (background excluded).
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Instance `m` for `m` in `1..=M`.
    pub fn instance(&self, m: u32) -> Option<&MaskInstance> {
        (m as usize)
            .checked_sub(1)
            .and_then(|k| self.instances.get(k))
    }

    /// Instance id to `(class_id, class_name)`.
    pub fn catalog(&self) -> InstanceCatalog {
        self.instances
            .iter()
            .map(|inst| {
                (
                    inst.instance_index,
                    (inst.class_id, inst.class_name.clone()),
                )
            })
            .collect()
    }
}

/// Instance id to `(class_id, class_name)`.
pub type InstanceCatalog = BTreeMap<u32, (u32, String)>;

/// Tunable parameters of graph construction and diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    /// Weight of each pixel-to-point edge.
    pub lambda: f64,
    /// Number of nearest 3D neighbors per point.
    pub k_neighbors: usize,
    /// Scale of the Gaussian distance kernel, in squared meters.
    pub sigma: f64,
    /// Side length of the square pixel window around each projected point.
    pub box_size: u32,
    pub max_iters: usize,
    /// Convergence threshold on the largest per-entry change of one iteration.
    pub tolerance: f64,
    pub outlier_removal: bool,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            lambda: 0.001,
            k_neighbors: 10,
            sigma: 1.0,
            box_size: 5,
            max_iters: 200,
            tolerance: 1e-5,
            outlier_removal: true,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.k_neighbors == 0 {
            return fail("k_neighbors must be at least 1".into());
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.box_size == 0 || self.box_size.is_multiple_of(2) {
            return fail(format!(
                "box_size must be a positive odd integer, got {}",
                self.box_size
            ));
        }
        if !(self.tolerance >= 0.0) {
            return fail(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceInfo {
    pub class_id: u32,
    pub class_name: String,
    pub point_count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations_run: usize,
    pub converged: bool,
    pub points_in_fov: usize,
}

/// Per-point instance and class labels over the full input cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    instance_ids: Vec<u32>,
    class_ids: Vec<u32>,
    instance_table: BTreeMap<u32, InstanceInfo>,
    pub diagnostics: Diagnostics,
}

impl SegmentationResult {
    /// Builds a result from per-point instance ids, resolving classes through `catalog`.
    ///
    /// Fails when a nonzero id is missing from the catalog or maps to class 0.
    pub fn from_instances(
        instance_ids: Vec<u32>,
        catalog: &InstanceCatalog,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let mut class_ids = Vec::with_capacity(instance_ids.len());
        let mut instance_table: BTreeMap<u32, InstanceInfo> = BTreeMap::new();
        for &id in &instance_ids {
            if id == 0 {
                class_ids.push(0);
                continue;
            }
            let (class_id, name) = catalog.get(&id).ok_or_else(|| {
                Error::InvalidMaskSet(format!("instance {id} has no class entry"))
            })?;
            if *class_id == 0 {
                return Err(Error::InvalidMaskSet(format!(
                    "instance {id} maps to the background class"
                )));
            }
            class_ids.push(*class_id);
            instance_table
                .entry(id)
                .or_insert_with(|| InstanceInfo {
                    class_id: *class_id,
                    class_name: name.clone(),
                    point_count: 0,
                })
                .point_count += 1;
        }
        Ok(Self {
            instance_ids,
            class_ids,
            instance_table,
            diagnostics,
        })
    }

    /// A result with every point labeled background.
    pub fn background(n_points: usize, diagnostics: Diagnostics) -> Self {
        Self {
            instance_ids: vec![0; n_points],
            class_ids: vec![0; n_points],
            instance_table: BTreeMap::new(),
            diagnostics,
        }
    }

    /// Same catalog and diagnostics, new per-point instance ids.
    ///
    /// Only ids already present in this result's table may appear.
    pub fn relabeled(&self, instance_ids: Vec<u32>) -> Result<Self> {
        Self::from_instances(instance_ids, &self.catalog(), self.diagnostics)
    }

    pub fn catalog(&self) -> InstanceCatalog {
        self.instance_table
            .iter()
            .map(|(&id, info)| (id, (info.class_id, info.class_name.clone())))
            .collect()
    }

    pub fn instance_ids(&self) -> &[u32] {
        &self.instance_ids
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn instance_table(&self) -> &BTreeMap<u32, InstanceInfo> {
        &self.instance_table
    }

    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(index: u32, class_id: u32, n: usize) -> MaskInstance {
        MaskInstance {
            instance_index: index,
            class_id,
            class_name: format!("class{class_id}"),
            score: None,
            mask: Mask::empty(n),
        }
    }

    #[test]
    fn cloud_rejects_non_finite() {
        let err = PointCloud::new(vec![[0.0, 0.0, 0.0], [1.0, f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinitePoint { index: 1 }));
    }

    #[test]
    fn intensity_length_checked() {
        assert!(PointCloud::with_intensity(vec![[0.0; 3]], vec![]).is_err());
        let c = PointCloud::with_intensity(vec![[0.0; 3]], vec![0.5]).unwrap();
        assert_eq!(c.intensity(), Some(&[0.5f32][..]));
    }

    #[test]
    fn calibration_validates() {
        let mut p = [0.0; 12];
        assert!(CameraCalibration::from_row_slice(&p, 0, 10).is_err());
        p[3] = f64::INFINITY;
        assert!(CameraCalibration::from_row_slice(&p, 10, 10).is_err());
    }

    #[test]
    fn mask_set_indices_must_be_contiguous() {
        let ok = MaskSet::new(2, 2, vec![inst(2, 1, 4), inst(1, 3, 4)]).unwrap();
        assert_eq!(ok.instances()[0].instance_index, 1);
        assert_eq!(ok.instance(2).unwrap().class_id, 1);
        assert!(ok.instance(0).is_none());

        assert!(MaskSet::new(2, 2, vec![inst(1, 1, 4), inst(3, 1, 4)]).is_err());
        assert!(MaskSet::new(2, 2, vec![inst(1, 1, 4), inst(1, 1, 4)]).is_err());
        assert!(MaskSet::new(2, 2, vec![inst(1, 0, 4)]).is_err());
        assert!(MaskSet::new(2, 2, vec![inst(1, 1, 5)]).is_err());
    }

    #[test]
    fn default_params_are_valid() {
        let p = DiffusionParams::default();
        assert_eq!(p.k_neighbors, 10);
        assert_eq!(p.box_size, 5);
        assert_eq!(p.max_iters, 200);
        assert_eq!(p.lambda, 0.001);
        assert_eq!(p.sigma, 1.0);
        p.validate().unwrap();
        assert!(DiffusionParams {
            box_size: 4,
            ..p
        }
        .validate()
        .is_err());
        assert!(DiffusionParams {
            tolerance: -1.0,
            ..p
        }
        .validate()
        .is_err());
    }

    #[test]
    fn result_table_counts_points() {
        let mut catalog = InstanceCatalog::new();
        catalog.insert(1, (3, "car".into()));
        catalog.insert(2, (1, "person".into()));
        let r = SegmentationResult::from_instances(
            vec![0, 1, 1, 2, 0],
            &catalog,
            Diagnostics::default(),
        )
        .unwrap();
        assert_eq!(r.class_ids(), &[0, 3, 3, 1, 0]);
        assert_eq!(r.instance_table()[&1].point_count, 2);
        assert_eq!(r.instance_table()[&2].point_count, 1);
        let total: usize = r.instance_table().values().map(|i| i.point_count).sum();
        assert_eq!(total, 3);

        let dropped = r.relabeled(vec![0, 1, 1, 0, 0]).unwrap();
        assert!(!dropped.instance_table().contains_key(&2));
        assert!(SegmentationResult::from_instances(vec![7], &catalog, Diagnostics::default())
            .is_err());
    }
}
