//! 3D to 2D projection and field-of-view filtering.

use nalgebra::Vector4;

use crate::model::{CameraCalibration, PointCloud};

/// Homogeneous scales smaller than this are treated as degenerate.
pub const MIN_HOMOGENEOUS_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    /// Third homogeneous coordinate before dehomogenization.
    pub depth: f64,
    pub in_fov: bool,
}

impl ProjectedPoint {
    /// Pixel column and row after rounding half away from zero.
    ///
    /// Returns `None` when the rounded coordinates are not representable.
    pub fn pixel(&self) -> Option<(i64, i64)> {
        let (u, v) = (self.u.round(), self.v.round());
        if u.is_finite() && v.is_finite() && u.abs() < 9.0e15 && v.abs() < 9.0e15 {
            Some((u as i64, v as i64))
        } else {
            None
        }
    }
}

/// Projection of every cloud point, aligned with the cloud's indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoints {
    points: Vec<ProjectedPoint>,
    width: u32,
    height: u32,
}

impl ProjectedPoints {
    pub fn points(&self) -> &[ProjectedPoint] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Option<&ProjectedPoint> {
        self.points.get(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major pixel index of an in-view point.
    pub fn pixel_index(&self, index: usize) -> Option<usize> {
        let p = self.points.get(index)?;
        if !p.in_fov {
            return None;
        }
        let (u, v) = p.pixel()?;
        Some(v as usize * self.width as usize + u as usize)
    }
}

fn in_image(u: i64, v: i64, width: u32, height: u32) -> bool {
    (0..width as i64).contains(&u) && (0..height as i64).contains(&v)
}

/// Projects every point through the calibration. Degenerate points are flagged out of view.
pub fn project_points(cloud: &PointCloud, calib: &CameraCalibration) -> ProjectedPoints {
    let proj = calib.projection();
    let (width, height) = (calib.width(), calib.height());
    let points = cloud
        .points()
        .iter()
        .map(|&[x, y, z]| {
            let h = proj * Vector4::new(x, y, z, 1.0);
            let depth = h[2];
            if depth.abs() < MIN_HOMOGENEOUS_SCALE {
                return ProjectedPoint {
                    u: f64::NAN,
                    v: f64::NAN,
                    depth,
                    in_fov: false,
                };
            }
            let mut p = ProjectedPoint {
                u: h[0] / depth,
                v: h[1] / depth,
                depth,
                in_fov: false,
            };
            p.in_fov = depth > 0.0
                && p
                    .pixel()
                    .is_some_and(|(u, v)| in_image(u, v, width, height));
            p
        })
        .collect();
    ProjectedPoints {
        points,
        width,
        height,
    }
}

/// Indices of in-view points, ascending.
pub fn fov_indices(projected: &ProjectedPoints) -> Vec<usize> {
    projected
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.in_fov.then_some(i))
        .collect()
}
