//! Lidar instance segmentation by label diffusion.
//!
//! 2D instance masks from a camera image are spread onto a lidar point cloud
//! through a sparse graph that links every point to the pixels around its
//! projection and to its nearest 3D neighbors. Iterating the row-normalized
//! graph converges to per-point instance likelihoods; each point takes its most
//! likely instance, and each instance finally keeps only its largest connected
//! component.
//!
//! The stages are exposed individually ([`projection`], [`graph`],
//! [`diffusion`], [`refine`]) and wired together in [`pipeline::segment`].
//! [`metrics`] scores a result against ground truth; [`io`] reads and writes
//! the on-disk formats.

pub mod assignment;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod projection;
pub mod refine;
pub mod sparse;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    CameraCalibration, Diagnostics, DiffusionParams, InstanceCatalog, InstanceInfo, Mask,
    MaskInstance, MaskSet, Point, PointCloud, SegmentationResult,
};
pub use pipeline::{direct_projection, segment, Segmentation};
