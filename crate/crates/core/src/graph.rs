//! Diffusion graph construction.
//!
//! The full graph couples `n` points and `n_pixels` pixels:
//!
//! ```text
//! G = [ knn  pix ]      rows normalized to sum to 1
//!     [  0    I  ]
//! ```
//!
//! The pixel rows map pixel labels to themselves, so only the point rows are
//! stored: `A` (point to point) and `B` (pixel to point), normalized jointly.

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::model::Point;
use crate::projection::ProjectedPoints;
use crate::sparse::CsrMatrix;

/// Directed Gaussian-weighted KNN graph. Row `i` holds the diagonal first,
/// then the neighbors of `i` nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnSubgraph {
    k: usize,
    sigma: f64,
    matrix: CsrMatrix,
}

impl KnnSubgraph {
    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Neighbor indices of point `i`, diagonal excluded.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.matrix.row_cols(i)[1..]
    }

    /// Weights matching [`Self::neighbors`].
    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.matrix.row_values(i)[1..]
    }
}

/// Edge weight for squared distance `d2` and kernel scale `sigma`.
///
/// Floored at the smallest normal `f64` so that distant neighbors keep a
/// stored, strictly positive edge instead of underflowing to zero.
pub fn kernel_weight(d2: f64, sigma: f64) -> f64 {
    (-d2 / sigma).exp().max(f64::MIN_POSITIVE)
}

pub fn build_knn_subgraph(points: &[Point], k: usize, sigma: f64) -> Result<KnnSubgraph> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParams(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if let Some(index) = points
        .iter()
        .position(|p| !p.iter().all(|c| c.is_finite()))
    {
        return Err(Error::NonFinitePoint { index });
    }
    let tree = KdTree::new(points);
    let rows = (0..points.len()).map(|i| {
        let mut row = Vec::with_capacity(k + 1);
        row.push((i, 1.0));
        row.extend(
            tree.nearest_excluding(i, k)
                .into_iter()
                .map(|nb| (nb.index, kernel_weight(nb.distance_sq, sigma))),
        );
        row
    });
    Ok(KnnSubgraph {
        k,
        sigma,
        matrix: CsrMatrix::from_rows(points.len(), rows),
    })
}

/// Point-to-pixel connections, every stored weight equal to `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSubgraph {
    lambda: f64,
    width: u32,
    height: u32,
    row_ptr: Vec<usize>,
    pixels: Vec<usize>,
}

impl PixelSubgraph {
    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major pixel indices connected to point row `i`, ascending.
    pub fn pixels(&self, i: usize) -> &[usize] {
        &self.pixels[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_rows(
            self.n_pixels(),
            (0..self.n()).map(|i| self.pixels(i).iter().map(|&p| (p, self.lambda))),
        )
    }
}

/// Connects each in-view point to the `box_size` square window around its pixel,
/// clipped at the image border.
pub fn build_pixel_subgraph(
    projected: &ProjectedPoints,
    fov: &[usize],
    box_size: u32,
    lambda: f64,
) -> Result<PixelSubgraph> {
    if box_size == 0 || box_size.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "box_size must be a positive odd integer, got {box_size}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParams(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (width, height) = (projected.width(), projected.height());
    let half = (box_size / 2) as i64;
    let mut row_ptr = Vec::with_capacity(fov.len() + 1);
    row_ptr.push(0);
    let mut pixels = Vec::with_capacity(fov.len() * (box_size * box_size) as usize);
    for &point in fov {
        let p = projected.get(point).ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "in-view index {point} beyond {} projected points",
                projected.len()
            ))
        })?;
        let (u, v) = p.pixel().unwrap_or((-1, -1));
        if !(0..width as i64).contains(&u) || !(0..height as i64).contains(&v) {
            return Err(Error::PixelOutOfBounds {
                point,
                u,
                v,
                width,
                height,
            });
        }
        let rows = (v - half).max(0)..=(v + half).min(height as i64 - 1);
        let cols = (u - half).max(0)..=(u + half).min(width as i64 - 1);
        for row in rows {
            for col in cols.clone() {
                pixels.push(row as usize * width as usize + col as usize);
            }
        }
        row_ptr.push(pixels.len());
    }
    Ok(PixelSubgraph {
        lambda,
        width,
        height,
        row_ptr,
        pixels,
    })
}

/// Point rows of the row-normalized full graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionGraph {
    a: CsrMatrix,
    b: CsrMatrix,
}

impl DiffusionGraph {
    /// Wraps prebuilt blocks. Both must have one row per point and no negative entries.
    pub fn from_blocks(a: CsrMatrix, b: CsrMatrix) -> Result<Self> {
        if a.n_rows() != b.n_rows() || a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "blocks are {}x{} and {}x{}",
                a.n_rows(),
                a.n_cols(),
                b.n_rows(),
                b.n_cols()
            )));
        }
        let negative = (0..a.n_rows())
            .any(|i| a.row_values(i).iter().chain(b.row_values(i)).any(|&w| !(w >= 0.0)));
        if negative {
            return Err(Error::InvalidParams("graph weights must be nonnegative".into()));
        }
        Ok(Self { a, b })
    }

    /// Point-to-point block.
    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    /// Pixel-to-point block.
    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    pub fn n_pixels(&self) -> usize {
        self.b.n_cols()
    }

    /// Sum of row `i` across both blocks.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.a.row_sum(i) + self.b.row_sum(i)
    }
}

/// Divides each point row of `[knn | pix]` by its total weight.
pub fn assemble_normalized(knn: &KnnSubgraph, pix: &PixelSubgraph) -> Result<DiffusionGraph> {
    if knn.n() != pix.n() {
        return Err(Error::DimensionMismatch(format!(
            "knn subgraph has {} rows, pixel subgraph has {}",
            knn.n(),
            pix.n()
        )));
    }
    let totals: Vec<f64> = (0..knn.n())
        .map(|i| knn.matrix().row_sum(i) + pix.lambda() * pix.pixels(i).len() as f64)
        .collect();
    if let Some(row) = totals.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::ZeroRow { row });
    }
    let mut a = knn.matrix().clone();
    a.scale_rows(|i| 1.0 / totals[i]);
    let b = CsrMatrix::from_rows(
        pix.n_pixels(),
        (0..pix.n()).map(|i| {
            let w = pix.lambda() / totals[i];
            pix.pixels(i).iter().map(move |&p| (p, w))
        }),
    );
    Ok(DiffusionGraph { a, b })
}
