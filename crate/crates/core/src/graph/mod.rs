//! Affinity kernels on point clouds and the anisotropic Markov diffusion operator.

mod kernel;
mod operator;
mod spectral;

pub use kernel::{gaussian_affinity, knn_affinity, AffinityKernel, Bandwidth, BandwidthRule, KernelConstruction};
pub use operator::{build_diffusion_operator, stationary_distribution, ConnectivityReport, DiffusionOperator};
pub(crate) use kernel::knn_kernel;
pub(crate) use spectral::decompose_symmetric;
pub use spectral::{spectral_decompose, spectral_decompose_with, SpectralCache, SpectralOptions, DENSE_CUTOFF};

use nalgebra::DMatrix;

use crate::error::{invalid_input, Result};
use crate::metric::vptree::MetricSpace;

/// Points in an ambient space, each tagged with the id of the distribution it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Vec<usize>,
    n_distributions: usize,
}

impl PointCloud {
    /// Validates coordinates (row per point) and labels. Labels must cover `0..m` without gaps.
    pub fn new(coordinates: &DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, dim) = coordinates.shape();
        let mut coords = Vec::with_capacity(n * dim);
        for i in 0..n {
            coords.extend(coordinates.row(i).iter().copied());
        }
        Self::from_row_major(dim, coords, labels)
    }

    /// Like [`PointCloud::new`] with coordinates given row by row in one flat buffer.
    pub fn from_row_major(dim: usize, coords: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_input("points need at least one coordinate"));
        }
        if coords.len() % dim != 0 {
            return Err(invalid_input("coordinate buffer is not a whole number of rows"));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(invalid_input("point cloud is empty"));
        }
        if labels.len() != n {
            return Err(invalid_input(format!("{} labels for {n} points", labels.len())));
        }
        if let Some(p) = coords.iter().position(|v| !v.is_finite()) {
            return Err(invalid_input(format!(
                "non-finite coordinate at point {}, axis {}",
                p / dim,
                p % dim
            )));
        }
        let n_distributions = labels.iter().max().map_or(0, |&m| m + 1);
        let mut seen = vec![false; n_distributions];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(invalid_input(format!("distribution id {missing} has no points")));
        }
        Ok(Self { dim, coords, labels, n_distributions })
    }

    /// Each point forms its own singleton distribution.
    pub fn singletons(coordinates: &DMatrix<f64>) -> Result<Self> {
        Self::new(coordinates, (0..coordinates.nrows()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_distributions(&self) -> usize {
        self.n_distributions
    }

    /// Coordinates as an `n x d` matrix.
    pub fn coordinates(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    /// Copy with point `v` moved to `position`.
    pub fn with_point(&self, v: usize, position: &[f64]) -> Self {
        let mut out = self.clone();
        out.coords[v * self.dim..(v + 1) * self.dim].copy_from_slice(position);
        out
    }

    /// Squared Euclidean distance, evaluated identically for `(i, j)` and `(j, i)`.
    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl MetricSpace for PointCloud {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        self.squared_distance(a, b).sqrt()
    }
}
