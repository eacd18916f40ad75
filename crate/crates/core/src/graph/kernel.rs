use rayon::prelude::*;

use super::PointCloud;
use crate::error::{invalid_input, invalid_param, Result};
use crate::metric::vptree::{brute_force_knn, VpTree};
use crate::sparse::CsrMatrix;

const BRUTE_FORCE_LIMIT: usize = 512;

/// How the Gaussian bandwidth was chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// One global epsilon, in squared ambient units.
    Fixed(f64),
    /// Per-point scales; the pair bandwidth is `sigma_i * sigma_j`.
    Adaptive { percentile: f64, sigmas: Vec<f64> },
}

/// Bandwidth policy for [`knn_affinity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    Fixed(f64),
    /// Scale each point by the distance to its `ceil(percentile * k)`-th neighbor.
    Adaptive(f64),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Adaptive(1.0)
    }
}

/// Which sparsification produced a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelConstruction {
    Dense,
    Truncated(f64),
    Knn(usize),
    Custom,
}

/// Symmetric nonnegative affinity matrix over the nodes of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityKernel {
    weights: CsrMatrix,
    bandwidth: Option<Bandwidth>,
    construction: KernelConstruction,
}

impl AffinityKernel {
    /// Wraps user-supplied weights after checking shape, symmetry, sign and finiteness.
    pub fn from_weights(weights: CsrMatrix) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(invalid_input("affinity matrix must be square"));
        }
        if weights.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid_input("affinities must be finite and nonnegative"));
        }
        if !weights.is_symmetric() {
            return Err(invalid_input("affinity matrix must be exactly symmetric"));
        }
        Ok(Self { weights, bandwidth: None, construction: KernelConstruction::Custom })
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn bandwidth(&self) -> Option<&Bandwidth> {
        self.bandwidth.as_ref()
    }

    pub fn construction(&self) -> KernelConstruction {
        self.construction
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }
}

/// Full Gaussian kernel `exp(-|x_i - x_j|^2 / epsilon)`, optionally dropping entries below `truncation`.
pub fn gaussian_affinity(points: &PointCloud, epsilon: f64, truncation: Option<f64>) -> Result<AffinityKernel> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid_param(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let cutoff = match truncation {
        None => 0.0,
        Some(t) if (0.0..1.0).contains(&t) => t,
        Some(t) => return Err(invalid_param(format!("truncation must lie in [0, 1), got {t}"))),
    };
    let n = points.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter_map(|j| {
                    let w = if i == j { 1.0 } else { (-points.squared_distance(i, j) / epsilon).exp() };
                    (w > 0.0 && w >= cutoff).then_some((j, w))
                })
                .collect()
        })
        .collect();
    let weights = assemble_rows(n, rows);
    let construction = match truncation {
        Some(t) if t > 0.0 => KernelConstruction::Truncated(t),
        _ => KernelConstruction::Dense,
    };
    Ok(AffinityKernel { weights, bandwidth: Some(Bandwidth::Fixed(epsilon)), construction })
}

/// Gaussian affinities on the symmetrized union of k-nearest-neighbor sets.
pub fn knn_affinity(points: &PointCloud, k: usize, rule: BandwidthRule) -> Result<AffinityKernel> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(invalid_param(format!("k must satisfy 1 <= k < n = {n}, got {k}")));
    }
    let neighbors = nearest_neighbors(points, k);
    knn_kernel(&neighbors, k, rule, |i, j| points.squared_distance(i, j))
}

/// Gaussian kernel on the symmetrized union of precomputed neighbor lists.
pub(crate) fn knn_kernel<F>(neighbors: &[Vec<(usize, f64)>], k: usize, rule: BandwidthRule, squared_distance: F) -> Result<AffinityKernel>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let n = neighbors.len();
    let bandwidth = match rule {
        BandwidthRule::Fixed(eps) if eps > 0.0 && eps.is_finite() => Bandwidth::Fixed(eps),
        BandwidthRule::Fixed(eps) => {
            return Err(invalid_param(format!("epsilon must be positive and finite, got {eps}")))
        }
        BandwidthRule::Adaptive(p) if p > 0.0 && p <= 1.0 => {
            let rank = ((p * k as f64).ceil() as usize).clamp(1, k);
            let sigmas = neighbors.iter().map(|nb| nb[rank - 1].1).collect();
            Bandwidth::Adaptive { percentile: p, sigmas }
        }
        BandwidthRule::Adaptive(p) => {
            return Err(invalid_param(format!("percentile must lie in (0, 1], got {p}")))
        }
    };
    let mut adjacency: Vec<Vec<usize>> = neighbors
        .iter()
        .map(|nb| nb.iter().map(|&(j, _)| j).collect())
        .collect();
    for (i, nb) in neighbors.iter().enumerate() {
        for &(j, _) in nb {
            adjacency[j].push(i);
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = adjacency
        .into_par_iter()
        .enumerate()
        .map(|(i, mut cols)| {
            cols.push(i);
            cols.sort_unstable();
            cols.dedup();
            cols.into_iter()
                .filter_map(|j| {
                    let w = if i == j { 1.0 } else { pair_weight(squared_distance(i, j), &bandwidth, i, j) };
                    (w > 0.0).then_some((j, w))
                })
                .collect()
        })
        .collect();
    let weights = assemble_rows(n, rows);
    Ok(AffinityKernel { weights, bandwidth: Some(bandwidth), construction: KernelConstruction::Knn(k) })
}

fn pair_weight(d2: f64, bandwidth: &Bandwidth, i: usize, j: usize) -> f64 {
    match bandwidth {
        Bandwidth::Fixed(eps) => (-d2 / eps).exp(),
        Bandwidth::Adaptive { sigmas, .. } => {
            let scale = sigmas[i] * sigmas[j];
            if scale > 0.0 {
                (-d2 / scale).exp()
            } else if d2 == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Exact k nearest neighbors of every point, self excluded, ties by lower index.
pub(crate) fn nearest_neighbors(points: &PointCloud, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = points.len();
    if n <= BRUTE_FORCE_LIMIT {
        return (0..n).into_par_iter().map(|i| brute_force_knn(points, i, k)).collect();
    }
    let tree = VpTree::build(points);
    (0..n).into_par_iter().map(|i| tree.knn(points, i, k)).collect()
}

pub(crate) fn assemble_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> CsrMatrix {
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let nnz = rows.iter().map(Vec::len).sum();
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for row in rows {
        for (j, w) in row {
            indices.push(j);
            values.push(w);
        }
        indptr.push(indices.len());
    }
    CsrMatrix::from_parts(n, n, indptr, indices, values).expect("rows are sorted by construction")
}
