//! L1 geometry of multiscale embeddings: distances, neighbor queries and the
//! kernel between distributions.

pub mod vptree;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid_input, invalid_param, Result};
use crate::graph::{knn_kernel, AffinityKernel, BandwidthRule};
use crate::multiscale::{EmbedConfig, MultiscaleEmbedding};
use vptree::{brute_force_knn, MetricSpace, VpTree};

/// Above this many rows, neighbor queries go through a vantage-point tree.
pub const BRUTE_FORCE_ROWS: usize = 10_000;

/// Symmetric matrix of distances between distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: DMatrix<f64>,
    pub method: String,
    pub config: Option<EmbedConfig>,
}

impl DistanceMatrix {
    /// Validates a square, symmetric, nonnegative matrix with zero diagonal.
    pub fn new(values: DMatrix<f64>, method: impl Into<String>) -> Result<Self> {
        let m = values.nrows();
        if values.ncols() != m {
            return Err(invalid_input("distance matrix must be square"));
        }
        for i in 0..m {
            if values[(i, i)] != 0.0 {
                return Err(invalid_input(format!("distance matrix diagonal entry {i} is not zero")));
            }
            for j in 0..m {
                let v = values[(i, j)];
                if !(v >= 0.0 && v.is_finite()) || v.to_bits() != values[(j, i)].to_bits() {
                    return Err(invalid_input(format!("entry ({i}, {j}) is negative, non-finite or asymmetric")));
                }
            }
        }
        Ok(Self { values, method: method.into(), config: None })
    }

    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    /// Every other item ordered by increasing distance from `query`, ties by lower index.
    pub fn ranking(&self, query: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.m()).filter(|&j| j != query).collect();
        order.sort_by(|&a, &b| self.values[(query, a)].total_cmp(&self.values[(query, b)]).then(a.cmp(&b)));
        order
    }

    /// Strict upper triangle in row order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let m = self.m();
        let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }
}

impl MetricSpace for DistanceMatrix {
    fn len(&self) -> usize {
        self.m()
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        self.values[(a, b)]
    }
}

/// L1 distance between two embedding rows.
pub fn diffusion_emd(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid_input(format!("rows have lengths {} and {}", a.len(), b.len())));
    }
    Ok(l1(a, b))
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Embedding rows in row-major order, the metric space for neighbor search.
pub struct EmbeddingRows {
    width: usize,
    data: Vec<f64>,
}

impl EmbeddingRows {
    pub fn new(embedding: &MultiscaleEmbedding) -> Self {
        let width = embedding.width();
        let mut data = Vec::with_capacity(embedding.m() * width);
        for row in embedding.bins.row_iter() {
            data.extend(row.iter().copied());
        }
        Self { width, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

impl MetricSpace for EmbeddingRows {
    fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        l1(self.row(a), self.row(b))
    }
}

/// All-pairs L1 distances, computed over row blocks in parallel.
pub fn pairwise_distances(embedding: &MultiscaleEmbedding) -> Result<DistanceMatrix> {
    let m = embedding.m();
    if m < 2 {
        return Err(invalid_param("need at least two distributions"));
    }
    let rows = EmbeddingRows::new(embedding);
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i + 1..m).map(|j| rows.distance(i, j)).collect())
        .collect();
    let mut values = DMatrix::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (offset, &d) in row.iter().enumerate() {
            let j = i + 1 + offset;
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    Ok(DistanceMatrix { values, method: embedding.config.method.to_string(), config: Some(embedding.config.clone()) })
}

/// Reusable neighbor index over the rows of an embedding.
pub struct KnnIndex {
    rows: EmbeddingRows,
    tree: Option<VpTree>,
}

impl KnnIndex {
    pub fn new(embedding: &MultiscaleEmbedding) -> Self {
        let rows = EmbeddingRows::new(embedding);
        let tree = (rows.len() > BRUTE_FORCE_ROWS).then(|| VpTree::build(&rows));
        Self { rows, tree }
    }

    /// Builds a tree regardless of size.
    pub fn with_tree(embedding: &MultiscaleEmbedding) -> Self {
        let rows = EmbeddingRows::new(embedding);
        let tree = Some(VpTree::build(&rows));
        Self { rows, tree }
    }

    /// `k` nearest rows to `query` (self excluded) with their distances.
    pub fn query(&self, query: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        let m = self.rows.len();
        if k == 0 || k >= m {
            return Err(invalid_param(format!("k must satisfy 1 <= k < m = {m}, got {k}")));
        }
        if query >= m {
            return Err(invalid_param(format!("query {query} is outside 0..{m}")));
        }
        Ok(match &self.tree {
            Some(tree) => tree.knn(&self.rows, query, k),
            None => brute_force_knn(&self.rows, query, k),
        })
    }
}

/// Indices of the `k` rows nearest to row `query`, ties broken by lower index.
pub fn knn_query(embedding: &MultiscaleEmbedding, query: usize, k: usize) -> Result<Vec<usize>> {
    let index = KnnIndex::new(embedding);
    Ok(index.query(query, k)?.into_iter().map(|(i, _)| i).collect())
}

/// Gaussian kernel between distributions from their distances, restricted to
/// the symmetrized k-nearest-neighbor graph.
pub fn sample_kernel(dist: &DistanceMatrix, k_neighbors: usize, rule: BandwidthRule) -> Result<AffinityKernel> {
    let m = dist.m();
    if k_neighbors == 0 || k_neighbors >= m {
        return Err(invalid_param(format!("k must satisfy 1 <= k < m = {m}, got {k_neighbors}")));
    }
    let neighbors: Vec<Vec<(usize, f64)>> =
        (0..m).into_par_iter().map(|i| brute_force_knn(dist, i, k_neighbors)).collect();
    knn_kernel(&neighbors, k_neighbors, rule, |i, j| dist.values[(i, j)] * dist.values[(i, j)])
}
