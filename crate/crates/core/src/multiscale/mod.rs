//! Dyadic diffusion of distributions and the weighted multiscale embedding.
//!
//! A [`ScaleStack`] holds `P^(2^k) mu` for consecutive scales `k`. Each level may
//! keep only a subset of nodes ("centers"), in which case every center carries a
//! weight standing in for the nodes it represents. [`assemble_embedding`] turns a
//! stack into difference blocks whose L1 distances form the transport metric.

mod chebyshev;
mod config;
mod exact;
mod mixing;

pub use chebyshev::{chebyshev_coefficients, diffuse_dyadic_chebyshev};
pub use config::{EmbedConfig, Method};
pub use exact::{diffuse_dyadic_exact, diffuse_dyadic_power};
pub use mixing::{default_max_scale, scales_to_mix};

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{invalid_input, invalid_param, Error, Result};

/// Column-stochastic matrix of distributions over graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSet {
    measures: DMatrix<f64>,
    counts: Vec<usize>,
}

const MASS_TOLERANCE: f64 = 1e-12;

impl DistributionSet {
    /// Validates an `n x m` matrix whose columns are probability vectors.
    pub fn from_measures(measures: DMatrix<f64>) -> Result<Self> {
        if measures.ncols() == 0 || measures.nrows() == 0 {
            return Err(invalid_input("distribution matrix is empty"));
        }
        for (j, col) in measures.column_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid_input(format!("distribution {j} has negative or non-finite mass")));
            }
            let total: f64 = col.iter().sum();
            if (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(invalid_input(format!("distribution {j} sums to {total}, not 1")));
            }
        }
        let counts = measures.column_iter().map(|c| c.iter().filter(|v| **v > 0.0).count()).collect();
        Ok(Self { measures, counts })
    }

    pub fn measures(&self) -> &DMatrix<f64> {
        &self.measures
    }

    /// Support size of each distribution.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.measures.nrows()
    }

    pub fn m(&self) -> usize {
        self.measures.ncols()
    }
}

/// Uniform distributions over the nodes sharing each label.
pub fn indicator_distributions(labels: &[usize], m: usize) -> Result<DistributionSet> {
    let n = labels.len();
    if m == 0 {
        return Err(invalid_param("need at least one distribution"));
    }
    let mut counts = vec![0usize; m];
    for (i, &l) in labels.iter().enumerate() {
        if l >= m {
            return Err(invalid_input(format!("label {l} at node {i} is outside 0..{m}")));
        }
        counts[l] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(invalid_input(format!("distribution {empty} has no nodes")));
    }
    let mut measures = DMatrix::zeros(n, m);
    for (i, &l) in labels.iter().enumerate() {
        measures[(i, l)] = 1.0 / counts[l] as f64;
    }
    Ok(DistributionSet { measures, counts })
}

/// One dyadic scale: values of `P^(2^scale) mu` at a set of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleLevel {
    pub scale: usize,
    pub centers: Vec<usize>,
    /// `centers.len() x m`.
    pub values: DMatrix<f64>,
    /// Mass each center stands for; all ones when the level covers every node.
    pub weights: Vec<f64>,
}

impl ScaleLevel {
    /// Level covering all `values.nrows()` nodes with unit weights.
    pub fn full(scale: usize, values: DMatrix<f64>) -> Self {
        let n = values.nrows();
        Self { scale, centers: (0..n).collect(), values, weights: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Consecutive dyadic scales of a distribution set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleStack {
    pub n_nodes: usize,
    pub levels: Vec<ScaleLevel>,
}

impl ScaleStack {
    pub fn max_scale(&self) -> Option<usize> {
        self.levels.last().map(|l| l.scale)
    }

    /// Total number of centers over all levels.
    pub fn center_count(&self) -> usize {
        self.levels.iter().map(ScaleLevel::len).sum()
    }

    pub fn level(&self, scale: usize) -> Option<&ScaleLevel> {
        self.levels.iter().find(|l| l.scale == scale)
    }

    /// Copy keeping only the `count` coarsest levels.
    pub fn top_scales(&self, count: usize) -> ScaleStack {
        let skip = self.levels.len().saturating_sub(count.max(1));
        ScaleStack { n_nodes: self.n_nodes, levels: self.levels[skip..].to_vec() }
    }
}

/// Concatenated weighted difference blocks, one row per distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleEmbedding {
    pub bins: DMatrix<f64>,
    pub config: EmbedConfig,
    /// Column range of each block within `bins`.
    pub scale_offsets: Vec<Range<usize>>,
    /// Scale index of each block.
    pub scales: Vec<usize>,
    /// Node index of every column of each block.
    pub centers: Vec<Vec<usize>>,
}

impl MultiscaleEmbedding {
    /// Wraps a bare bin matrix as a single block.
    pub fn from_bins(bins: DMatrix<f64>, config: EmbedConfig) -> Self {
        let width = bins.ncols();
        Self {
            bins,
            config,
            scale_offsets: vec![0..width],
            scales: vec![0],
            centers: vec![(0..width).collect()],
        }
    }

    pub fn m(&self) -> usize {
        self.bins.nrows()
    }

    pub fn width(&self) -> usize {
        self.bins.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.bins.row(i).iter().copied().collect()
    }
}

/// Per-block multiplier `2^(-(K - k - 1) alpha)`; the top block is unweighted.
pub fn block_weight(scale: usize, max_scale: usize, alpha: f64) -> f64 {
    if scale >= max_scale {
        1.0
    } else {
        (2.0_f64).powf(-((max_scale - scale - 1) as f64) * alpha)
    }
}

/// Builds the embedding from a stack whose last level has scale `max_scale`.
pub fn assemble_embedding(stack: &ScaleStack, alpha: f64, max_scale: usize) -> Result<MultiscaleEmbedding> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(invalid_param(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    let levels = &stack.levels;
    let last = levels.last().ok_or_else(|| Error::InvalidState("scale stack is empty".into()))?;
    if last.scale != max_scale {
        return Err(Error::InvalidState(format!(
            "stack ends at scale {} but the embedding asks for {max_scale}",
            last.scale
        )));
    }
    if levels.windows(2).any(|w| w[1].scale != w[0].scale + 1) {
        return Err(Error::InvalidState("stack scales are not consecutive".into()));
    }
    let m = last.values.ncols();
    if levels.iter().any(|l| l.values.ncols() != m || l.values.nrows() != l.len() || l.weights.len() != l.len()) {
        return Err(Error::InvalidState("levels disagree on shape".into()));
    }
    let width: usize = levels[1..].iter().map(|l| l.len()).sum::<usize>() + last.len();
    let mut bins = DMatrix::zeros(m, width);
    let mut scale_offsets = Vec::with_capacity(levels.len());
    let mut scales = Vec::with_capacity(levels.len());
    let mut centers = Vec::with_capacity(levels.len());
    let mut offset = 0;
    let mut emit = |scale: usize, level: &ScaleLevel, factor: f64, fine: Option<(&ScaleLevel, Vec<usize>)>| {
        for (r, &w) in level.weights.iter().enumerate() {
            let mut column = bins.column_mut(offset + r);
            let f = factor * w;
            match &fine {
                Some((fine, rows)) => {
                    for c in 0..m {
                        column[c] = f * (level.values[(r, c)] - fine.values[(rows[r], c)]);
                    }
                }
                None => {
                    for c in 0..m {
                        column[c] = f * level.values[(r, c)];
                    }
                }
            }
        }
        scale_offsets.push(offset..offset + level.len());
        scales.push(scale);
        centers.push(level.centers.clone());
        offset += level.len();
    };
    for pair in levels.windows(2) {
        let (fine, coarse) = (&pair[0], &pair[1]);
        let rows = restrict(fine, &coarse.centers)?;
        emit(fine.scale, coarse, block_weight(fine.scale, max_scale, alpha), Some((fine, rows)));
    }
    emit(max_scale, last, 1.0, None);
    let config = EmbedConfig { alpha, max_scale, ..EmbedConfig::default() };
    Ok(MultiscaleEmbedding { bins, config, scale_offsets, scales, centers })
}

/// Row positions in `level` of the requested node indices.
fn restrict(level: &ScaleLevel, nodes: &[usize]) -> Result<Vec<usize>> {
    if level.centers == nodes {
        return Ok((0..nodes.len()).collect());
    }
    let mut position = std::collections::HashMap::with_capacity(level.centers.len());
    for (p, &c) in level.centers.iter().enumerate() {
        position.insert(c, p);
    }
    nodes
        .iter()
        .map(|c| {
            position.get(c).copied().ok_or_else(|| {
                Error::InvalidState(format!(
                    "center {c} of scale {} is missing from scale {}",
                    level.scale + 1,
                    level.scale
                ))
            })
        })
        .collect()
}
