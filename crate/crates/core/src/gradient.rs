//! Coordinate gradients of Diffusion EMD on dense Gaussian graphs, with a central-difference check.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid_param, Error, Result};
use crate::graph::{build_diffusion_operator, gaussian_affinity, AffinityKernel, Bandwidth, KernelConstruction, PointCloud};
use crate::multiscale::{
    assemble_embedding, block_weight, diffuse_dyadic_power, indicator_distributions, Method,
};
use crate::pipeline::EmbedOptions;

/// Largest graph handled by the dense derivative chain.
pub const MAX_GRADIENT_NODES: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub node: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|analytic - numeric|_inf / max(|numeric|_inf, 1e-12)`.
    pub max_relative_error: f64,
}

impl GradientReport {
    pub fn new(node: usize, analytic: Vec<f64>, numeric: Vec<f64>) -> Self {
        let gap = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = numeric.iter().map(|b| b.abs()).fold(0.0, f64::max).max(1e-12);
        Self { node, analytic, numeric, max_relative_error: gap / scale }
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

/// Derivatives of every kernel entry with respect to each coordinate of node `v`.
///
/// Only entries in row and column `v` are nonzero.
pub fn grad_affinity(points: &PointCloud, kernel: &AffinityKernel, v: usize) -> Result<Vec<DMatrix<f64>>> {
    let epsilon = match (kernel.construction(), kernel.bandwidth()) {
        (KernelConstruction::Dense, Some(Bandwidth::Fixed(eps))) => *eps,
        (construction, _) => {
            return Err(Error::Unsupported(format!(
                "kernel gradients need an untruncated fixed-bandwidth Gaussian kernel, got {construction:?}"
            )))
        }
    };
    let n = points.len();
    if kernel.n() != n {
        return Err(invalid_param("kernel and point cloud disagree on size"));
    }
    if v >= n {
        return Err(invalid_param(format!("node {v} out of range for {n} points")));
    }
    let weights = kernel.weights();
    let xv = points.point(v);
    Ok((0..points.dim())
        .map(|c| {
            let mut dk = DMatrix::zeros(n, n);
            for j in 0..n {
                if j == v {
                    continue;
                }
                let g = -(2.0 / epsilon) * (xv[c] - points.point(j)[c]) * weights.get(v, j);
                dk[(v, j)] = g;
                dk[(j, v)] = g;
            }
            dk
        })
        .collect())
}

fn check_request(points: &PointCloud, options: &EmbedOptions, i: usize, j: usize, v: usize) -> Result<()> {
    if options.subsample {
        return Err(Error::Unsupported("gradients of subsampled embeddings".into()));
    }
    if options.config.method != Method::ExactSpectral {
        return Err(Error::Unsupported(format!(
            "gradients follow the exact diffusion path, not the {} engine",
            options.config.method
        )));
    }
    options.config.validate()?;
    let n = points.len();
    if n > MAX_GRADIENT_NODES {
        return Err(Error::Unsupported(format!("dense gradients are limited to {MAX_GRADIENT_NODES} nodes, got {n}")));
    }
    let m = points.n_distributions();
    if i >= m || j >= m {
        return Err(invalid_param(format!("distribution ids must be below {m}")));
    }
    if v >= n {
        return Err(invalid_param(format!("node {v} out of range for {n} points")));
    }
    Ok(())
}

/// Diffusion EMD between distributions `i` and `j` through the sparse pipeline and plain powers of `P`.
pub fn diffusion_emd_value(points: &PointCloud, epsilon: f64, options: &EmbedOptions, i: usize, j: usize) -> Result<f64> {
    let op = build_diffusion_operator(&gaussian_affinity(points, epsilon, None)?)?;
    let dist = indicator_distributions(points.labels(), points.n_distributions())?;
    let config = &options.config;
    let stack = diffuse_dyadic_power(&op, &dist, config.max_scale)?;
    let emb = assemble_embedding(&stack, config.alpha, config.max_scale)?;
    Ok((emb.bins.row(i) - emb.bins.row(j)).abs().sum())
}

/// Gradient of the Diffusion EMD between distributions `i` and `j` with respect to the coordinates of node `v`.
pub fn grad_diffusion_emd(
    points: &PointCloud,
    epsilon: f64,
    options: &EmbedOptions,
    i: usize,
    j: usize,
    v: usize,
) -> Result<Vec<f64>> {
    check_request(points, options, i, j, v)?;
    let d = points.dim();
    if i == j {
        return Ok(vec![0.0; d]);
    }
    let n = points.len();
    let kernel = gaussian_affinity(points, epsilon, None)?;
    build_diffusion_operator(&kernel)?;
    let k = kernel.weights().to_dense();
    let q: Vec<f64> = k.row_iter().map(|r| r.sum()).collect();
    let kn = DMatrix::from_fn(n, n, |a, b| k[(a, b)] / (q[a] * q[b]));
    let deg: Vec<f64> = kn.row_iter().map(|r| r.sum()).collect();
    let p = DMatrix::from_fn(n, n, |a, b| kn[(a, b)] / deg[a]);

    let dist = indicator_distributions(points.labels(), points.n_distributions())?;
    let diff: DVector<f64> = dist.measures().column(i) - dist.measures().column(j);
    let max_scale = options.config.max_scale;
    let mut powers = vec![p];
    for s in 0..max_scale {
        let next = &powers[s] * &powers[s];
        powers.push(next);
    }
    let levels: Vec<DVector<f64>> = powers.iter().map(|m| m * &diff).collect();
    let mut signs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(max_scale + 1);
    let mut kink = false;
    for s in 0..=max_scale {
        let block = if s < max_scale { &levels[s + 1] - &levels[s] } else { levels[s].clone() };
        kink |= block.iter().any(|x| *x == 0.0);
        signs.push((block_weight(s, max_scale, options.config.alpha), block.map(sign)));
    }
    if kink {
        log::warn!("embedding difference has exact zeros; using the zero subgradient there");
    }

    let dks = grad_affinity(points, &kernel, v)?;
    Ok(dks
        .iter()
        .map(|dk| {
            let dq: Vec<f64> = dk.row_iter().map(|r| r.sum()).collect();
            let dkn = DMatrix::from_fn(n, n, |a, b| {
                dk[(a, b)] / (q[a] * q[b]) - kn[(a, b)] * (dq[a] / q[a] + dq[b] / q[b])
            });
            let ddeg: Vec<f64> = dkn.row_iter().map(|r| r.sum()).collect();
            let mut dpow = DMatrix::from_fn(n, n, |a, b| (dkn[(a, b)] - powers[0][(a, b)] * ddeg[a]) / deg[a]);
            let mut dlevels = vec![&dpow * &diff];
            for s in 0..max_scale {
                dpow = &dpow * &powers[s] + &powers[s] * &dpow;
                dlevels.push(&dpow * &diff);
            }
            signs
                .iter()
                .enumerate()
                .map(|(s, (w, sg))| {
                    let dblock = if s < max_scale { &dlevels[s + 1] - &dlevels[s] } else { dlevels[s].clone() };
                    w * sg.dot(&dblock)
                })
                .sum()
        })
        .collect())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Central differences of `f` with respect to each coordinate of node `v`.
pub fn central_difference<F>(points: &PointCloud, v: usize, step: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&PointCloud) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid_param("step must be positive and finite"));
    }
    if v >= points.len() {
        return Err(invalid_param(format!("node {v} out of range for {} points", points.len())));
    }
    (0..points.dim())
        .map(|c| {
            let mut x = points.point(v).to_vec();
            x[c] += step;
            let plus = f(&points.with_point(v, &x))?;
            x[c] -= 2.0 * step;
            let minus = f(&points.with_point(v, &x))?;
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}

/// Analytic gradient next to central differences of the sparse pipeline.
pub fn finite_difference_check(
    points: &PointCloud,
    epsilon: f64,
    options: &EmbedOptions,
    i: usize,
    j: usize,
    v: usize,
    step: f64,
) -> Result<GradientReport> {
    let analytic = grad_diffusion_emd(points, epsilon, options, i, j, v)?;
    let numeric = central_difference(points, v, step, |p| diffusion_emd_value(p, epsilon, options, i, j))?;
    Ok(GradientReport::new(v, analytic, numeric))
}
