use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::DiffusionOperator;
use crate::error::{invalid_param, Error, Result};
use crate::sparse::{from_row_major, to_row_major, CsrMatrix};

/// Graphs up to this many nodes are decomposed densely.
pub const DENSE_CUTOFF: usize = 2000;

const DEFAULT_ITERATIVE_RANK: usize = 500;
const LOG_MAX_AMPLIFICATION: f64 = 13.8;
const MAX_FILTER_DEGREE: usize = 40;
const MIN_CUTOFF: f64 = 0.05;

/// Leading eigenpairs of the symmetric conjugate, sorted by decreasing magnitude.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralCache {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        if eigenvectors.ncols() != eigenvalues.len() {
            return Err(Error::InvalidInput("one eigenvector per eigenvalue is required".into()));
        }
        Ok(Self { eigenvalues, eigenvectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// True when every eigenpair of the operator is present.
    pub fn is_complete(&self) -> bool {
        self.rank() == self.n()
    }

    /// Largest residual `|S u - lambda u|_inf` over the retained pairs.
    pub fn max_residual(&self, sym: &CsrMatrix) -> f64 {
        let su = sym.mul_dense(&self.eigenvectors);
        let mut worst: f64 = 0.0;
        for (c, &lambda) in self.eigenvalues.iter().enumerate() {
            for r in 0..self.n() {
                worst = worst.max((su[(r, c)] - lambda * self.eigenvectors[(r, c)]).abs());
            }
        }
        worst
    }
}

/// Controls for [`spectral_decompose_with`].
#[derive(Debug, Clone)]
pub struct SpectralOptions {
    /// Number of pairs wanted; `None` means all pairs for dense graphs and `min(n - 1, 500)` otherwise.
    pub rank: Option<usize>,
    /// Residual tolerance per pair, in the max norm.
    pub tol: f64,
    pub dense_cutoff: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { rank: None, tol: 1e-8, dense_cutoff: DENSE_CUTOFF, max_iterations: 300, seed: 0x5eed }
    }
}

/// Top eigenpairs of the operator's symmetric conjugate.
pub fn spectral_decompose(op: &DiffusionOperator, rank: Option<usize>, tol: f64) -> Result<SpectralCache> {
    spectral_decompose_with(op, &SpectralOptions { rank, tol, ..SpectralOptions::default() })
}

pub fn spectral_decompose_with(op: &DiffusionOperator, options: &SpectralOptions) -> Result<SpectralCache> {
    decompose_symmetric(op.sym(), options)
}

/// Leading eigenpairs of any symmetric sparse matrix with spectrum in `[-1, 1]`.
pub(crate) fn decompose_symmetric(sym: &CsrMatrix, options: &SpectralOptions) -> Result<SpectralCache> {
    let n = sym.nrows();
    if let Some(r) = options.rank {
        if r == 0 || r > n {
            return Err(invalid_param(format!("rank must lie in 1..={n}, got {r}")));
        }
    }
    if !(options.tol > 0.0) {
        return Err(invalid_param("eigen tolerance must be positive"));
    }
    let dense = n <= options.dense_cutoff
        && match options.rank {
            None => true,
            Some(r) => n <= 400 || 4 * r > n,
        };
    let (values, vectors) = if dense {
        let rank = options.rank.unwrap_or(n);
        dense_pairs(sym, rank)
    } else {
        let rank = options.rank.unwrap_or_else(|| (n - 1).min(DEFAULT_ITERATIVE_RANK));
        filtered_subspace(sym, rank, options)?
    };
    SpectralCache::new(values, vectors)
}

fn dense_pairs(sym: &CsrMatrix, rank: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = sym.to_dense().symmetric_eigen();
    let order = magnitude_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order[..rank].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order[..rank]);
    fix_signs(&mut vectors);
    (values, vectors)
}

fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    order
}

fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

/// Chebyshev-filtered subspace iteration on a block of `rank` plus guard vectors.
fn filtered_subspace(sym: &CsrMatrix, rank: usize, options: &SpectralOptions) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = sym.nrows();
    let block = (rank + (rank / 5).max(16)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let start = DMatrix::from_fn(n, block, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut basis = orthonormalize(start);
    let (mut theta, mut v, mut sv) = rayleigh_ritz(sym, &basis);
    let mut worst = f64::INFINITY;
    for iteration in 0..options.max_iterations {
        worst = max_residual(&theta, &v, &sv, rank);
        log::debug!("subspace iteration {iteration}: worst residual {worst:.3e}");
        if worst <= options.tol {
            let mut vectors = v.columns(0, rank).into_owned();
            fix_signs(&mut vectors);
            return Ok((theta[..rank].to_vec(), vectors));
        }
        let cutoff = theta[block - 1].abs().max(MIN_CUTOFF);
        let degree = filter_degree(cutoff);
        basis = orthonormalize(chebyshev_filter(sym, &v, degree, cutoff));
        (theta, v, sv) = rayleigh_ritz(sym, &basis);
    }
    Err(Error::Numerical {
        stage: "eigensolver",
        detail: format!(
            "{rank} eigenpairs not converged after {} iterations; worst residual {worst:.3e} exceeds {:.1e}",
            options.max_iterations, options.tol
        ),
    })
}

fn filter_degree(cutoff: f64) -> usize {
    if cutoff >= 1.0 {
        return 2;
    }
    let degree = (LOG_MAX_AMPLIFICATION / (1.0 / cutoff).acosh()).floor() as usize;
    (degree.clamp(2, MAX_FILTER_DEGREE)) & !1
}

/// Applies `T_d(S / c) / T_d(1 / c)` to every column using the scaled three-term recurrence.
fn chebyshev_filter(sym: &CsrMatrix, x: &DMatrix<f64>, degree: usize, cutoff: f64) -> DMatrix<f64> {
    let (n, width) = x.shape();
    let sigma1 = cutoff;
    let mut sigma = sigma1;
    let mut prev = to_row_major(x);
    let mut cur = vec![0.0; n * width];
    sym.spmm_row_major(&prev, width, &mut cur);
    let mut next = vec![0.0; n * width];
    for _ in 2..=degree {
        let sigma_new = 1.0 / (2.0 / sigma1 - sigma);
        sym.spmm_row_major(&cur, width, &mut next);
        let a = 2.0 * sigma_new / cutoff;
        let b = sigma * sigma_new;
        next.iter_mut().zip(&prev).for_each(|(y, p)| *y = a * *y - b * p);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        sigma = sigma_new;
    }
    from_row_major(n, width, &cur)
}

/// Orthonormal basis of the column span, by two rounds of Gram-matrix whitening.
pub(crate) fn orthonormalize(mut y: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..2 {
        let gram = y.transpose() * &y;
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        let floor = top * 1e-15 + f64::MIN_POSITIVE;
        let mut whiten = eig.eigenvectors.clone();
        for (j, mut col) in whiten.column_iter_mut().enumerate() {
            col /= eig.eigenvalues[j].max(floor).sqrt();
        }
        y = &y * whiten;
    }
    y
}

fn rayleigh_ritz(sym: &CsrMatrix, basis: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let s_basis = sym.mul_dense(basis);
    let mut h = basis.transpose() * &s_basis;
    let ht = h.transpose();
    h = (h + ht) * 0.5;
    let eig = h.symmetric_eigen();
    let order = magnitude_order(eig.eigenvalues.as_slice());
    let rotation = eig.eigenvectors.select_columns(&order);
    let theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    (theta, basis * &rotation, s_basis * rotation)
}

fn max_residual(theta: &[f64], v: &DMatrix<f64>, sv: &DMatrix<f64>, rank: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, &t) in theta.iter().enumerate().take(rank) {
        for (a, b) in sv.column(c).iter().zip(v.column(c).iter()) {
            worst = worst.max((a - t * b).abs());
        }
    }
    worst
}
