use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid_param, Result};

pub(crate) const RANK_TOLERANCE: f64 = 1e-13;

/// Interpolative decomposition `A P ~ B [I | T]`, stored un-permuted as `A ~ B C`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdFactors {
    /// Selected columns of the input, `m x k`.
    pub columns: DMatrix<f64>,
    /// `k x n` coefficients with an identity block on the selected columns.
    pub coefficients: DMatrix<f64>,
    /// Input column index of each column of `columns`.
    pub selected: Vec<usize>,
    /// Column order chosen by pivoting; its first `k` entries equal `selected`.
    pub permutation: Vec<usize>,
    /// Rank that was asked for; larger than `rank()` when the input was numerically singular.
    pub requested_rank: usize,
}

impl IdFactors {
    pub fn rank(&self) -> usize {
        self.selected.len()
    }

    /// `B C`, the low-rank approximation of the input.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        &self.columns * &self.coefficients
    }
}

/// Deterministic ID from column-pivoted Householder QR stopped after `k` steps.
pub fn interpolative_decomposition(a: &DMatrix<f64>, k: usize) -> Result<IdFactors> {
    let (m, n) = a.shape();
    if k == 0 || k >= m.min(n) {
        return Err(invalid_param(format!("rank {k} must satisfy 1 <= k < min({m}, {n})")));
    }
    Ok(pivoted_id(a, k, &[], RANK_TOLERANCE))
}

/// ID allowing `k <= min(m, n)`; the columns in `forced` are selected first, in order.
///
/// Pivoting stops early once every remaining column has residual norm at most
/// `tol` times the largest input column norm.
pub(crate) fn pivoted_id(a: &DMatrix<f64>, k: usize, forced: &[usize], tol: f64) -> IdFactors {
    let (m, n) = a.shape();
    let k = k.min(m).min(n);
    let qr = PivotedQr::new(a, k, forced, tol);
    let rank = qr.rank;
    if rank < k {
        log::info!("matrix is numerically rank {rank}; interpolative rank reduced from {k}");
    }
    let r11 = qr.r.view((0, 0), (rank, rank));
    let r12 = qr.r.view((0, rank), (rank, n - rank));
    let t = upper_triangular_solve(&r11.into_owned(), &r12.into_owned());
    let mut coefficients = DMatrix::zeros(rank, n);
    for q in 0..rank {
        coefficients[(q, qr.perm[q])] = 1.0;
    }
    for q in 0..n - rank {
        coefficients.column_mut(qr.perm[rank + q]).copy_from(&t.column(q));
    }
    let selected = qr.perm[..rank].to_vec();
    IdFactors {
        columns: a.select_columns(&selected),
        coefficients,
        selected,
        permutation: qr.perm,
        requested_rank: k,
    }
}

/// Solves `R X = B` for upper-triangular `R`; zero pivots yield zero rows of `X`.
fn upper_triangular_solve(r: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.nrows();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let mut x = b.clone();
    x.as_mut_slice().par_chunks_mut(k.max(1)).for_each(|col| {
        for i in (0..k).rev() {
            let mut acc = col[i];
            for j in i + 1..k {
                acc -= r[(i, j)] * col[j];
            }
            let pivot = r[(i, i)];
            col[i] = if pivot.abs() > scale * 1e-15 { acc / pivot } else { 0.0 };
        }
    });
    x
}

/// Householder QR with column pivoting, truncated after a fixed number of steps.
pub(crate) struct PivotedQr {
    /// Leading rows of `R` in pivoted column order (`rank x n`).
    pub r: DMatrix<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>, steps: usize, forced: &[usize], tol: f64) -> Self {
        let (m, n) = a.shape();
        let steps = steps.min(m).min(n);
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = w.column_iter().map(|c| c.norm_squared()).collect();
        let mut reference = norms.clone();
        let stop = tol * norms.iter().copied().fold(0.0, f64::max).sqrt();
        let mut rank = 0;
        for i in 0..steps {
            let p = if i < forced.len() {
                perm.iter().position(|&c| c == forced[i]).expect("forced column exists")
            } else {
                let mut best = i;
                for j in i + 1..n {
                    if norms[j] > norms[best] {
                        best = j;
                    }
                }
                if norms[best].sqrt() <= stop {
                    break;
                }
                best
            };
            w.swap_columns(i, p);
            perm.swap(i, p);
            norms.swap(i, p);
            reference.swap(i, p);
            let mut v: Vec<f64> = w.column(i).rows(i, m - i).iter().copied().collect();
            let norm_x = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
            v[0] -= alpha;
            let beta: f64 = v.iter().map(|x| x * x).sum();
            {
                let mut col = w.column_mut(i);
                col[i] = alpha;
                for r in i + 1..m {
                    col[r] = 0.0;
                }
            }
            if beta > 0.0 {
                let tail = &mut w.as_mut_slice()[(i + 1) * m..];
                tail.par_chunks_mut(m).for_each(|col| {
                    let seg = &mut col[i..];
                    let s: f64 = seg.iter().zip(&v).map(|(a, b)| a * b).sum();
                    let f = 2.0 * s / beta;
                    seg.iter_mut().zip(&v).for_each(|(a, b)| *a -= f * b);
                });
            }
            for j in i + 1..n {
                let head = w[(i, j)];
                norms[j] -= head * head;
                if norms[j] <= 1e-10 * reference[j] {
                    norms[j] = w.column(j).rows(i + 1, m - i - 1).norm_squared();
                    reference[j] = norms[j];
                }
            }
            rank = i + 1;
        }
        let r = w.rows(0, rank).into_owned();
        Self { r, perm, rank }
    }
}
