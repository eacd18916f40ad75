use std::f64::consts::PI;

use super::exact::check_shapes;
use super::{DistributionSet, ScaleLevel, ScaleStack};
use crate::error::{invalid_param, Result};
use crate::graph::DiffusionOperator;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Chebyshev coefficients of `x^power` on `[-1, 1]` by Gauss-Chebyshev quadrature at `order + 1` nodes.
///
/// Terms that vanish identically (wrong parity, or index above `power`) are exactly zero.
pub fn chebyshev_coefficients(power: u64, order: usize) -> Vec<f64> {
    let nodes = order + 1;
    let angles: Vec<f64> = (0..nodes).map(|l| PI * (l as f64 + 0.5) / nodes as f64).collect();
    let samples: Vec<f64> = angles.iter().map(|t| monomial(t.cos(), power)).collect();
    let mut coefficients: Vec<f64> = (0..=order)
        .map(|j| {
            let sum: f64 = angles.iter().zip(&samples).map(|(t, h)| h * (j as f64 * t).cos()).sum();
            2.0 * sum / nodes as f64
        })
        .collect();
    coefficients[0] *= 0.5;
    for (j, c) in coefficients.iter_mut().enumerate() {
        if j as u64 > power || (j as u64 + power) % 2 == 1 {
            *c = 0.0;
        }
    }
    coefficients
}

fn monomial(x: f64, power: u64) -> f64 {
    match i32::try_from(power) {
        Ok(p) => x.powi(p),
        Err(_) => x.powf(power as f64),
    }
}

/// Dyadic diffusions through Chebyshev filters of the symmetric conjugate.
///
/// A single three-term sweep `T_{j+1} = 2 S T_j - T_{j-1}` over `order` products serves all scales.
pub fn diffuse_dyadic_chebyshev(
    op: &DiffusionOperator,
    dist: &DistributionSet,
    max_scale: usize,
    order: usize,
) -> Result<ScaleStack> {
    if max_scale < 1 {
        return Err(invalid_param("max scale must be at least 1"));
    }
    if order < 1 {
        return Err(invalid_param("Chebyshev order must be at least 1"));
    }
    check_shapes(op, dist)?;
    let (n, m) = (op.n(), dist.m());
    let coefficients: Vec<Vec<f64>> = (0..=max_scale).map(|k| chebyshev_coefficients(1u64 << k, order)).collect();
    let sym = op.sym();
    let sqrt_deg = op.sqrt_deg();
    let measures = dist.measures();
    let mut prev: Vec<f64> = (0..n).flat_map(|i| (0..m).map(move |c| measures[(i, c)] * sqrt_deg[i])).collect();
    let mut cur = vec![0.0; n * m];
    sym.spmm_row_major(&prev, m, &mut cur);
    let mut terms = TermBatch::new(n * m, coefficients.len());
    terms.push(&prev, &coefficients, 0);
    terms.push(&cur, &coefficients, 1);
    let mut next = vec![0.0; n * m];
    for j in 2..=order {
        next.par_chunks_mut(m).enumerate().with_min_len(64).for_each(|(i, out)| {
            out.iter_mut().zip(&prev[i * m..(i + 1) * m]).for_each(|(o, p)| *o = -p);
            let (cols, vals) = sym.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let v = 2.0 * v;
                for (o, x) in out.iter_mut().zip(&cur[c * m..(c + 1) * m]) {
                    *o += v * x;
                }
            }
        });
        terms.push(&next, &coefficients, j);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let sums = terms.finish();
    let levels = sums
        .column_iter()
        .enumerate()
        .map(|(k, sum)| {
            let mut values = DMatrix::zeros(n, m);
            for first in (0..n).step_by(ROW_TILE) {
                let rows = first..(first + ROW_TILE).min(n);
                for c in 0..m {
                    for i in rows.clone() {
                        values[(i, c)] = sum[i * m + c] / sqrt_deg[i];
                    }
                }
            }
            ScaleLevel::full(k, values)
        })
        .collect();
    Ok(ScaleStack { n_nodes: n, levels })
}

const TERM_BATCH: usize = 16;
const ROW_TILE: usize = 64;

/// Chebyshev terms buffered so that their weighted sums into every level are
/// formed by one matrix product per batch.
struct TermBatch {
    sums: DMatrix<f64>,
    terms: DMatrix<f64>,
    weights: DMatrix<f64>,
    filled: usize,
}

impl TermBatch {
    fn new(len: usize, n_levels: usize) -> Self {
        Self {
            sums: DMatrix::zeros(len, n_levels),
            terms: DMatrix::zeros(len, TERM_BATCH),
            weights: DMatrix::zeros(TERM_BATCH, n_levels),
            filled: 0,
        }
    }

    fn push(&mut self, term: &[f64], coefficients: &[Vec<f64>], j: usize) {
        if coefficients.iter().all(|c| c[j] == 0.0) {
            return;
        }
        self.terms.column_mut(self.filled).copy_from_slice(term);
        for (k, c) in coefficients.iter().enumerate() {
            self.weights[(self.filled, k)] = c[j];
        }
        self.filled += 1;
        if self.filled == TERM_BATCH {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.filled > 0 {
            let terms = self.terms.columns(0, self.filled);
            let weights = self.weights.rows(0, self.filled);
            self.sums.gemm(1.0, &terms, &weights, 1.0);
            self.filled = 0;
        }
    }

    fn finish(mut self) -> DMatrix<f64> {
        self.flush();
        self.sums
    }
}
