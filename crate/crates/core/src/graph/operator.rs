use nalgebra::DMatrix;
use rayon::prelude::*;

use super::AffinityKernel;
use crate::error::{Error, Result};
use crate::sparse::{from_row_major, to_row_major, CsrMatrix};

/// Connected components of the kernel graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    /// Component id of every node; ids are assigned in order of the lowest member.
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl ConnectivityReport {
    pub fn n_components(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_connected(&self) -> bool {
        self.sizes.len() == 1
    }

    /// Node lists per component, each in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    fn of(weights: &CsrMatrix) -> Self {
        let n = weights.nrows();
        let mut labels = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if labels[start] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            labels[start] = id;
            stack.push(start);
            let mut size = 0;
            while let Some(i) = stack.pop() {
                size += 1;
                let (cols, vals) = weights.row(i);
                for (&j, &w) in cols.iter().zip(vals) {
                    if w > 0.0 && labels[j] == usize::MAX {
                        labels[j] = id;
                        stack.push(j);
                    }
                }
            }
            sizes.push(size);
        }
        Self { labels, sizes }
    }
}

/// Anisotropically normalized diffusion operator and its symmetric conjugate.
///
/// The Markov matrix `P = D^{-1/2} S D^{1/2}` is never stored; use [`DiffusionOperator::apply`].
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    q: Vec<f64>,
    kernel_norm: CsrMatrix,
    deg: Vec<f64>,
    sqrt_deg: Vec<f64>,
    sym: CsrMatrix,
    connectivity: ConnectivityReport,
}

/// Normalizes a kernel into the diffusion operator.
pub fn build_diffusion_operator(kernel: &AffinityKernel) -> Result<DiffusionOperator> {
    let weights = kernel.weights();
    let q = weights.row_sums();
    let zero_rows: Vec<usize> = q.iter().enumerate().filter(|(_, &s)| s <= 0.0).map(|(i, _)| i).collect();
    if !zero_rows.is_empty() {
        return Err(Error::DegenerateNode { indices: zero_rows });
    }
    let kernel_norm = weights.map(|i, j, w| w / (q[i] * q[j]));
    let deg = kernel_norm.row_sums();
    let sqrt_deg: Vec<f64> = deg.iter().map(|d| d.sqrt()).collect();
    let sym = kernel_norm.map(|i, j, w| w / (sqrt_deg[i] * sqrt_deg[j]));
    let connectivity = ConnectivityReport::of(weights);
    if !connectivity.is_connected() {
        log::warn!("kernel graph has {} connected components", connectivity.n_components());
    }
    Ok(DiffusionOperator { q, kernel_norm, deg, sqrt_deg, sym, connectivity })
}

/// Stationary law `deg / sum(deg)`; on disconnected graphs each component carries its degree mass.
pub fn stationary_distribution(op: &DiffusionOperator) -> Vec<f64> {
    let total: f64 = op.deg.iter().sum();
    op.deg.iter().map(|d| d / total).collect()
}

impl DiffusionOperator {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn kernel_norm(&self) -> &CsrMatrix {
        &self.kernel_norm
    }

    pub fn deg(&self) -> &[f64] {
        &self.deg
    }

    pub fn sqrt_deg(&self) -> &[f64] {
        &self.sqrt_deg
    }

    pub fn sym(&self) -> &CsrMatrix {
        &self.sym
    }

    pub fn connectivity(&self) -> &ConnectivityReport {
        &self.connectivity
    }

    /// `P v` computed as `D^{-1/2} (S (D^{1/2} v))`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = v.iter().zip(&self.sqrt_deg).map(|(x, s)| x * s).collect();
        let mut out = self.sym.matvec(&scaled);
        out.iter_mut().zip(&self.sqrt_deg).for_each(|(y, s)| *y /= s);
        out
    }

    /// `P X` for every column of `x`.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let width = x.ncols();
        let mut xr = to_row_major(x);
        self.scale_rows(&mut xr, width, false);
        let mut yr = vec![0.0; xr.len()];
        self.sym.spmm_row_major(&xr, width, &mut yr);
        self.scale_rows(&mut yr, width, true);
        from_row_major(self.n(), width, &yr)
    }

    /// Multiplies row `i` of a row-major block by `sqrt(deg_i)`, or divides when `inverse`.
    pub(crate) fn scale_rows(&self, data: &mut [f64], width: usize, inverse: bool) {
        if width == 0 {
            return;
        }
        data.par_chunks_mut(width).zip(&self.sqrt_deg).for_each(|(row, &s)| {
            if inverse {
                row.iter_mut().for_each(|v| *v /= s);
            } else {
                row.iter_mut().for_each(|v| *v *= s);
            }
        });
    }

    /// Dense Markov matrix, for small graphs and reference checks.
    pub fn transition_dense(&self) -> DMatrix<f64> {
        let mut p = self.sym.to_dense();
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] *= self.sqrt_deg[j] / self.sqrt_deg[i];
            }
        }
        p
    }
}
