//! Compressed sparse row storage with deterministic parallel products.
//!
//! Every output entry of a product is accumulated over the stored entries of
//! one row in ascending column order, so results are bit-identical for any
//! worker count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid_input, Result};

/// Real matrix in compressed sparse row form with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= nrows || t.1 >= ncols) {
            return Err(invalid_input(format!(
                "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
            )));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Builds a matrix from raw CSR arrays, validating their structure.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 || indptr[0] != 0 {
            return Err(invalid_input("row pointer array has the wrong shape"));
        }
        if indices.len() != values.len() || *indptr.last().unwrap_or(&0) != indices.len() {
            return Err(invalid_input("index and value arrays disagree with row pointers"));
        }
        for i in 0..nrows {
            if indptr[i] > indptr[i + 1] {
                return Err(invalid_input("row pointers must be nondecreasing"));
            }
            let row = &indices[indptr[i]..indptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= ncols) {
                return Err(invalid_input(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Sparse copy of a dense matrix keeping entries that are not exactly zero.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), triplets).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    /// Stored value at `(i, j)`, or zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Same sparsity pattern with every value replaced by `f(i, j, value)`.
    pub fn map<F: Fn(usize, usize, f64) -> f64>(&self, f: F) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                values.push(f(i, j, v));
            }
        }
        Self { values, ..self.clone() }
    }

    /// True when the pattern and values equal those of the transpose bit for bit.
    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| {
                let (cj, vj) = self.row(j);
                matches!(cj.binary_search(&i), Ok(p) if vj[p].to_bits() == v.to_bits())
            })
        })
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, triplets).expect("indices in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.ncols];
        for (p, &k) in keep.iter().enumerate() {
            position[k] = p;
        }
        let mut triplets = Vec::new();
        for (p, &i) in keep.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if position[j] != usize::MAX {
                    triplets.push((p, position[j], v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), triplets).expect("indices in range")
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = A x` into a caller buffer.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        });
    }

    /// `Y = A X` for a row-major block `X` with `width` columns.
    pub fn spmm_row_major(&self, x: &[f64], width: usize, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols * width, "spmm input shape mismatch");
        assert_eq!(y.len(), self.nrows * width, "spmm output shape mismatch");
        if width == 0 {
            return;
        }
        y.par_chunks_mut(width).with_min_len(64).enumerate().for_each(|(i, out)| {
            out.iter_mut().for_each(|o| *o = 0.0);
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let src = &x[j * width..(j + 1) * width];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        });
    }

    /// `A X` for a column-major dense block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols, "product dimension mismatch");
        let width = x.ncols();
        let xr = to_row_major(x);
        let mut yr = vec![0.0; self.nrows * width];
        self.spmm_row_major(&xr, width, &mut yr);
        from_row_major(self.nrows, width, &yr)
    }
}

/// Row-major copy of a column-major matrix.
pub fn to_row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = a.shape();
    let mut out = vec![0.0; r * c];
    for j in 0..c {
        for (i, v) in a.column(j).iter().enumerate() {
            out[i * c + j] = *v;
        }
    }
    out
}

/// Column-major matrix from a row-major buffer.
pub fn from_row_major(nrows: usize, ncols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(nrows, ncols, data)
}
