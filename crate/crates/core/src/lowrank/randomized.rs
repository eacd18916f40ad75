use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::id::{pivoted_id, RANK_TOLERANCE};
use super::IdFactors;
use crate::error::{invalid_param, Error, Result};
use crate::sparse::CsrMatrix;

const MAX_ATTEMPTS: usize = 3;
const MATCH_TOLERANCE: f64 = 1e-8;

/// A matrix that can be sketched from the left and queried for columns.
pub trait SketchOperator {
    fn nrows(&self) -> usize;

    fn ncols(&self) -> usize;

    /// `G A` for a `j x nrows` matrix `G`.
    fn left_multiply(&self, g: &DMatrix<f64>) -> DMatrix<f64>;

    /// The columns of `A` at `indices`.
    fn columns(&self, indices: &[usize]) -> DMatrix<f64>;
}

impl SketchOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn left_multiply(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        g * self
    }

    fn columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.select_columns(indices)
    }
}

/// `S^power` for a symmetric sparse `S`, applied through repeated products.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricPower<'a> {
    pub matrix: &'a CsrMatrix,
    pub power: usize,
}

impl SymmetricPower<'_> {
    /// `S^power X` for a row-major block.
    fn apply_row_major(&self, mut x: Vec<f64>, width: usize) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for _ in 0..self.power {
            self.matrix.spmm_row_major(&x, width, &mut y);
            std::mem::swap(&mut x, &mut y);
        }
        x
    }
}

impl SketchOperator for SymmetricPower<'_> {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    fn left_multiply(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let (j, n) = g.shape();
        let out = self.apply_row_major(g.as_slice().to_vec(), j);
        DMatrix::from_column_slice(j, n, &out)
    }

    fn columns(&self, indices: &[usize]) -> DMatrix<f64> {
        let (n, width) = (self.matrix.nrows(), indices.len());
        let mut x = vec![0.0; n * width];
        for (c, &i) in indices.iter().enumerate() {
            x[i * width + c] = 1.0;
        }
        let out = self.apply_row_major(x, width);
        DMatrix::from_row_slice(n, width, &out)
    }
}

/// Randomized ID: deterministic ID of the sketch `G1 A`, with the selected
/// columns recovered by matching a second sketch `G2`.
pub fn randomized_id<A: SketchOperator + ?Sized>(a: &A, j: usize, k: usize, l: usize, seed: u64) -> Result<IdFactors> {
    let (m, n) = (a.nrows(), a.ncols());
    if !(m.min(n) > j && j > k && k > l) {
        return Err(invalid_param(format!(
            "randomized ID needs min(m, n) > j > k > l; got m = {m}, n = {n}, j = {j}, k = {k}, l = {l}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_error = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let g1 = gaussian(j, m, &mut rng);
        let w = a.left_multiply(&g1);
        let sketch_id = pivoted_id(&w, k, &[], RANK_TOLERANCE);
        let g2 = gaussian(l, j, &mut rng);
        let w2 = &g2 * &w;
        let b2 = &g2 * &sketch_id.columns;
        match match_columns(&b2, &w2) {
            Ok(found) if found == sketch_id.selected => {
                return Ok(IdFactors {
                    columns: a.columns(&found),
                    coefficients: sketch_id.coefficients,
                    selected: found,
                    permutation: sketch_id.permutation,
                    requested_rank: k,
                });
            }
            Ok(found) => last_error = format!("recovered indices {found:?} disagree with the sketch pivots"),
            Err(e) => last_error = e,
        }
        log::warn!("randomized ID index recovery failed on attempt {}: {last_error}", attempt + 1);
    }
    Err(Error::Numerical { stage: "randomized ID", detail: last_error })
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// For each column of `needles`, the index of the nearest column of `haystack`.
fn match_columns(needles: &DMatrix<f64>, haystack: &DMatrix<f64>) -> std::result::Result<Vec<usize>, String> {
    let mut found = Vec::with_capacity(needles.ncols());
    for (c, needle) in needles.column_iter().enumerate() {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, candidate) in haystack.column_iter().enumerate() {
            let d = (needle - candidate).norm();
            if d < best.0 {
                best = (d, i);
            }
        }
        if best.0 > MATCH_TOLERANCE * (1.0 + needle.norm()) {
            return Err(format!("column {c} of the sketch has no match (distance {:.3e})", best.0));
        }
        found.push(best.1);
    }
    let mut sorted = found.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err("two sketch columns matched the same input column".into());
    }
    Ok(found)
}
