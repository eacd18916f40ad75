use nalgebra::DMatrix;

use super::{DistributionSet, ScaleLevel, ScaleStack};
use crate::error::{invalid_param, Error, Result};
use crate::graph::{DiffusionOperator, SpectralCache};

const NEGLIGIBLE_SQUARED_EIGENVALUE: f64 = 1e-12;

/// Dyadic diffusions from the eigendecomposition of the symmetric conjugate.
///
/// Level 0 is one direct application of `P`; level `k >= 1` is
/// `D^{-1/2} U diag(lambda^(2^k)) U^T D^{1/2} mu`.
pub fn diffuse_dyadic_exact(
    op: &DiffusionOperator,
    spectral: &SpectralCache,
    dist: &DistributionSet,
    max_scale: usize,
) -> Result<ScaleStack> {
    if max_scale < 1 {
        return Err(invalid_param("max scale must be at least 1"));
    }
    check_shapes(op, dist)?;
    if spectral.n() != op.n() {
        return Err(Error::InvalidState("spectral cache belongs to a different operator".into()));
    }
    if !spectral.is_complete() {
        let tail = spectral.eigenvalues().last().map_or(1.0, |l| l * l);
        if tail > NEGLIGIBLE_SQUARED_EIGENVALUE {
            return Err(Error::InvalidState(format!(
                "spectral cache truncated at rank {} where lambda^2 = {tail:.3e} is not negligible",
                spectral.rank()
            )));
        }
    }
    let u = spectral.eigenvectors();
    let mut scaled = dist.measures().clone();
    for (r, s) in op.sqrt_deg().iter().enumerate() {
        scaled.row_mut(r).scale_mut(*s);
    }
    let coefficients = u.transpose() * scaled;
    let mut powers: Vec<f64> = spectral.eigenvalues().to_vec();
    let mut levels = vec![ScaleLevel::full(0, op.apply_matrix(dist.measures()))];
    for k in 1..=max_scale {
        powers.iter_mut().for_each(|p| *p *= *p);
        let mut filtered = coefficients.clone();
        for (r, p) in powers.iter().enumerate() {
            filtered.row_mut(r).scale_mut(*p);
        }
        let mut values = u * filtered;
        for (r, s) in op.sqrt_deg().iter().enumerate() {
            values.row_mut(r).unscale_mut(*s);
        }
        levels.push(ScaleLevel::full(k, values));
    }
    Ok(ScaleStack { n_nodes: op.n(), levels })
}

/// Dyadic diffusions by repeated application of `P` (`2^K` products in total).
pub fn diffuse_dyadic_power(op: &DiffusionOperator, dist: &DistributionSet, max_scale: usize) -> Result<ScaleStack> {
    if max_scale < 1 {
        return Err(invalid_param("max scale must be at least 1"));
    }
    check_shapes(op, dist)?;
    let mut current: DMatrix<f64> = op.apply_matrix(dist.measures());
    let mut levels = vec![ScaleLevel::full(0, current.clone())];
    for k in 1..=max_scale {
        for _ in 0..(1usize << (k - 1)) {
            current = op.apply_matrix(&current);
        }
        levels.push(ScaleLevel::full(k, current.clone()));
    }
    Ok(ScaleStack { n_nodes: op.n(), levels })
}

pub(crate) fn check_shapes(op: &DiffusionOperator, dist: &DistributionSet) -> Result<()> {
    if dist.n() != op.n() {
        return Err(Error::InvalidInput(format!(
            "distributions live on {} nodes but the graph has {}",
            dist.n(),
            op.n()
        )));
    }
    Ok(())
}
