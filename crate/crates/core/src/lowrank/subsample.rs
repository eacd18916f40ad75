use super::id::pivoted_id;
use super::rank::approximate_rank;
use crate::error::{invalid_param, Result};
use crate::graph::SpectralCache;
use crate::multiscale::{ScaleLevel, ScaleStack};

/// Keeps the `n_scales_kept` coarsest levels and, per level, about
/// `R_delta(|lambda|^(2^k))` centers chosen by ID of the level's values.
///
/// Center sets are nested (each finer level contains the next coarser one), and
/// every kept center is weighted by the total interpolation mass it represents.
pub fn subsample_embedding(
    stack: &ScaleStack,
    spectral: &SpectralCache,
    delta: f64,
    n_scales_kept: usize,
) -> Result<ScaleStack> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid_param("delta must be finite and nonnegative"));
    }
    if delta == 0.0 {
        return Ok(stack.clone());
    }
    if n_scales_kept == 0 {
        return Err(invalid_param("at least one scale must be kept"));
    }
    let top = stack.top_scales(n_scales_kept);
    let mut kept: Vec<ScaleLevel> = Vec::with_capacity(top.levels.len());
    let mut forced_nodes: Vec<usize> = Vec::new();
    for level in top.levels.iter().rev() {
        let m = level.values.ncols();
        let rank = approximate_rank(spectral.eigenvalues(), delta, 1u64 << level.scale.min(62));
        if !spectral.is_complete() && rank >= spectral.rank() {
            return Err(crate::Error::InvalidState(format!(
                "spectral cache of rank {} cannot resolve the rank at scale {}",
                spectral.rank(),
                level.scale
            )));
        }
        let cap = m.min(level.len()).max(forced_nodes.len());
        let target = rank.max(forced_nodes.len()).clamp(1, cap.max(1));
        let mut position = vec![usize::MAX; stack.n_nodes];
        for (p, &c) in level.centers.iter().enumerate() {
            position[c] = p;
        }
        let forced: Vec<usize> = forced_nodes.iter().map(|&c| position[c]).collect();
        if forced.iter().any(|&p| p == usize::MAX) {
            return Err(crate::Error::InvalidState(format!(
                "scale {} lacks centers kept at the next coarser scale",
                level.scale
            )));
        }
        let ids = pivoted_id(&level.values.transpose(), target, &forced, delta);
        let weights: Vec<f64> = ids
            .coefficients
            .row_iter()
            .map(|row| row.iter().zip(&level.weights).map(|(c, w)| c * w).sum())
            .collect();
        let centers: Vec<usize> = ids.selected.iter().map(|&p| level.centers[p]).collect();
        kept.push(ScaleLevel {
            scale: level.scale,
            centers: centers.clone(),
            values: level.values.select_rows(&ids.selected),
            weights,
        });
        forced_nodes = centers;
    }
    kept.reverse();
    Ok(ScaleStack { n_nodes: stack.n_nodes, levels: kept })
}
