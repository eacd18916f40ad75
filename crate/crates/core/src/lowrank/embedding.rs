use nalgebra::{DMatrix, DVector};

use super::randomized::{randomized_id, SymmetricPower};
use super::rank::{approximate_rank, RankProfile};
use crate::error::{invalid_param, Result};
use crate::graph::{DiffusionOperator, SpectralCache};
use crate::multiscale::{assemble_embedding, DistributionSet, EmbedConfig, MultiscaleEmbedding, ScaleLevel, ScaleStack};
use crate::sparse::{from_row_major, to_row_major};

const OVERSAMPLING: usize = 8;
const MATCH_SKETCH: usize = 5;

/// Output of [`id_diffusion_embedding`].
#[derive(Debug, Clone)]
pub struct IdDiffusion {
    pub stack: ScaleStack,
    pub embedding: MultiscaleEmbedding,
    pub profile: RankProfile,
}

enum Basis {
    /// All nodes; holds `S^(2^k) D^{1/2} mu` row-major.
    Full(Vec<f64>),
    /// `S^(2^k) ~ E^T G E` on centers, with `Z = E E^T`, `w = E D^{1/2} mu` and `e = E D^{-1/2} 1`.
    Reduced { centers: Vec<usize>, g: DMatrix<f64>, z: DMatrix<f64>, w: DMatrix<f64>, e: DVector<f64> },
}

/// Rank of `S^(2^scale)` at precision `delta`, or `None` when the cache is too short to tell.
pub fn scale_rank(spectral: &SpectralCache, delta: f64, scale: usize) -> Option<usize> {
    let rank = approximate_rank(spectral.eigenvalues(), delta, 1u64 << scale.min(62));
    (spectral.is_complete() || rank < spectral.rank()).then_some(rank)
}

/// Dyadic diffusion on a basis that shrinks by randomized ID whenever the
/// estimated rank of the next power drops below `gamma`.
///
/// Until the first reduction the operator is applied implicitly. Kept centers
/// carry the interpolation mass of the nodes they represent.
pub fn id_diffusion_embedding(
    op: &DiffusionOperator,
    spectral: &SpectralCache,
    dist: &DistributionSet,
    config: &EmbedConfig,
    gamma: usize,
    seed: u64,
) -> Result<IdDiffusion> {
    config.validate()?;
    let n = op.n();
    if gamma > n {
        return Err(invalid_param(format!("gamma {gamma} exceeds the node count {n}")));
    }
    if dist.n() != n || spectral.n() != n {
        return Err(invalid_param("operator, spectrum and distributions disagree on node count"));
    }
    let m = dist.m();
    let sqrt_deg = op.sqrt_deg();
    let delta = config.rank_delta;
    let mut profile = RankProfile::default();
    profile.push(0, scale_rank(spectral, delta, 0), n);
    let mut levels = vec![ScaleLevel::full(0, op.apply_matrix(dist.measures()))];

    let mut scaled = to_row_major(dist.measures());
    op.scale_rows(&mut scaled, m, false);
    let mut state = Basis::Full(apply_power(op, &scaled, m, 1));

    for k in 1..=config.max_scale {
        let rank = scale_rank(spectral, delta, k);
        let target = rank.filter(|&r| r < gamma && r > MATCH_SKETCH);
        let basis_size = match &state {
            Basis::Full(_) => n,
            Basis::Reduced { centers, .. } => centers.len(),
        };
        let target = match target {
            Some(r) if r + OVERSAMPLING >= basis_size => {
                log::warn!("scale {k}: rank estimate {r} does not fit the current basis of {basis_size}; not reducing");
                None
            }
            other => other,
        };
        state = match (state, target) {
            (Basis::Full(current), None) => Basis::Full(apply_power(op, &current, m, 1 << (k - 1))),
            (Basis::Full(_), Some(r)) => {
                let power = SymmetricPower { matrix: op.sym(), power: 1 << (k - 1) };
                let ids = randomized_id(&power, r + OVERSAMPLING, r, MATCH_SKETCH, seed.wrapping_add(k as u64))?;
                let b = &ids.columns;
                let c = &ids.coefficients;
                let scaled_mat = from_row_major(n, m, &scaled);
                let inv_sqrt = DVector::from_iterator(n, sqrt_deg.iter().map(|s| 1.0 / s));
                Basis::Reduced {
                    centers: ids.selected.clone(),
                    g: symmetrize(b.transpose() * b),
                    z: c * c.transpose(),
                    w: c * scaled_mat,
                    e: c * inv_sqrt,
                }
            }
            (Basis::Reduced { centers, g, z, w, e }, None) => {
                let g = symmetrize(&g * &z * &g);
                Basis::Reduced { centers, g, z, w, e }
            }
            (Basis::Reduced { centers, g, z, w, e }, Some(r)) => {
                let ids = randomized_id(&g, r + OVERSAMPLING, r, MATCH_SKETCH, seed.wrapping_add(k as u64))?;
                let c = &ids.coefficients;
                let rows = g.select_rows(&ids.selected);
                let g = symmetrize(&rows * &z * rows.transpose());
                Basis::Reduced {
                    centers: ids.selected.iter().map(|&p| centers[p]).collect(),
                    g,
                    z: c * z * c.transpose(),
                    w: c * w,
                    e: c * e,
                }
            }
        };
        let level = match &state {
            Basis::Full(current) => {
                let mut values = current.clone();
                op.scale_rows(&mut values, m, true);
                ScaleLevel::full(k, from_row_major(n, m, &values))
            }
            Basis::Reduced { centers, g, w, e, .. } => {
                let mut values = g * w;
                let mut weights = Vec::with_capacity(centers.len());
                for (r, &c) in centers.iter().enumerate() {
                    values.row_mut(r).unscale_mut(sqrt_deg[c]);
                    weights.push(sqrt_deg[c] * e[r]);
                }
                ScaleLevel { scale: k, centers: centers.clone(), values, weights }
            }
        };
        profile.push(k, rank, level.len());
        levels.push(level);
    }
    let stack = ScaleStack { n_nodes: n, levels };
    let mut embedding = assemble_embedding(&stack, config.alpha, config.max_scale)?;
    embedding.config = config.clone();
    Ok(IdDiffusion { stack, embedding, profile })
}

/// `S^times X` for a row-major block.
fn apply_power(op: &DiffusionOperator, x: &[f64], width: usize, times: usize) -> Vec<f64> {
    let mut cur = x.to_vec();
    let mut next = vec![0.0; cur.len()];
    for _ in 0..times {
        op.sym().spmm_row_major(&cur, width, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}
