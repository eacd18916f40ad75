use crate::error::{invalid_param, Result};
use crate::graph::{decompose_symmetric, DiffusionOperator, SpectralOptions};

const MIN_SCALE: usize = 8;

/// Smallest `K` with `|lambda_1|^(2^K) <= mix_tol * min_i sqrt(pi_i)`, clamped to
/// `[8, ceil(log2 n) + 4]`; the lower clamp wins for graphs under 16 nodes.
///
/// Disconnected graphs are handled component by component and the largest `K` is returned.
pub fn default_max_scale(op: &DiffusionOperator, mix_tol: f64) -> Result<usize> {
    if !(mix_tol > 0.0 && mix_tol < 1.0) {
        return Err(invalid_param(format!("mixing tolerance must lie in (0, 1), got {mix_tol}")));
    }
    let n = op.n();
    let upper = (ceil_log2(n) + 4).max(MIN_SCALE);
    let mut worst = 0usize;
    for members in op.connectivity().members() {
        let lambda = if members.len() == 1 {
            0.0
        } else {
            let sub = op.sym().principal_submatrix(&members);
            let options = SpectralOptions { rank: Some(2), ..SpectralOptions::default() };
            let cache = decompose_symmetric(&sub, &options)?;
            cache.eigenvalues()[1].abs()
        };
        let mass: f64 = members.iter().map(|&i| op.deg()[i]).sum();
        let min_root = members.iter().map(|&i| (op.deg()[i] / mass).sqrt()).fold(f64::INFINITY, f64::min);
        let target = mix_tol * min_root;
        worst = worst.max(scales_to_mix(lambda, target, upper));
    }
    Ok(worst.clamp(MIN_SCALE, upper))
}

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

/// Smallest `K <= cap` with `lambda^(2^K) <= target`, or `cap` if none.
pub fn scales_to_mix(lambda: f64, target: f64, cap: usize) -> usize {
    let mut power = lambda;
    for k in 0..=cap {
        if power <= target {
            return k;
        }
        power *= power;
    }
    cap
}
