use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_param, Result};
use crate::graph::PointCloud;

const TURN_START: f64 = 1.5 * std::f64::consts::PI;
const TURN_END: f64 = 4.5 * std::f64::consts::PI;

/// Parameters of the swiss-roll blob generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SwissRollConfig {
    pub distributions: usize,
    pub points_per: usize,
    /// Standard deviation of each blob in unrolled coordinates.
    pub noise: f64,
    /// Extent of the roll along its axis.
    pub height: f64,
    /// 3, or a larger dimension into which the roll is randomly rotated.
    pub ambient_dim: usize,
    pub seed: u64,
}

impl Default for SwissRollConfig {
    fn default() -> Self {
        Self { distributions: 100, points_per: 100, noise: 2.0, height: 21.0, ambient_dim: 3, seed: 0 }
    }
}

/// Generated roll: ambient points plus their exact unrolled coordinates.
#[derive(Debug, Clone)]
pub struct SwissRoll {
    pub points: PointCloud,
    /// `n x 2` matrix of (arc length, height) per point.
    pub unrolled: DMatrix<f64>,
    /// `m x 2` matrix of blob centers in unrolled coordinates.
    pub centers: DMatrix<f64>,
}

/// Arc length of the spiral `(t cos t, t sin t)` from 0 to `t`.
pub fn spiral_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Inverse of [`spiral_arc_length`] by Newton iteration.
pub fn spiral_parameter(s: f64) -> f64 {
    let mut t = s.signum() * (2.0 * s.abs()).sqrt();
    for _ in 0..100 {
        let step = (spiral_arc_length(t) - s) / (1.0 + t * t).sqrt();
        t -= step;
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

/// Ambient 3D image of an unrolled coordinate.
pub fn roll_up(arc: f64, height: f64) -> [f64; 3] {
    let t = spiral_parameter(arc);
    [t * t.cos(), height, t * t.sin()]
}

pub fn generate_swiss_roll(m: usize, points_per: usize, noise: f64, seed: u64) -> Result<SwissRoll> {
    generate_swiss_roll_with(&SwissRollConfig {
        distributions: m,
        points_per,
        noise,
        seed,
        ..SwissRollConfig::default()
    })
}

/// Gaussian blobs centered uniformly on the unrolled sheet, then rolled up.
pub fn generate_swiss_roll_with(config: &SwissRollConfig) -> Result<SwissRoll> {
    if config.distributions == 0 || config.points_per == 0 {
        return Err(invalid_param("swiss roll needs at least one distribution and one point each"));
    }
    if !(config.noise >= 0.0) || !(config.height > 0.0) {
        return Err(invalid_param("noise must be nonnegative and height positive"));
    }
    if config.ambient_dim < 3 {
        return Err(invalid_param("ambient dimension must be at least 3"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (s0, s1) = (spiral_arc_length(TURN_START), spiral_arc_length(TURN_END));
    let m = config.distributions;
    let centers = DMatrix::from_fn(m, 2, |_, _| 0.0);
    let mut centers = centers;
    for i in 0..m {
        centers[(i, 0)] = rng.random_range(s0..s1);
        centers[(i, 1)] = rng.random_range(0.0..config.height);
    }
    let n = m * config.points_per;
    let mut unrolled = DMatrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    let mut ambient = Vec::with_capacity(n * config.ambient_dim);
    for i in 0..m {
        for p in 0..config.points_per {
            let row = i * config.points_per + p;
            let ds: f64 = rng.sample(StandardNormal);
            let dh: f64 = rng.sample(StandardNormal);
            unrolled[(row, 0)] = centers[(i, 0)] + config.noise * ds;
            unrolled[(row, 1)] = centers[(i, 1)] + config.noise * dh;
            let xyz = roll_up(unrolled[(row, 0)], unrolled[(row, 1)]);
            ambient.extend_from_slice(&xyz);
            ambient.extend(std::iter::repeat_n(0.0, config.ambient_dim - 3));
            labels.push(i);
        }
    }
    if config.ambient_dim > 3 {
        let rotation = random_rotation(config.ambient_dim, &mut rng);
        for row in ambient.chunks_mut(config.ambient_dim) {
            let rotated = &rotation * nalgebra::DVector::from_column_slice(row);
            row.copy_from_slice(rotated.as_slice());
        }
    }
    let points = PointCloud::from_row_major(config.ambient_dim, ambient, labels)?;
    Ok(SwissRoll { points, unrolled, centers })
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `n` equispaced points on `[0, 1]`, each its own distribution.
pub fn generate_line_graph(n: usize) -> Result<PointCloud> {
    if n < 2 {
        return Err(invalid_param("a line graph needs at least two points"));
    }
    let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    PointCloud::from_row_major(1, coords, (0..n).collect())
}
