//! End-to-end runs from points to distances, and the reference benchmarks built on them.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid_param, Result};
use crate::graph::{
    build_diffusion_operator, gaussian_affinity, knn_affinity, spectral_decompose, AffinityKernel, BandwidthRule,
    DiffusionOperator, PointCloud, SpectralCache,
};
use crate::lowrank::{id_diffusion_embedding, subsample_embedding, RankProfile};
use crate::metric::{pairwise_distances, DistanceMatrix};
use crate::multiscale::{
    assemble_embedding, diffuse_dyadic_chebyshev, diffuse_dyadic_exact, indicator_distributions, DistributionSet,
    EmbedConfig, Method, MultiscaleEmbedding, ScaleStack,
};
use crate::oracle::{
    distance_correlation, distance_precision, exact_emd, exact_emd_1d, generate_line_graph, generate_swiss_roll_with,
    CostMatrix, SwissRoll, SwissRollConfig,
};

const SPECTRAL_TOLERANCE: f64 = 1e-8;
const ID_SPECTRAL_RANK: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Knn { k: usize, bandwidth: BandwidthRule },
    Gaussian { epsilon: f64, truncation: Option<f64> },
}

impl GraphSpec {
    pub fn kernel(&self, points: &PointCloud) -> Result<AffinityKernel> {
        match *self {
            GraphSpec::Knn { k, bandwidth } => knn_affinity(points, k, bandwidth),
            GraphSpec::Gaussian { epsilon, truncation } => gaussian_affinity(points, epsilon, truncation),
        }
    }

    pub fn operator(&self, points: &PointCloud) -> Result<DiffusionOperator> {
        build_diffusion_operator(&self.kernel(points)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOptions {
    pub config: EmbedConfig,
    /// Basis-size threshold of the ID engine; `n / 10` when unset.
    pub gamma: Option<usize>,
    /// Replace the stack by its top `n_scales_kept` levels, subsampled at `rank_delta`.
    pub subsample: bool,
    /// Eigenpairs to compute when a spectrum is needed; engine-specific default when unset.
    pub spectral_rank: Option<usize>,
    pub seed: u64,
}

impl EmbedOptions {
    pub fn new(config: EmbedConfig) -> Self {
        Self { config, gamma: None, subsample: false, spectral_rank: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EmbedOutput {
    pub embedding: MultiscaleEmbedding,
    pub stack: ScaleStack,
    pub spectral: Option<SpectralCache>,
    pub profile: Option<RankProfile>,
    pub timings: Vec<StageTiming>,
}

impl EmbedOutput {
    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timings.push(StageTiming { stage: stage.to_string(), seconds: start.elapsed().as_secs_f64() });
    Ok(out)
}

/// Runs the configured engine and, if asked, the subsampling pass.
pub fn embed_distributions(op: &DiffusionOperator, dist: &DistributionSet, options: &EmbedOptions) -> Result<EmbedOutput> {
    let config = &options.config;
    config.validate()?;
    let n = op.n();
    let gamma = options.gamma.unwrap_or((n / 10).max(1));
    let needs_spectrum = options.subsample || config.method != Method::Chebyshev;
    let mut timings = Vec::new();
    let spectral = if needs_spectrum {
        let rank = match (options.spectral_rank, config.method) {
            (Some(r), _) => Some(r),
            (None, Method::Interpolative) => Some(gamma.clamp(1, ID_SPECTRAL_RANK).min(n)),
            (None, _) => None,
        };
        Some(timed(&mut timings, "spectral", || spectral_decompose(op, rank, SPECTRAL_TOLERANCE))?)
    } else {
        None
    };
    let mut profile = None;
    let stack = match config.method {
        Method::Chebyshev => timed(&mut timings, "diffusion", || {
            diffuse_dyadic_chebyshev(op, dist, config.max_scale, config.cheb_order)
        })?,
        Method::ExactSpectral => timed(&mut timings, "diffusion", || {
            diffuse_dyadic_exact(op, spectral.as_ref().expect("computed above"), dist, config.max_scale)
        })?,
        Method::Interpolative => {
            let spec = spectral.as_ref().expect("computed above");
            let out = timed(&mut timings, "diffusion", || {
                id_diffusion_embedding(op, spec, dist, config, gamma, options.seed)
            })?;
            profile = Some(out.profile);
            out.stack
        }
    };
    let stack = if options.subsample {
        let spec = spectral.as_ref().expect("computed above");
        timed(&mut timings, "subsample", || {
            subsample_embedding(&stack, spec, config.rank_delta, config.n_scales_kept)
        })?
    } else {
        stack
    };
    let embedding = timed(&mut timings, "assemble", || assemble_embedding(&stack, config.alpha, config.max_scale))?;
    Ok(EmbedOutput { embedding, stack, spectral, profile, timings })
}

/// Graph, operator, indicator distributions and embedding for a labelled cloud.
pub fn embed_point_cloud(points: &PointCloud, graph: &GraphSpec, options: &EmbedOptions) -> Result<EmbedOutput> {
    let mut timings = Vec::new();
    let op = timed(&mut timings, "graph", || graph.operator(points))?;
    let dist = indicator_distributions(points.labels(), points.n_distributions())?;
    let mut out = embed_distributions(&op, &dist, options)?;
    timings.append(&mut out.timings);
    out.timings = timings;
    Ok(out)
}

/// Exact transport distances between the labelled groups of a swiss roll, on unrolled coordinates.
pub fn swiss_roll_ground_truth(roll: &SwissRoll) -> Result<DistanceMatrix> {
    let m = roll.centers.nrows();
    let labels = roll.points.labels();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let coords: Vec<DMatrix<f64>> = groups.iter().map(|g| roll.unrolled.select_rows(g)).collect();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let cost = CostMatrix::euclidean(&coords[i], &coords[j])?;
            let mu = vec![1.0 / groups[i].len() as f64; groups[i].len()];
            let nu = vec![1.0 / groups[j].len() as f64; groups[j].len()];
            exact_emd(&mu, &nu, &cost)
        })
        .collect::<Result<_>>()?;
    let mut dist = DMatrix::zeros(m, m);
    for (&(i, j), v) in pairs.iter().zip(values) {
        dist[(i, j)] = v;
        dist[(j, i)] = v;
    }
    DistanceMatrix::new(dist, "exact")
}

#[derive(Debug, Clone)]
pub struct BenchmarkMethod {
    pub label: String,
    pub options: EmbedOptions,
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub label: String,
    pub precision_at_10: f64,
    pub spearman: f64,
    pub seconds: f64,
    pub centers: usize,
    pub distances: DistanceMatrix,
}

#[derive(Debug, Clone)]
pub struct SwissRollReport {
    pub ground_truth: DistanceMatrix,
    pub ground_truth_seconds: f64,
    pub graph_seconds: f64,
    pub methods: Vec<MethodResult>,
}

#[derive(Debug, Clone)]
pub struct SwissRollBenchmark {
    pub roll: SwissRollConfig,
    pub graph: GraphSpec,
    pub methods: Vec<BenchmarkMethod>,
}

impl SwissRollBenchmark {
    /// kNN graph with `k = 10` and the standard engine line-up at `K = max(ceil(log2 n), 8)`.
    pub fn standard(roll: SwissRollConfig) -> Self {
        let n = roll.distributions * roll.points_per;
        let config = EmbedConfig::for_nodes(n);
        let methods = vec![
            BenchmarkMethod { label: "chebyshev".into(), options: EmbedOptions::new(config.clone()) },
            BenchmarkMethod {
                label: "id".into(),
                options: EmbedOptions::new(EmbedConfig { method: Method::Interpolative, ..config.clone() }),
            },
        ];
        Self { roll, graph: GraphSpec::Knn { k: 10, bandwidth: BandwidthRule::default() }, methods }
    }

    pub fn run(&self) -> Result<SwissRollReport> {
        let roll = generate_swiss_roll_with(&self.roll)?;
        let start = Instant::now();
        let ground_truth = swiss_roll_ground_truth(&roll)?;
        let ground_truth_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let op = self.graph.operator(&roll.points)?;
        let dist = indicator_distributions(roll.points.labels(), roll.points.n_distributions())?;
        let graph_seconds = start.elapsed().as_secs_f64();
        let methods = self
            .methods
            .iter()
            .map(|method| {
                let start = Instant::now();
                let out = embed_distributions(&op, &dist, &method.options)?;
                let distances = pairwise_distances(&out.embedding)?;
                let seconds = start.elapsed().as_secs_f64();
                Ok(MethodResult {
                    label: method.label.clone(),
                    precision_at_10: distance_precision(&distances, &ground_truth, 10)?,
                    spearman: distance_correlation(&distances, &ground_truth)?,
                    seconds,
                    centers: out.stack.center_count(),
                    distances,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SwissRollReport { ground_truth, ground_truth_seconds, graph_seconds, methods })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineBenchmark {
    pub n: usize,
    /// Gaussian bandwidth; `(3 / (n - 1))^2` when unset.
    pub epsilon: Option<f64>,
    pub max_scale: usize,
    pub alpha: f64,
    /// Every `stride`-th grid point enters the pairwise comparison.
    pub stride: usize,
}

impl Default for LineBenchmark {
    fn default() -> Self {
        Self { n: 500, epsilon: None, max_scale: 14, alpha: 0.5, stride: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct LineReport {
    pub positions: Vec<f64>,
    /// Diffusion EMD between the point mass at the midpoint and each grid indicator.
    pub midpoint_distances: Vec<f64>,
    pub monotone: bool,
    pub sample: Vec<usize>,
    /// Grid index pairs from `sample`, with exact and approximate distances in the same order.
    pub pairs: Vec<(usize, usize)>,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    pub spearman: f64,
    pub seconds: f64,
}

impl LineBenchmark {
    pub fn run(&self) -> Result<LineReport> {
        let n = self.n;
        if n < 4 {
            return Err(invalid_param("line benchmark needs at least 4 points"));
        }
        if self.stride == 0 || n / self.stride < 3 {
            return Err(invalid_param("stride leaves fewer than 3 sample points"));
        }
        let start = Instant::now();
        let line = generate_line_graph(n)?;
        let positions: Vec<f64> = (0..n).map(|i| line.point(i)[0]).collect();
        let epsilon = self.epsilon.unwrap_or((3.0 / (n - 1) as f64).powi(2));
        let op = GraphSpec::Gaussian { epsilon, truncation: None }.operator(&line)?;
        let mut measures = DMatrix::zeros(n, n + 1);
        for i in 0..n {
            measures[(i, i)] = 1.0;
        }
        if n % 2 == 0 {
            measures[(n / 2 - 1, n)] = 0.5;
            measures[(n / 2, n)] = 0.5;
        } else {
            measures[(n / 2, n)] = 1.0;
        }
        let dist = DistributionSet::from_measures(measures)?;
        let config = EmbedConfig {
            alpha: self.alpha,
            max_scale: self.max_scale,
            method: Method::ExactSpectral,
            ..EmbedConfig::default()
        };
        let out = embed_distributions(&op, &dist, &EmbedOptions::new(config))?;
        let bins = &out.embedding.bins;
        let l1 = |a: usize, b: usize| (bins.row(a) - bins.row(b)).abs().sum();
        let midpoint_distances: Vec<f64> = (0..n).map(|i| l1(n, i)).collect();
        let offsets: Vec<f64> = positions.iter().map(|x| (x - 0.5).abs()).collect();
        let monotone = strictly_increasing_by(&offsets, &midpoint_distances, 1e-12);

        let sample: Vec<usize> = (0..n).step_by(self.stride).collect();
        let mut pairs = Vec::new();
        let mut approx = Vec::new();
        let mut exact = Vec::new();
        for (a, &i) in sample.iter().enumerate() {
            for &j in &sample[a + 1..] {
                pairs.push((i, j));
                approx.push(l1(i, j));
                let mut mu = vec![0.0; n];
                let mut nu = vec![0.0; n];
                mu[i] = 1.0;
                nu[j] = 1.0;
                exact.push(exact_emd_1d(&positions, &mu, &nu)?);
            }
        }
        let spearman = crate::oracle::spearman_rho(&approx, &exact)?;
        Ok(LineReport {
            positions,
            midpoint_distances,
            monotone,
            sample,
            pairs,
            exact,
            approx,
            spearman,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Whether `values` strictly increases with `keys`, treating keys within `tie` of each other as one group.
pub fn strictly_increasing_by(keys: &[f64], values: &[f64], tie: f64) -> bool {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for &i in &order {
        if keys[i] - anchor > tie {
            anchor = keys[i];
            groups.push((values[i], values[i]));
        } else {
            let g = groups.last_mut().expect("anchor set");
            g.0 = g.0.min(values[i]);
            g.1 = g.1.max(values[i]);
        }
    }
    groups.windows(2).all(|w| w[0].1 < w[1].0)
}

/// Least-squares slope of `log(seconds)` against `log(n)`.
pub fn loglog_slope(samples: &[(usize, f64)]) -> Result<f64> {
    if samples.len() < 2 || samples.iter().any(|&(n, t)| n == 0 || !(t > 0.0)) {
        return Err(invalid_param("slope needs two or more positive samples"));
    }
    let xs: Vec<f64> = samples.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, t)| t.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid_param("slope needs distinct sizes"));
    }
    Ok(sxy / sxx)
}

/// Wall time of the Chebyshev engine from points to embedding on swiss rolls of growing size.
///
/// Sizes are timed round robin for `repeats` rounds and each keeps its best run.
pub fn chebyshev_scaling(
    sizes: &[usize],
    distributions: usize,
    k_neighbors: usize,
    cheb_order: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if distributions == 0 || sizes.iter().any(|&n| n < distributions) {
        return Err(invalid_param("every size must hold at least one point per distribution"));
    }
    let graph = GraphSpec::Knn { k: k_neighbors, bandwidth: BandwidthRule::default() };
    let cases = sizes
        .iter()
        .map(|&n| {
            let roll = generate_swiss_roll_with(&SwissRollConfig {
                distributions,
                points_per: n / distributions,
                seed,
                ..SwissRollConfig::default()
            })?;
            let options = EmbedOptions::new(EmbedConfig { cheb_order, ..EmbedConfig::for_nodes(n) });
            Ok((roll.points, options))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = vec![f64::INFINITY; sizes.len()];
    for _ in 0..repeats.max(1) {
        for ((points, options), best) in cases.iter().zip(&mut best) {
            let start = Instant::now();
            embed_point_cloud(points, &graph, options)?;
            *best = best.min(start.elapsed().as_secs_f64());
        }
    }
    Ok(sizes.iter().copied().zip(best).collect())
}
