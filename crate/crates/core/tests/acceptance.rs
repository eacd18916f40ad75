//! Acceptance gate: one line per criterion, nonzero exit when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use diffusion_emd::gradient::finite_difference_check;
use diffusion_emd::graph::{
    build_diffusion_operator, gaussian_affinity, knn_affinity, spectral_decompose, BandwidthRule, DiffusionOperator,
    PointCloud,
};
use diffusion_emd::lowrank::{interpolative_decomposition, randomized_id, subsample_embedding};
use diffusion_emd::metric::{pairwise_distances, DistanceMatrix};
use diffusion_emd::multiscale::{
    assemble_embedding, default_max_scale, diffuse_dyadic_chebyshev, diffuse_dyadic_exact, diffuse_dyadic_power,
    indicator_distributions, EmbedConfig, Method, ScaleStack,
};
use diffusion_emd::oracle::{
    distance_correlation, distance_precision, generate_swiss_roll_with, SwissRollConfig,
};
use diffusion_emd::pipeline::{
    chebyshev_scaling, embed_distributions, loglog_slope, swiss_roll_ground_truth, EmbedOptions, GraphSpec,
    LineBenchmark,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String), diffusion_emd::Error>;

struct Gate {
    failures: usize,
}

impl Gate {
    fn report(&mut self, name: &str, start: Instant, outcome: Outcome) {
        let seconds = start.elapsed().as_secs_f64();
        let (passed, detail) = match outcome {
            Ok(result) => result,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            self.failures += 1;
        }
        println!("{name}: {} ({detail}; {seconds:.1} s)", if passed { "PASS" } else { "FAIL" });
    }
}

fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::singletons(&DMatrix::from_fn(n, d, |_, _| rng.random::<f64>())).unwrap()
}

fn labelled_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, m: usize) -> PointCloud {
    let coords = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    PointCloud::new(&coords, (0..n).map(|i| i % m).collect()).unwrap()
}

fn dense_transition(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let q: Vec<f64> = (0..n).map(|i| k.row(i).sum()).collect();
    let kn = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (q[i] * q[j]));
    let deg: Vec<f64> = (0..n).map(|i| kn.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| kn[(i, j)] / deg[i])
}

fn max_gap(a: &ScaleStack, b: &ScaleStack) -> f64 {
    a.levels.iter().zip(&b.levels).map(|(x, y)| (&x.values - &y.values).abs().max()).fold(0.0, f64::max)
}

fn rho(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64, diffusion_emd::Error> {
    distance_correlation(a, b)
}

fn operator_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_p, mut worst_row) = (0.0f64, 0.0f64);
    for trial in 0..50 {
        let n = rng.random_range(20..=200);
        let d = rng.random_range(1..=4);
        let points = uniform_cloud(&mut rng, n, d);
        let kernel = if trial % 2 == 0 {
            gaussian_affinity(&points, rng.random_range(0.02..0.5), None)?
        } else {
            knn_affinity(&points, rng.random_range(3..15), BandwidthRule::default())?
        };
        let k = if trial % 2 == 0 {
            let eps = match kernel.bandwidth() {
                Some(diffusion_emd::graph::Bandwidth::Fixed(e)) => *e,
                other => panic!("unexpected bandwidth {other:?}"),
            };
            DMatrix::from_fn(n, n, |i, j| (-points.squared_distance(i, j) / eps).exp())
        } else {
            kernel.weights().to_dense()
        };
        let op = build_diffusion_operator(&kernel)?;
        let p = op.transition_dense();
        worst_p = worst_p.max((&p - dense_transition(&k)).abs().max());
        for i in 0..n {
            worst_row = worst_row.max((p.row(i).sum() - 1.0).abs());
        }
    }
    Ok((worst_p <= 1e-12 && worst_row <= 1e-10, format!("max |P - P_ref| {worst_p:.2e}, max row error {worst_row:.2e}")))
}

fn diffusion_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut power_gap, mut cheb_gap) = (0.0f64, 0.0f64);
    for trial in 0..6 {
        let n = rng.random_range(80..=200);
        let points = labelled_cloud(&mut rng, n, 2, 10);
        let op = if trial % 2 == 0 {
            build_diffusion_operator(&gaussian_affinity(&points, 0.02, None)?)?
        } else {
            build_diffusion_operator(&knn_affinity(&points, 8, BandwidthRule::default())?)?
        };
        let dist = indicator_distributions(points.labels(), 10)?;
        let k = 3 + trial % 6;
        let spec = spectral_decompose(&op, None, 1e-12)?;
        let exact = diffuse_dyadic_exact(&op, &spec, &dist, k)?;
        power_gap = power_gap.max(max_gap(&exact, &diffuse_dyadic_power(&op, &dist, k)?));
        cheb_gap = cheb_gap.max(max_gap(&exact, &diffuse_dyadic_chebyshev(&op, &dist, k, 1 << k)?));
    }
    Ok((power_gap <= 1e-8 && cheb_gap <= 1e-8, format!("exact vs power {power_gap:.2e}, Chebyshev J = 2^K vs exact {cheb_gap:.2e}")))
}

fn line_fidelity() -> Outcome {
    let report = LineBenchmark::default().run()?;
    Ok((
        report.monotone && report.spearman >= 0.99,
        format!(
            "monotone from midpoint over {} points: {}, rho over {} pairs {:.4}",
            report.positions.len(),
            report.monotone,
            report.pairs.len(),
            report.spearman
        ),
    ))
}

struct SwissRollRun {
    truth: DistanceMatrix,
    op: DiffusionOperator,
    labels: Vec<usize>,
    n: usize,
}

fn swiss_roll_setup() -> Result<SwissRollRun, diffusion_emd::Error> {
    let roll = generate_swiss_roll_with(&SwissRollConfig::default())?;
    let truth = swiss_roll_ground_truth(&roll)?;
    let op = GraphSpec::Knn { k: 10, bandwidth: BandwidthRule::default() }.operator(&roll.points)?;
    Ok(SwissRollRun { truth, op, labels: roll.points.labels().to_vec(), n: roll.points.len() })
}

fn chebyshev_benchmark(run: &SwissRollRun) -> Outcome {
    let dist = indicator_distributions(&run.labels, 100)?;
    let out = embed_distributions(&run.op, &dist, &EmbedOptions::new(EmbedConfig::for_nodes(run.n)))?;
    let d = pairwise_distances(&out.embedding)?;
    let p10 = distance_precision(&d, &run.truth, 10)?;
    let r = rho(&d, &run.truth)?;
    Ok((p10 >= 0.5 && r >= 0.7, format!("n {}, J 32, P@10 {p10:.3}, rho {r:.3}", run.n)))
}

fn engine_agreement(run: &SwissRollRun) -> Outcome {
    let dist = indicator_distributions(&run.labels, 100)?;
    let base = EmbedConfig::for_nodes(run.n);
    let k = base.max_scale;
    let reference_config = EmbedConfig { cheb_order: 1024, ..base.clone() };
    let reference = embed_distributions(&run.op, &dist, &EmbedOptions::new(reference_config))?;
    let reference_d = pairwise_distances(&reference.embedding)?;
    let id = embed_distributions(
        &run.op,
        &dist,
        &EmbedOptions::new(EmbedConfig { method: Method::Interpolative, rank_delta: 1e-6, ..base.clone() }),
    )?;
    let id_d = pairwise_distances(&id.embedding)?;
    let id_rho = rho(&id_d, &reference_d)?;
    let spectral = id.spectral.as_ref().expect("ID engine computes a spectrum");

    let top = reference.stack.top_scales(6);
    let top_d = pairwise_distances(&assemble_embedding(&top, base.alpha, k)?)?;
    let sub = subsample_embedding(&reference.stack, spectral, 1e-6, 6)?;
    let sub_d = pairwise_distances(&assemble_embedding(&sub, base.alpha, k)?)?;
    let sub_top_rho = rho(&sub_d, &top_d)?;
    let sub_all_rho = rho(&sub_d, &reference_d)?;
    let ratio = top.center_count() as f64 / sub.center_count() as f64;

    let cheb32 = embed_distributions(&run.op, &dist, &EmbedOptions::new(base))?;
    let cheb32_rho = rho(&id_d, &pairwise_distances(&cheb32.embedding)?)?;
    let truncation = (rho(&top_d, &run.truth)? - rho(&reference_d, &run.truth)?).abs();

    let passed = id_rho >= 0.95 && sub_top_rho >= 0.98 && sub_all_rho >= 0.98 && ratio >= 5.0;
    Ok((
        passed,
        format!(
            "ID vs Chebyshev J 1024 rho {id_rho:.4}; subsampled vs top-6 rho {sub_top_rho:.4}, vs all scales {sub_all_rho:.4}; \
             centers {} vs {} ({ratio:.0}x fewer); ID vs Chebyshev J 32 rho {cheb32_rho:.4}; top-6 truncation shifts rho by {truncation:.4}",
            sub.center_count(),
            top.center_count()
        ),
    ))
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn id_error_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (m, n, k) = (50, 80, 20);
    let (mut deterministic, mut randomized) = (0, 0);
    for trial in 0..100u64 {
        let g = |rng: &mut ChaCha8Rng, r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = if trial % 2 == 0 {
            g(&mut rng, m, n)
        } else {
            let decay = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |i, _| 0.7f64.powi(i as i32)));
            g(&mut rng, m, m).qr().q() * decay * g(&mut rng, m, n)
        };
        let sigma = singular_values(&a)[k];
        let bound = ((4 * k * (n - k) + 1) as f64).sqrt() * sigma;
        let err = |f: &diffusion_emd::lowrank::IdFactors| singular_values(&(f.reconstruction() - &a))[0];
        if err(&interpolative_decomposition(&a, k)?) <= bound {
            deterministic += 1;
        }
        if let Ok(f) = randomized_id(&a, k + 8, k, 5, trial) {
            if err(&f) <= bound {
                randomized += 1;
            }
        }
    }
    Ok((
        deterministic == 100 && randomized >= 96,
        format!("deterministic {deterministic}/100, randomized {randomized}/100 within the bound"),
    ))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(15..=50);
        let d = rng.random_range(1..=3);
        let m = rng.random_range(2..=4);
        let points = labelled_cloud(&mut rng, n, d, m);
        let eps = rng.random_range(0.1..0.4);
        let config = EmbedConfig { max_scale: rng.random_range(2..=5), method: Method::ExactSpectral, ..EmbedConfig::default() };
        let i = rng.random_range(0..m);
        let j = (i + rng.random_range(1..m)) % m;
        let v = (0..n).filter(|&x| x % m == i).nth(rng.random_range(0..n / m)).expect("node in group");
        let report = finite_difference_check(&points, eps, &EmbedOptions::new(config), i, j, v, 1e-5)?;
        worst = worst.max(report.max_relative_error);
    }
    Ok((worst <= 1e-4, format!("20 configurations, worst relative error {worst:.2e}")))
}

fn scaling() -> Outcome {
    let sizes = [1000, 2000, 4000, 8000];
    let times = chebyshev_scaling(&sizes, 50, 10, 32, 7, 8)?;
    let slope = loglog_slope(&times)?;
    let listed: Vec<String> = times.iter().map(|(n, t)| format!("{n}: {t:.3} s")).collect();
    Ok((slope <= 1.3, format!("log-log slope {slope:.3} [{}]", listed.join(", "))))
}

fn mixing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mix_tol = 1e-3;
    let mut worst = 0.0f64;
    let mut scales = Vec::new();
    let mut graphs = 0;
    while graphs < 10 {
        let n = rng.random_range(100..=300);
        let points = labelled_cloud(&mut rng, n, 2, 10);
        let op = build_diffusion_operator(&knn_affinity(&points, 8, BandwidthRule::default())?)?;
        if !op.connectivity().is_connected() {
            continue;
        }
        graphs += 1;
        let k = default_max_scale(&op, mix_tol)?;
        let spec = spectral_decompose(&op, None, 1e-12)?;
        let dist = indicator_distributions(points.labels(), 10)?;
        let stack = diffuse_dyadic_exact(&op, &spec, &dist, k)?;
        for col in stack.levels[k].values.column_iter() {
            worst = worst.max(col.max() - col.min());
        }
        scales.push(k);
    }
    Ok((worst <= 1e-2, format!("K per graph {scales:?}, worst spread {worst:.2e}")))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut gate = Gate { failures: 0 };
    let t = Instant::now();
    gate.report("criterion 1 operator correctness", t, operator_correctness());
    let t = Instant::now();
    gate.report("criterion 2 dyadic diffusion equivalence", t, diffusion_equivalence());
    let t = Instant::now();
    gate.report("criterion 3 line graph fidelity", t, line_fidelity());
    let t = Instant::now();
    match swiss_roll_setup() {
        Ok(run) => {
            println!("swiss roll ground truth and graph ready ({:.1} s)", t.elapsed().as_secs_f64());
            let t = Instant::now();
            gate.report("criterion 4 swiss roll benchmark", t, chebyshev_benchmark(&run));
            let t = Instant::now();
            gate.report("criterion 5 engine agreement", t, engine_agreement(&run));
        }
        Err(e) => {
            let detail = format!("setup error: {e}");
            gate.report("criterion 4 swiss roll benchmark", t, Ok((false, detail.clone())));
            gate.report("criterion 5 engine agreement", t, Ok((false, detail)));
        }
    }
    let t = Instant::now();
    gate.report("criterion 6 ID error bound", t, id_error_bound());
    let t = Instant::now();
    gate.report("criterion 7 gradient check", t, gradient_check());
    let t = Instant::now();
    gate.report("criterion 8 near-linear scaling", t, scaling());
    let t = Instant::now();
    gate.report("criterion 9 mixing scale", t, mixing());
    println!("acceptance: {} of 9 criteria failed", gate.failures);
    if gate.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
