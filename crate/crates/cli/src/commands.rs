use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use diffusion_emd::graph::{BandwidthRule, PointCloud};
use diffusion_emd::gradient::{finite_difference_check, GradientReport};
use diffusion_emd::io::{
    decode_matrix, encode_matrix, pair_records, read_points, write_distance_matrix, write_gradient_report,
    write_neighbors, write_pair_report, write_rank_profile, EmbeddingMetadata, NeighborRecord, PairRecord,
};
use diffusion_emd::metric::{pairwise_distances, KnnIndex};
use diffusion_emd::multiscale::{EmbedConfig, Method, MultiscaleEmbedding};
use diffusion_emd::oracle::SwissRollConfig;
use diffusion_emd::pipeline::{
    embed_point_cloud, BenchmarkMethod, EmbedOptions, GraphSpec, LineBenchmark, SwissRollBenchmark,
};

use crate::args::{
    DistancesArgs, EmbedArgs, EngineArgs, GradcheckArgs, GraphArgs, KnnArgs, LineArgs, SwissRollArgs,
};
use crate::error::{io_context, CliError, CliResult};
use crate::manifest::RunManifest;
use crate::settings::Settings;

/// Largest benchmark allowed without `--force`.
pub const BENCHMARK_GUARD: usize = 50_000;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_context(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_points(path: &Path) -> CliResult<PointCloud> {
    let file = File::open(path).map_err(|e| io_context(path, e))?;
    read_points(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn graph_spec(args: &GraphArgs, settings: &Settings, manifest: &mut RunManifest) -> CliResult<GraphSpec> {
    let knn = settings.get(args.knn, "knn")?;
    let epsilon = settings.get(args.epsilon, "epsilon")?;
    let truncate = settings.get(args.truncate, "truncate")?;
    let percentile = settings.get(args.percentile, "percentile")?;
    match (knn, epsilon) {
        (Some(_), Some(_)) => Err(CliError::Usage("--knn and --epsilon select different kernels; give one".into())),
        (_, Some(epsilon)) => {
            if percentile.is_some() {
                return Err(CliError::Usage("--percentile applies only to the kNN kernel".into()));
            }
            manifest.param("epsilon", epsilon);
            if let Some(t) = truncate {
                manifest.param("truncate", t);
            }
            Ok(GraphSpec::Gaussian { epsilon, truncation: truncate })
        }
        (knn, None) => {
            if truncate.is_some() {
                return Err(CliError::Usage("--truncate needs a dense kernel (--epsilon)".into()));
            }
            let k = knn.unwrap_or(10);
            let p = percentile.unwrap_or(1.0);
            manifest.param("knn", k);
            manifest.param("percentile", p);
            Ok(GraphSpec::Knn { k, bandwidth: BandwidthRule::Adaptive(p) })
        }
    }
}

fn engine_options(args: &EngineArgs, settings: &Settings, n: usize, manifest: &mut RunManifest) -> CliResult<EmbedOptions> {
    let defaults = EmbedConfig::for_nodes(n);
    let method: Method = settings.or(args.method.clone(), "method", defaults.method.to_string())?.parse()?;
    let config = EmbedConfig {
        alpha: settings.or(args.alpha, "alpha", defaults.alpha)?,
        max_scale: settings.or(args.max_scale, "max-scale", defaults.max_scale)?,
        cheb_order: settings.or(args.cheb_order, "cheb-order", defaults.cheb_order)?,
        n_scales_kept: settings.or(args.n_scales, "n-scales", defaults.n_scales_kept)?,
        rank_delta: settings.or(args.delta, "delta", defaults.rank_delta)?,
        method,
    };
    config.validate()?;
    let gamma = settings.get(args.gamma, "gamma")?;
    let subsample = settings.flag(args.subsample, "subsample")?;
    let seed = settings.or(args.seed, "seed", 0)?;
    manifest.param("method", config.method);
    manifest.param("alpha", config.alpha);
    manifest.param("max_scale", config.max_scale);
    manifest.param("cheb_order", config.cheb_order);
    manifest.param("n_scales", config.n_scales_kept);
    manifest.param("delta", config.rank_delta);
    manifest.param("gamma", gamma.unwrap_or((n / 10).max(1)));
    manifest.param("subsample", subsample);
    manifest.seed = Some(seed);
    Ok(EmbedOptions { config, gamma, subsample, spectral_rank: None, seed })
}

pub fn write_embedding(prefix: &Path, embedding: &MultiscaleEmbedding) -> CliResult<Vec<PathBuf>> {
    let bins = with_suffix(prefix, ".demd");
    let meta = with_suffix(prefix, ".meta");
    std::fs::write(&bins, encode_matrix(&embedding.bins)?).map_err(|e| io_context(&bins, e))?;
    std::fs::write(&meta, EmbeddingMetadata::of(embedding).to_text()).map_err(|e| io_context(&meta, e))?;
    Ok(vec![bins, meta])
}

pub fn read_embedding(prefix: &Path) -> CliResult<MultiscaleEmbedding> {
    let prefix = match prefix.extension().and_then(|e| e.to_str()) {
        Some("demd") | Some("meta") => prefix.with_extension(""),
        _ => prefix.to_path_buf(),
    };
    let bins_path = with_suffix(&prefix, ".demd");
    let meta_path = with_suffix(&prefix, ".meta");
    let bytes = std::fs::read(&bins_path).map_err(|e| io_context(&bins_path, e))?;
    let bins = decode_matrix(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", bins_path.display())))?;
    let text = std::fs::read_to_string(&meta_path).map_err(|e| io_context(&meta_path, e))?;
    let meta = EmbeddingMetadata::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", meta_path.display())))?;
    Ok(meta.into_embedding(bins)?)
}

pub fn embed(args: &EmbedArgs, settings: &Settings, mut manifest: RunManifest) -> CliResult<()> {
    let points = load_points(&args.input)?;
    manifest.inputs.push(args.input.clone());
    let graph = graph_spec(&args.graph, settings, &mut manifest)?;
    let options = engine_options(&args.engine, settings, points.len(), &mut manifest)?;
    let prefix = args.output.clone().unwrap_or_else(|| args.input.with_extension(""));
    let out = embed_point_cloud(&points, &graph, &options)?;
    for t in &out.timings {
        manifest.time(&t.stage, t.seconds);
    }
    manifest.outputs.extend(write_embedding(&prefix, &out.embedding)?);
    if let Some(profile) = &out.profile {
        let path = with_suffix(&prefix, ".ranks.csv");
        write_rank_profile(create(&path)?, profile)?;
        manifest.outputs.push(path);
    }
    manifest.param("centers", out.stack.center_count());
    manifest.write(&with_suffix(&prefix, ".manifest.json"))?;
    println!(
        "embedded {} distributions over {} nodes into {} bins ({:.3} s)",
        out.embedding.m(),
        points.len(),
        out.embedding.width(),
        out.total_seconds()
    );
    Ok(())
}

pub fn distances(args: &DistancesArgs, mut manifest: RunManifest) -> CliResult<()> {
    let embedding = read_embedding(&args.embedding)?;
    manifest.inputs.push(args.embedding.clone());
    let start = Instant::now();
    let dist = pairwise_distances(&embedding)?;
    manifest.time("distances", start.elapsed().as_secs_f64());
    write_distance_matrix(create(&args.output)?, &dist)?;
    manifest.outputs.push(args.output.clone());
    manifest.write(&with_suffix(&args.output, ".manifest.json"))
}

pub fn knn(args: &KnnArgs, settings: &Settings, mut manifest: RunManifest) -> CliResult<()> {
    let embedding = read_embedding(&args.embedding)?;
    manifest.inputs.push(args.embedding.clone());
    let k = settings.or(args.k, "k", 10)?;
    manifest.param("k", k);
    let start = Instant::now();
    let index = KnnIndex::new(&embedding);
    let mut rows = Vec::with_capacity(embedding.m() * k);
    for query in 0..embedding.m() {
        for (rank, (neighbor, distance)) in index.query(query, k)?.into_iter().enumerate() {
            rows.push(NeighborRecord { query, rank: rank + 1, neighbor, distance });
        }
    }
    manifest.time("knn", start.elapsed().as_secs_f64());
    write_neighbors(create(&args.output)?, &rows)?;
    manifest.outputs.push(args.output.clone());
    manifest.write(&with_suffix(&args.output, ".manifest.json"))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_context(dir, e))
}

pub fn benchmark_line(args: &LineArgs, settings: &Settings, mut manifest: RunManifest) -> CliResult<()> {
    let defaults = LineBenchmark::default();
    let bench = LineBenchmark {
        n: settings.or(args.n, "n", defaults.n)?,
        epsilon: settings.get(args.epsilon, "epsilon")?,
        max_scale: settings.or(args.max_scale, "max-scale", defaults.max_scale)?,
        alpha: settings.or(args.alpha, "alpha", defaults.alpha)?,
        stride: settings.or(args.stride, "stride", defaults.stride)?,
    };
    if bench.n > BENCHMARK_GUARD {
        return Err(CliError::Usage(format!("line benchmark limited to {BENCHMARK_GUARD} points")));
    }
    manifest.param("n", bench.n);
    manifest.param("max_scale", bench.max_scale);
    manifest.param("alpha", bench.alpha);
    manifest.param("stride", bench.stride);
    let report = bench.run()?;
    manifest.time("benchmark", report.seconds);
    create_dir(&args.output)?;

    let profile_path = args.output.join("line_profile.csv");
    let mut csv = csv::Writer::from_writer(create(&profile_path)?);
    csv.write_record(["position", "distance"]).map_err(|e| CliError::Input(e.to_string()))?;
    for (x, d) in report.positions.iter().zip(&report.midpoint_distances) {
        csv.write_record([x.to_string(), d.to_string()]).map_err(|e| CliError::Input(e.to_string()))?;
    }
    csv.flush().map_err(|e| io_context(&profile_path, e))?;

    let pairs: Vec<PairRecord> = report
        .pairs
        .iter()
        .zip(report.exact.iter().zip(&report.approx))
        .map(|(&(i, j), (&exact, &approx))| PairRecord { i, j, exact, approx })
        .collect();
    let pairs_path = args.output.join("line_pairs.csv");
    write_pair_report(create(&pairs_path)?, &pairs)?;

    let metrics_path = args.output.join("metrics.csv");
    let mut csv = csv::Writer::from_writer(create(&metrics_path)?);
    csv.write_record(["n", "monotone", "spearman", "seconds"]).map_err(|e| CliError::Input(e.to_string()))?;
    csv.write_record([
        bench.n.to_string(),
        report.monotone.to_string(),
        report.spearman.to_string(),
        report.seconds.to_string(),
    ])
    .map_err(|e| CliError::Input(e.to_string()))?;
    csv.flush().map_err(|e| io_context(&metrics_path, e))?;
    manifest.outputs.extend([profile_path, pairs_path, metrics_path]);
    manifest.write(&args.output.join("manifest.json"))?;
    println!("line n={} monotone={} spearman={:.4}", bench.n, report.monotone, report.spearman);
    Ok(())
}

pub fn benchmark_swiss_roll(args: &SwissRollArgs, settings: &Settings, mut manifest: RunManifest) -> CliResult<()> {
    let defaults = SwissRollConfig::default();
    let roll = SwissRollConfig {
        distributions: settings.or(args.m, "m", defaults.distributions)?,
        points_per: settings.or(args.per, "per", defaults.points_per)?,
        noise: settings.or(args.noise, "noise", defaults.noise)?,
        seed: settings.or(args.engine.seed, "seed", defaults.seed)?,
        ..defaults
    };
    let n = roll.distributions.saturating_mul(roll.points_per);
    if n > BENCHMARK_GUARD && !args.force {
        return Err(CliError::Usage(format!("{n} points exceed the {BENCHMARK_GUARD}-point guard; pass --force")));
    }
    manifest.param("m", roll.distributions);
    manifest.param("per", roll.points_per);
    manifest.param("noise", roll.noise);
    let graph = graph_spec(&args.graph, settings, &mut manifest)?;
    let base = engine_options(&args.engine, settings, n, &mut manifest)?;
    let labels = settings.or(args.methods.clone(), "methods", "chebyshev,id".to_string())?;
    manifest.param("methods", &labels);
    let methods = labels
        .split(',')
        .map(|label| {
            let method: Method = label.trim().parse()?;
            let mut options = base.clone();
            options.config.method = method;
            Ok(BenchmarkMethod { label: label.trim().to_string(), options })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = SwissRollBenchmark { roll, graph, methods }.run()?;
    manifest.time("ground_truth", report.ground_truth_seconds);
    manifest.time("graph", report.graph_seconds);
    create_dir(&args.output)?;
    let metrics_path = args.output.join("metrics.csv");
    let mut csv = csv::Writer::from_writer(create(&metrics_path)?);
    csv.write_record(["method", "p_at_10", "spearman", "seconds", "centers"])
        .map_err(|e| CliError::Input(e.to_string()))?;
    for r in &report.methods {
        manifest.time(&r.label, r.seconds);
        csv.write_record([
            r.label.clone(),
            r.precision_at_10.to_string(),
            r.spearman.to_string(),
            r.seconds.to_string(),
            r.centers.to_string(),
        ])
        .map_err(|e| CliError::Input(e.to_string()))?;
        let path = args.output.join(format!("pairs_{}.csv", r.label));
        write_pair_report(create(&path)?, &pair_records(&report.ground_truth, &r.distances)?)?;
        manifest.outputs.push(path);
        println!("{:<10} P@10 {:.3}  spearman {:.3}  {:.2} s", r.label, r.precision_at_10, r.spearman, r.seconds);
    }
    csv.flush().map_err(|e| io_context(&metrics_path, e))?;
    manifest.outputs.push(metrics_path);
    manifest.write(&args.output.join("manifest.json"))
}

pub fn gradcheck(args: &GradcheckArgs, settings: &Settings, mut manifest: RunManifest) -> CliResult<()> {
    let points = load_points(&args.input)?;
    manifest.inputs.push(args.input.clone());
    let config = EmbedConfig {
        alpha: settings.or(args.alpha, "alpha", 0.5)?,
        max_scale: settings.or(args.max_scale, "max-scale", 4)?,
        method: Method::ExactSpectral,
        ..EmbedConfig::default()
    };
    let step = settings.or(args.step, "step", 1e-5)?;
    let tolerance = settings.or(args.tolerance, "tolerance", 1e-4)?;
    manifest.param("epsilon", args.epsilon);
    manifest.param("alpha", config.alpha);
    manifest.param("max_scale", config.max_scale);
    manifest.param("step", step);
    manifest.param("tolerance", tolerance);
    manifest.param("pair", format!("{},{}", args.i, args.j));
    let options = EmbedOptions::new(config);
    let nodes: Vec<usize> = match args.node {
        Some(v) => vec![v],
        None => (0..points.len()).collect(),
    };
    let start = Instant::now();
    let reports: Vec<GradientReport> = nodes
        .iter()
        .map(|&v| finite_difference_check(&points, args.epsilon, &options, args.i, args.j, v, step))
        .collect::<Result<_, _>>()?;
    manifest.time("gradcheck", start.elapsed().as_secs_f64());
    write_gradient_report(create(&args.output)?, &reports)?;
    manifest.outputs.push(args.output.clone());
    let worst = reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
    manifest.param("max_relative_error", worst);
    manifest.write(&with_suffix(&args.output, ".manifest.json"))?;
    println!("max relative error {worst:.3e} over {} nodes (tolerance {tolerance:.1e})", reports.len());
    if worst <= tolerance {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("relative error {worst:.3e} exceeds {tolerance:.1e}")))
    }
}
