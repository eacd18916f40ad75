use diffusion_emd::graph::BandwidthRule;
use diffusion_emd::metric::pairwise_distances;
use diffusion_emd::multiscale::{EmbedConfig, Method};
use diffusion_emd::oracle::{generate_swiss_roll, spearman_rho, SwissRollConfig};
use diffusion_emd::pipeline::{
    chebyshev_scaling, embed_point_cloud, loglog_slope, strictly_increasing_by, swiss_roll_ground_truth,
    EmbedOptions, GraphSpec, LineBenchmark, SwissRollBenchmark,
};

fn knn() -> GraphSpec {
    GraphSpec::Knn { k: 8, bandwidth: BandwidthRule::default() }
}

#[test]
fn every_engine_runs_end_to_end() {
    let roll = generate_swiss_roll(8, 60, 4.0, 3).unwrap();
    assert!(knn().operator(&roll.points).unwrap().connectivity().is_connected());
    let base = EmbedConfig { max_scale: 9, cheb_order: 512, ..EmbedConfig::default() };
    let mut distances = Vec::new();
    for method in [Method::ExactSpectral, Method::Chebyshev, Method::Interpolative] {
        let mut options = EmbedOptions::new(EmbedConfig { method, ..base.clone() });
        options.gamma = Some(60);
        let out = embed_point_cloud(&roll.points, &knn(), &options).unwrap();
        assert_eq!(out.embedding.m(), 8);
        assert_eq!(out.timings[0].stage, "graph");
        assert!(out.total_seconds() >= 0.0);
        assert_eq!(out.spectral.is_some(), method != Method::Chebyshev);
        assert_eq!(out.profile.is_some(), method == Method::Interpolative);
        distances.push(pairwise_distances(&out.embedding).unwrap());
    }
    for d in &distances[1..] {
        let rho = spearman_rho(&distances[0].upper_triangle(), &d.upper_triangle()).unwrap();
        assert!(rho > 0.95, "rho = {rho}");
    }
}

#[test]
fn subsampled_run_keeps_fewer_centers() {
    let roll = generate_swiss_roll(10, 50, 1.0, 4).unwrap();
    let config = EmbedConfig { max_scale: 10, cheb_order: 1024, ..EmbedConfig::default() };
    let full = embed_point_cloud(&roll.points, &knn(), &EmbedOptions::new(config.clone())).unwrap();
    let mut options = EmbedOptions::new(config);
    options.subsample = true;
    let sub = embed_point_cloud(&roll.points, &knn(), &options).unwrap();
    assert_eq!(sub.stack.levels.len(), 6);
    assert!(sub.stack.center_count() * 5 <= 6 * 500);
    assert!(sub.timings.iter().any(|t| t.stage == "subsample"));
    let a = pairwise_distances(&full.embedding).unwrap();
    let b = pairwise_distances(&sub.embedding).unwrap();
    assert!(spearman_rho(&a.upper_triangle(), &b.upper_triangle()).unwrap() > 0.98);
}

#[test]
fn invalid_options_fail_early() {
    let roll = generate_swiss_roll(3, 10, 1.0, 5).unwrap();
    let bad = EmbedOptions::new(EmbedConfig { alpha: 0.9, ..EmbedConfig::default() });
    assert!(embed_point_cloud(&roll.points, &knn(), &bad).is_err());
    let graph = GraphSpec::Gaussian { epsilon: -1.0, truncation: None };
    assert!(embed_point_cloud(&roll.points, &graph, &EmbedOptions::new(EmbedConfig::default())).is_err());
}

#[test]
fn small_swiss_roll_benchmark() {
    let config = SwissRollConfig { distributions: 12, points_per: 25, seed: 6, ..SwissRollConfig::default() };
    let report = SwissRollBenchmark::standard(config).run().unwrap();
    assert_eq!(report.ground_truth.m(), 12);
    assert_eq!(report.methods.len(), 2);
    for method in &report.methods {
        assert!(method.spearman > 0.5, "{}: {}", method.label, method.spearman);
        assert!((0.0..=1.0).contains(&method.precision_at_10));
        assert!(method.centers > 0);
    }
}

#[test]
fn ground_truth_of_shifted_blobs() {
    let roll = generate_swiss_roll(3, 6, 0.0, 7).unwrap();
    let truth = swiss_roll_ground_truth(&roll).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expected = (roll.centers.row(i) - roll.centers.row(j)).norm();
            assert!((truth.values[(i, j)] - expected).abs() <= 1e-8 * (1.0 + expected));
        }
    }
}

#[test]
fn monotonicity_helper() {
    assert!(strictly_increasing_by(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], 1e-12));
    assert!(!strictly_increasing_by(&[0.0, 1.0, 2.0], &[1.0, 2.0, 2.0], 1e-12));
    assert!(strictly_increasing_by(&[2.0, 0.0, 1.0, 1.0], &[5.0, 0.0, 1.0, 1.5], 1e-12));
    assert!(!strictly_increasing_by(&[0.0, 1.0, 1.0, 2.0], &[0.0, 1.0, 3.0, 2.0], 1e-12));
}

#[test]
fn loglog_slope_recovers_power_laws() {
    let samples: Vec<(usize, f64)> = [100usize, 200, 400, 800].iter().map(|&n| (n, 3e-4 * (n as f64).powf(1.5))).collect();
    assert!((loglog_slope(&samples).unwrap() - 1.5).abs() < 1e-12);
    assert!(loglog_slope(&samples[..1]).is_err());
    assert!(loglog_slope(&[(10, 1.0), (10, 2.0)]).is_err());
    assert!(loglog_slope(&[(10, 0.0), (20, 2.0)]).is_err());
}

#[test]
fn scaling_sweep_reports_each_size() {
    let times = chebyshev_scaling(&[200, 400], 10, 5, 8, 1, 0).unwrap();
    assert_eq!(times.iter().map(|t| t.0).collect::<Vec<_>>(), vec![200, 400]);
    assert!(times.iter().all(|t| t.1 > 0.0));
    assert!(chebyshev_scaling(&[5], 10, 5, 8, 1, 0).is_err());
}

#[test]
fn line_benchmark_parameters_are_checked() {
    assert!(LineBenchmark { n: 3, ..LineBenchmark::default() }.run().is_err());
    assert!(LineBenchmark { n: 20, stride: 10, ..LineBenchmark::default() }.run().is_err());
    assert!(LineBenchmark { n: 20, stride: 0, ..LineBenchmark::default() }.run().is_err());
}

