use diffusion_emd::multiscale::indicator_distributions;
use diffusion_emd::oracle::{
    average_ranks, exact_emd, exact_emd_1d, generate_line_graph, generate_swiss_roll, generate_swiss_roll_with,
    precision_at_k, roll_up, spearman_rho, spiral_arc_length, spiral_parameter, CostMatrix, SwissRollConfig,
};
use diffusion_emd::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < sparsity { 0.0 } else { rng.random() }).collect();
    if x.iter().all(|v| *v == 0.0) {
        x[0] = 1.0;
    }
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    x
}

#[test]
fn uniform_masses_match_best_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let n = 2 + trial % 5;
        let costs = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 10.0);
        let best = permutations(n)
            .into_iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| costs[(i, j)]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            / n as f64;
        let mass = vec![1.0 / n as f64; n];
        let got = exact_emd(&mass, &mass, &CostMatrix::new(costs, "random").unwrap()).unwrap();
        assert!((got - best).abs() < 1e-8, "trial {trial}: {got} vs {best}");
    }
}

#[test]
fn line_costs_match_cdf_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..60 {
        let n = 2 + trial % 30;
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0).collect();
        x.sort_by(f64::total_cmp);
        let mu = random_simplex(&mut rng, n, 0.3);
        let nu = random_simplex(&mut rng, n, 0.3);
        let reference = exact_emd_1d(&x, &mu, &nu).unwrap();
        let got = exact_emd(&mu, &nu, &CostMatrix::absolute_difference(&x).unwrap()).unwrap();
        assert!((got - reference).abs() < 1e-7, "trial {trial}: {got} vs {reference}");
    }
}

#[test]
fn rectangular_problem_with_point_masses() {
    let a = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 1.0]);
    let cost = CostMatrix::euclidean(&a, &b).unwrap();
    let got = exact_emd(&[1.0], &[0.25, 0.75], &cost).unwrap();
    assert!((got - (0.25 * 5.0 + 0.75)).abs() < 1e-9);
}

#[test]
fn identical_distributions_cost_nothing() {
    let x: Vec<f64> = (0..8).map(f64::from).collect();
    let mu = vec![0.125; 8];
    let d = exact_emd(&mu, &mu, &CostMatrix::absolute_difference(&x).unwrap()).unwrap();
    assert_eq!(d, 0.0);
}

#[test]
fn rejects_bad_inputs() {
    let cost = CostMatrix::absolute_difference(&[0.0, 1.0]).unwrap();
    assert!(matches!(exact_emd(&[0.5, 0.6], &[0.5, 0.5], &cost), Err(Error::InvalidInput(_))));
    assert!(matches!(exact_emd(&[1.0], &[0.5, 0.5], &cost), Err(Error::InvalidInput(_))));
    assert!(exact_emd_1d(&[1.0, 0.0], &[0.5, 0.5], &[1.0, 0.0]).is_err());
    assert!(CostMatrix::new(DMatrix::from_element(1, 1, f64::NAN), "nan").is_err());
}

#[test]
fn one_dimensional_known_value() {
    let d = exact_emd_1d(&[0.0, 1.0, 3.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
    assert_eq!(d, 3.0);
}

#[test]
fn spearman_handles_ties_and_constants() {
    assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    let rho = spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap();
    assert_eq!(rho, 1.0);
    let rho = spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
    assert_eq!(rho, -1.0);
    // ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4): r = 4.5 / sqrt(4.5 * 5)
    let rho = spearman_rho(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!((rho - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
    assert!(matches!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
}

#[test]
fn precision_counts_overlap() {
    let p = vec![vec![1, 2, 3], vec![0, 2, 3]];
    let t = vec![vec![2, 1, 4], vec![3, 4, 1]];
    assert!((precision_at_k(&p, &t, 2).unwrap() - 0.5).abs() < 1e-15);
    assert!(precision_at_k(&p, &t, 4).is_err());
    assert!(precision_at_k(&p, &t, 0).is_err());
}


/// Masses on a 1e-9 grid so that integer scaling inside the flow solver is exact.
fn quantized_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let units = 1_000_000_000u64;
    let mut cuts: Vec<u64> = (0..n - 1).map(|_| rng.random_range(0..=units)).collect();
    cuts.push(0);
    cuts.push(units);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| (w[1] - w[0]) as f64 / units as f64).collect()
}

#[test]
fn line_solver_agrees_with_flow_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..200 {
        let n = 2 + trial % 25;
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0..1000) as f64 / 64.0).collect();
        x.sort_by(f64::total_cmp);
        let mu = quantized_simplex(&mut rng, n);
        let nu = quantized_simplex(&mut rng, n);
        let closed = exact_emd_1d(&x, &mu, &nu).unwrap();
        let flow = exact_emd(&mu, &nu, &CostMatrix::absolute_difference(&x).unwrap()).unwrap();
        assert!((closed - flow).abs() <= 1e-10, "trial {trial}: {closed} vs {flow}");
    }
}

#[test]
fn three_point_instance() {
    let cost = CostMatrix::absolute_difference(&[0.0, 1.0, 2.0]).unwrap();
    let d = exact_emd(&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5], &cost).unwrap();
    assert!((d - 1.0).abs() < 1e-12);
    let d = exact_emd(&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &cost).unwrap();
    assert!((d - 1.0).abs() < 1e-12);
}

#[test]
fn point_masses_pay_their_cost() {
    let x = [0.0, 0.3, 2.5, 7.0];
    for a in 0..4 {
        for b in 0..4 {
            let mut mu = [0.0; 4];
            let mut nu = [0.0; 4];
            mu[a] = 1.0;
            nu[b] = 1.0;
            assert_eq!(exact_emd_1d(&x, &mu, &nu).unwrap(), (x[a] - x[b]).abs());
        }
    }
}

#[test]
fn spearman_textbook_case() {
    let rho = spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((rho - 0.8).abs() < 1e-15);
}

#[test]
fn average_ranks_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(2..30);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let brute: Vec<f64> = xs
            .iter()
            .map(|x| {
                let below = xs.iter().filter(|y| *y < x).count() as f64;
                let equal = xs.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect();
        assert_eq!(average_ranks(&xs), brute);
    }
}

#[test]
fn precision_extremes_and_chance_level() {
    let same = vec![(1..11).collect::<Vec<usize>>()];
    assert_eq!(precision_at_k(&same, &same, 10).unwrap(), 1.0);
    let other = vec![(11..21).collect::<Vec<usize>>()];
    assert_eq!(precision_at_k(&same, &other, 10).unwrap(), 0.0);
    let half = vec![(6..16).collect::<Vec<usize>>()];
    assert_eq!(precision_at_k(&same, &half, 10).unwrap(), 0.5);

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let shuffled = |rng: &mut ChaCha8Rng| {
        let mut v: Vec<usize> = (0..100).collect();
        for i in (1..100).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        v
    };
    let pred: Vec<Vec<usize>> = (0..1000).map(|_| shuffled(&mut rng)).collect();
    let truth: Vec<Vec<usize>> = (0..1000).map(|_| shuffled(&mut rng)).collect();
    let p = precision_at_k(&pred, &truth, 10).unwrap();
    assert!((p - 0.1).abs() <= 0.02, "p = {p}");
}

#[test]
fn noiseless_blobs_collapse() {
    let roll = generate_swiss_roll(4, 5, 0.0, 2).unwrap();
    for b in 0..4 {
        for p in 1..5 {
            assert_eq!(roll.points.point(b * 5 + p), roll.points.point(b * 5));
            assert_eq!(roll.unrolled.row(b * 5 + p), roll.centers.row(b));
        }
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    let mut sum = f(a) + f(b);
    for i in 1..steps {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn unrolled_coordinates_measure_geodesics() {
    let roll = generate_swiss_roll(6, 10, 1.0, 8).unwrap();
    for (i, j) in [(0, 59), (3, 17), (22, 40), (11, 12)] {
        let (si, sj) = (roll.unrolled[(i, 0)], roll.unrolled[(j, 0)]);
        let (ti, tj) = (spiral_parameter(si), spiral_parameter(sj));
        let arc = simpson(|t| (1.0 + t * t).sqrt(), ti.min(tj), ti.max(tj), 20_000);
        let dh = roll.unrolled[(i, 1)] - roll.unrolled[(j, 1)];
        let geodesic = (arc * arc + dh * dh).sqrt();
        let planar = ((si - sj).powi(2) + dh * dh).sqrt();
        assert!((geodesic - planar).abs() < 1e-8, "{geodesic} vs {planar}");
        let xyz = roll_up(si, roll.unrolled[(i, 1)]);
        assert_eq!(roll.points.point(i), &xyz[..]);
    }
    for s in [5.0, 20.0, 61.3] {
        assert!((spiral_arc_length(spiral_parameter(s)) - s).abs() < 1e-10);
    }
}

#[test]
fn generators_are_seeded() {
    let a = generate_swiss_roll(5, 7, 1.5, 9).unwrap();
    let b = generate_swiss_roll(5, 7, 1.5, 9).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.unrolled, b.unrolled);
    let c = generate_swiss_roll(5, 7, 1.5, 10).unwrap();
    assert_ne!(a.unrolled, c.unrolled);
    let config = SwissRollConfig { distributions: 3, points_per: 4, ambient_dim: 10, seed: 1, ..SwissRollConfig::default() };
    let high = generate_swiss_roll_with(&config).unwrap();
    assert_eq!(high.points.dim(), 10);
    let low = generate_swiss_roll_with(&SwissRollConfig { ambient_dim: 3, ..config.clone() }).unwrap();
    // a rotation preserves pairwise distances
    for (i, j) in [(0, 5), (2, 11), (7, 8)] {
        assert!((high.points.squared_distance(i, j) - low.points.squared_distance(i, j)).abs() < 1e-9);
    }
    assert!(generate_swiss_roll(0, 3, 1.0, 0).is_err());
    assert!(generate_swiss_roll_with(&SwissRollConfig { ambient_dim: 2, ..config }).is_err());
}

#[test]
fn line_graph_layout() {
    let two = generate_line_graph(2).unwrap();
    assert_eq!(two.point(0), &[0.0]);
    assert_eq!(two.point(1), &[1.0]);
    let line = generate_line_graph(11).unwrap();
    for i in 0..10 {
        assert!((line.point(i + 1)[0] - line.point(i)[0] - 0.1).abs() < 1e-15);
    }
    assert!(indicator_distributions(line.labels(), line.n_distributions()).is_ok());
    assert!(generate_line_graph(1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_is_symmetric_and_nonnegative(seed in 0u64..10_000, n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let cost = CostMatrix::euclidean(&pts, &pts).unwrap();
        let mu = random_simplex(&mut rng, n, 0.2);
        let nu = random_simplex(&mut rng, n, 0.2);
        let ab = exact_emd(&mu, &nu, &cost).unwrap();
        let ba = exact_emd(&nu, &mu, &cost).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-8);
    }

    #[test]
    fn transport_obeys_triangle_inequality(seed in 0u64..10_000, n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>());
        let cost = CostMatrix::euclidean(&pts, &pts).unwrap();
        let a = random_simplex(&mut rng, n, 0.0);
        let b = random_simplex(&mut rng, n, 0.0);
        let c = random_simplex(&mut rng, n, 0.0);
        let ab = exact_emd(&a, &b, &cost).unwrap();
        let bc = exact_emd(&b, &c, &cost).unwrap();
        let ac = exact_emd(&a, &c, &cost).unwrap();
        prop_assert!(ac <= ab + bc + 1e-8);
    }

    #[test]
    fn spearman_is_bounded(xs in prop::collection::vec(-100.0f64..100.0, 3..40)) {
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        if let Ok(r) = spearman_rho(&xs, &ys) {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
        if let Ok(r) = spearman_rho(&xs, &xs) {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
