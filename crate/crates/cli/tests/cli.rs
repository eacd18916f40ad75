use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffusion_emd::io::{decode_matrix, read_distance_matrix, read_gradient_report, read_neighbors, read_rank_profile};
use tempfile::TempDir;

fn demd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demd"))
        .args(args)
        .env("DEMD_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Eight labelled clusters spread along a curve.
fn write_cloud(dir: &Path, m: usize, per: usize) -> PathBuf {
    let mut text = String::from("x,y,label\n");
    for l in 0..m {
        for p in 0..per {
            let t = l as f64 * 0.7 + p as f64 * 0.05;
            text.push_str(&format!("{},{},{l}\n", t.cos() * (1.0 + 0.1 * t), t.sin() * (1.0 + 0.1 * t)));
        }
    }
    let path = dir.join("cloud.csv");
    fs::write(&path, text).unwrap();
    path
}

fn embed(dir: &TempDir, extra: &[&str]) -> (Output, PathBuf) {
    let input = write_cloud(dir.path(), 8, 12);
    let prefix = dir.path().join("emb");
    let mut args = vec!["embed", "--input", s(&input), "--output", s(&prefix), "--knn", "6"];
    args.extend_from_slice(extra);
    (demd(&args), prefix)
}

#[test]
fn embed_distances_and_neighbors() {
    let dir = TempDir::new().unwrap();
    let (out, prefix) = embed(&dir, &["--max-scale", "8"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bins = decode_matrix(&fs::read(prefix.with_extension("demd")).unwrap()).unwrap();
    assert_eq!(bins.nrows(), 8);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("emb.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "embed");
    assert_eq!(manifest["workers"], 1);

    let csv = dir.path().join("d.csv");
    let out = demd(&["distances", "--embedding", s(&prefix), "--output", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let d = read_distance_matrix(fs::File::open(&csv).unwrap(), "x").unwrap();
    assert_eq!(d.m(), 8);
    assert!((0..8).all(|i| d.values[(i, i)] == 0.0));
    assert!(dir.path().join("d.csv.manifest.json").exists());

    let nn = dir.path().join("nn.csv");
    let meta = prefix.with_extension("meta");
    let out = demd(&["knn", "--embedding", s(&meta), "--k", "3", "--output", s(&nn)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_neighbors(fs::File::open(&nn).unwrap()).unwrap();
    assert_eq!(rows.len(), 24);
    assert_eq!(rows[0].rank, 1);
    for q in 0..8 {
        let first = rows.iter().find(|r| r.query == q && r.rank == 1).unwrap();
        let best = (0..8).filter(|&j| j != q).map(|j| d.values[(q, j)]).fold(f64::INFINITY, f64::min);
        assert_eq!(first.distance, best);
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let (out, prefix) = embed(&dir, &["--alpha", "0.7"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("demd: "));
    let (out, _) = embed(&dir, &["--epsilon", "0.1"]);
    assert_eq!(code(&out), 2);
    let (out, _) = embed(&dir, &["--method", "lanczos"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&demd(&["embed"])), 2);

    let (out, _) = embed(&dir, &[]);
    assert_eq!(code(&out), 0);
    let nn = dir.path().join("nn.csv");
    assert_eq!(code(&demd(&["knn", "--embedding", s(&prefix), "--k", "8", "--output", s(&nn)])), 2);
}

#[test]
fn input_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y\n1,2\n").unwrap();
    let out = demd(&["embed", "--input", s(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&demd(&["embed", "--input", s(&missing)])), 3);

    let (out, prefix) = embed(&dir, &[]);
    assert_eq!(code(&out), 0);
    let bins = prefix.with_extension("demd");
    let mut bytes = fs::read(&bins).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&bins, bytes).unwrap();
    let csv = dir.path().join("d.csv");
    assert_eq!(code(&demd(&["distances", "--embedding", s(&prefix), "--output", s(&csv)])), 3);
}

#[test]
fn id_engine_writes_rank_profile() {
    let dir = TempDir::new().unwrap();
    let (out, prefix) = embed(&dir, &["--method", "id", "--gamma", "40", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let profile = read_rank_profile(fs::File::open(dir.path().join("emb.ranks.csv")).unwrap()).unwrap();
    assert_eq!(profile.entries[0].basis_size, 96);
    let first = fs::read(prefix.with_extension("demd")).unwrap();
    let (out, _) = embed(&dir, &["--method", "id", "--gamma", "40", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(prefix.with_extension("demd")).unwrap(), first);
}

#[test]
fn subsampling_shrinks_the_embedding() {
    let dir = TempDir::new().unwrap();
    let (out, prefix) = embed(&dir, &["--method", "exact", "--max-scale", "10"]);
    assert_eq!(code(&out), 0);
    let full = decode_matrix(&fs::read(prefix.with_extension("demd")).unwrap()).unwrap();
    let (out, prefix) = embed(&dir, &["--method", "exact", "--max-scale", "10", "--subsample"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sub = decode_matrix(&fs::read(prefix.with_extension("demd")).unwrap()).unwrap();
    assert!(sub.ncols() < full.ncols());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(&config, "# engine\nmax_scale = 9\ncheb-order = 16\n").unwrap();
    let (out, _) = embed(&dir, &["--config", s(&config)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(dir.path().join("emb.manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(manifest["parameters"]["max_scale"], "9");
    assert_eq!(manifest["parameters"]["cheb_order"], "16");

    let (out, _) = embed(&dir, &["--config", s(&config), "--max-scale", "11"]);
    assert_eq!(code(&out), 0);
    let manifest = fs::read_to_string(dir.path().join("emb.manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(manifest["parameters"]["max_scale"], "11");

    fs::write(&config, "colour = blue\n").unwrap();
    let (out, _) = embed(&dir, &["--config", s(&config)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn line_benchmark_writes_reports() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("line");
    let out = demd(&["benchmark", "line", "--n", "60", "--stride", "3", "--output", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["line_profile.csv", "line_pairs.csv", "metrics.csv", "manifest.json"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
}

#[test]
fn swiss_roll_benchmark_and_guard() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("roll");
    let out = demd(&[
        "benchmark", "swiss-roll", "--m", "12", "--per", "15", "--methods", "chebyshev,exact", "--output", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("method,p_at_10,spearman,seconds,centers\n"));
    assert_eq!(metrics.lines().count(), 3);
    assert!(out_dir.join("pairs_chebyshev.csv").exists());

    let out = demd(&["benchmark", "swiss-roll", "--m", "700", "--per", "100", "--output", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
}

#[test]
fn gradcheck_passes_and_fails() {
    let dir = TempDir::new().unwrap();
    let input = write_cloud(dir.path(), 3, 8);
    let report = dir.path().join("grad.csv");
    let out = demd(&[
        "gradcheck", "--input", s(&input), "--epsilon", "0.3", "--i", "0", "--j", "1", "--node", "2", "--output",
        s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_gradient_report(fs::File::open(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].analytic.len(), 2);

    let out = demd(&[
        "gradcheck", "--input", s(&input), "--epsilon", "0.3", "--i", "0", "--j", "1", "--node", "2", "--step", "0.3",
        "--tolerance", "1e-12", "--output", s(&report),
    ]);
    assert_eq!(code(&out), 5);
    let out = demd(&[
        "gradcheck", "--input", s(&input), "--epsilon", "0.3", "--i", "0", "--j", "7", "--output", s(&report),
    ]);
    assert_eq!(code(&out), 2);
}
