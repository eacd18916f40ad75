use std::collections::HashSet;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::metric::DistanceMatrix;

/// Ranks with ties sharing the mean of the positions they span, starting at 1.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(invalid_input("correlation inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(invalid_input("correlation inputs contain NaN"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Mean overlap fraction between the first `k` entries of paired neighbour lists.
pub fn precision_at_k(predicted: &[Vec<usize>], truth: &[Vec<usize>], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid_param("k must be positive"));
    }
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(invalid_input("neighbour list collections must be nonempty and equally long"));
    }
    let mut total = 0.0;
    for (p, t) in predicted.iter().zip(truth) {
        if p.len() < k || t.len() < k {
            return Err(invalid_param(format!("neighbour lists shorter than k = {k}")));
        }
        let truth_set: HashSet<usize> = t[..k].iter().copied().collect();
        let hits = p[..k].iter().collect::<HashSet<_>>().into_iter().filter(|i| truth_set.contains(i)).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / predicted.len() as f64)
}

/// Per-sample neighbour ordering, excluding the sample itself.
pub fn neighbor_lists(distances: &DistanceMatrix) -> Vec<Vec<usize>> {
    (0..distances.m()).map(|i| distances.ranking(i).into_iter().filter(|&j| j != i).collect()).collect()
}

/// Spearman correlation over the strict upper triangles of two distance matrices.
pub fn distance_correlation(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64> {
    if a.m() != b.m() {
        return Err(invalid_input("distance matrices differ in size"));
    }
    spearman_rho(&a.upper_triangle(), &b.upper_triangle())
}

/// Precision at `k` between the neighbour orderings of two distance matrices.
pub fn distance_precision(a: &DistanceMatrix, b: &DistanceMatrix, k: usize) -> Result<f64> {
    if a.m() != b.m() {
        return Err(invalid_input("distance matrices differ in size"));
    }
    precision_at_k(&neighbor_lists(a), &neighbor_lists(b), k)
}
