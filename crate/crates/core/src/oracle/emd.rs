use nalgebra::DMatrix;

use crate::error::{invalid_input, Error, Result};

/// Scale applied to probability masses before the integer flow solve.
pub const MASS_SCALE: f64 = 1e9;

const MASS_TOLERANCE: f64 = 1e-9;

/// Ground costs between the support points of two distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub costs: DMatrix<f64>,
    pub description: String,
}

impl CostMatrix {
    pub fn new(costs: DMatrix<f64>, description: impl Into<String>) -> Result<Self> {
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(invalid_input("costs must be finite and nonnegative"));
        }
        Ok(Self { costs, description: description.into() })
    }

    /// Euclidean distances between the rows of two coordinate matrices.
    pub fn euclidean(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(invalid_input("point sets have different dimensions"));
        }
        let costs = DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| (a.row(i) - b.row(j)).norm());
        Self::new(costs, "euclidean")
    }

    /// `|x_i - x_j|` on a common grid.
    pub fn absolute_difference(positions: &[f64]) -> Result<Self> {
        let n = positions.len();
        let costs = DMatrix::from_fn(n, n, |i, j| (positions[i] - positions[j]).abs());
        Self::new(costs, "absolute difference")
    }
}

/// Optimal transport cost between `mu` and `nu` by network simplex on integer-scaled masses.
pub fn exact_emd(mu: &[f64], nu: &[f64], costs: &CostMatrix) -> Result<f64> {
    let c = &costs.costs;
    if c.nrows() != mu.len() || c.ncols() != nu.len() {
        return Err(invalid_input(format!(
            "cost matrix is {}x{} but the distributions have {} and {} entries",
            c.nrows(),
            c.ncols(),
            mu.len(),
            nu.len()
        )));
    }
    check_distribution(mu, "source")?;
    check_distribution(nu, "target")?;
    let sources: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    let mut supply: Vec<i64> = sources.iter().map(|&i| (mu[i] * MASS_SCALE).round() as i64).collect();
    let mut demand: Vec<i64> = sinks.iter().map(|&j| (nu[j] * MASS_SCALE).round() as i64).collect();
    balance(&mut supply, &mut demand);

    let p = sources.len();
    let mut arcs = Vec::with_capacity(p * sinks.len());
    for (a, &i) in sources.iter().enumerate() {
        for (b, &j) in sinks.iter().enumerate() {
            arcs.push(Arc { source: a, target: p + b, cost: c[(i, j)] });
        }
    }
    let mut node_supply = supply;
    node_supply.extend(demand.iter().map(|d| -d));
    let flows = NetworkSimplex::new(node_supply, arcs.clone()).solve()?;
    let total: f64 = arcs.iter().zip(&flows).map(|(a, &f)| a.cost * f as f64).sum();
    Ok(total / MASS_SCALE)
}

fn check_distribution(x: &[f64], name: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid_input(format!("{name} masses must be finite and nonnegative")));
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(invalid_input(format!("{name} masses sum to {total}, not 1")));
    }
    Ok(())
}

/// Moves the rounding surplus onto the largest entry of the lighter side.
fn balance(supply: &mut [i64], demand: &mut [i64]) {
    let gap: i64 = supply.iter().sum::<i64>() - demand.iter().sum::<i64>();
    let (side, amount) = if gap > 0 { (demand, gap) } else { (supply, -gap) };
    if amount != 0 {
        let largest = (0..side.len()).max_by_key(|&i| (side[i], std::cmp::Reverse(i))).expect("nonempty");
        side[largest] += amount;
    }
}

/// Transport cost on a sorted grid: the integral of the absolute CDF difference.
pub fn exact_emd_1d(positions: &[f64], mu: &[f64], nu: &[f64]) -> Result<f64> {
    if positions.len() != mu.len() || positions.len() != nu.len() {
        return Err(invalid_input("positions and masses differ in length"));
    }
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(invalid_input("positions must be finite"));
    }
    if positions.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid_input("positions must be sorted in nondecreasing order"));
    }
    check_distribution(mu, "source")?;
    check_distribution(nu, "target")?;
    let mut gap = 0.0;
    let mut total = 0.0;
    for i in 0..positions.len().saturating_sub(1) {
        gap += mu[i] - nu[i];
        total += gap.abs() * (positions[i + 1] - positions[i]);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    source: usize,
    target: usize,
    cost: f64,
}

/// Primal network simplex on an uncapacitated network with a strongly feasible spanning tree.
struct NetworkSimplex {
    nodes: usize,
    arcs: Vec<Arc>,
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    upward: Vec<bool>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    real_arcs: usize,
    tolerance: f64,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    fn new(supply: Vec<i64>, mut arcs: Vec<Arc>) -> Self {
        let nodes = supply.len();
        let root = nodes;
        let real_arcs = arcs.len();
        let max_cost = arcs.iter().map(|a| a.cost).fold(0.0, f64::max);
        let artificial = (max_cost + 1.0) * (nodes as f64 + 1.0);
        let mut flow = vec![0i64; real_arcs];
        for (u, &s) in supply.iter().enumerate() {
            if s >= 0 {
                arcs.push(Arc { source: u, target: root, cost: 0.0 });
                flow.push(s);
            } else {
                arcs.push(Arc { source: root, target: u, cost: artificial });
                flow.push(-s);
            }
        }
        let mut in_tree = vec![false; arcs.len()];
        in_tree[real_arcs..].iter_mut().for_each(|t| *t = true);
        let mut simplex = Self {
            nodes,
            arcs,
            flow,
            in_tree,
            parent: vec![NONE; nodes + 1],
            pred: vec![NONE; nodes + 1],
            upward: vec![false; nodes + 1],
            depth: vec![0; nodes + 1],
            potential: vec![0.0; nodes + 1],
            real_arcs,
            tolerance: 1e-12 * (max_cost + 1.0),
        };
        simplex.rebuild_tree();
        simplex
    }

    /// Recomputes parents, depths and potentials from the tree arcs.
    fn rebuild_tree(&mut self) {
        let root = self.nodes;
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); self.nodes + 1];
        for (e, arc) in self.arcs.iter().enumerate() {
            if self.in_tree[e] {
                adjacency[arc.source].push(e);
                adjacency[arc.target].push(e);
            }
        }
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.depth[root] = 0;
        self.potential[root] = 0.0;
        let mut queue = std::collections::VecDeque::from([root]);
        let mut seen = vec![false; self.nodes + 1];
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for &e in &adjacency[u] {
                let arc = self.arcs[e];
                let v = if arc.source == u { arc.target } else { arc.source };
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                self.parent[v] = u;
                self.pred[v] = e;
                self.upward[v] = arc.source == v;
                self.depth[v] = self.depth[u] + 1;
                self.potential[v] = if self.upward[v] {
                    self.potential[u] - arc.cost
                } else {
                    self.potential[u] + arc.cost
                };
                queue.push_back(v);
            }
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let a = self.arcs[e];
        a.cost + self.potential[a.source] - self.potential[a.target]
    }

    /// Block-search pricing: the most negative reduced cost within the first block that has one.
    fn entering_arc(&self, start: &mut usize) -> Option<usize> {
        let total = self.arcs.len();
        let block = ((total as f64).sqrt().ceil() as usize).max(10);
        let mut best: Option<(f64, usize)> = None;
        let mut scanned = 0;
        let mut e = *start;
        while scanned < total {
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < -self.tolerance && best.is_none_or(|(b, _)| rc < b) {
                    best = Some((rc, e));
                }
            }
            scanned += 1;
            e = if e + 1 == total { 0 } else { e + 1 };
            if scanned % block == 0 && best.is_some() {
                break;
            }
        }
        *start = e;
        best.map(|(_, e)| e)
    }

    fn solve(mut self) -> Result<Vec<i64>> {
        let mut cursor = 0;
        let max_pivots = 50 * self.arcs.len() + 10_000;
        let mut pivots = 0;
        while let Some(entering) = self.entering_arc(&mut cursor) {
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Numerical { stage: "network simplex", detail: "pivot limit reached".into() });
            }
            self.pivot(entering);
        }
        if self.flow[self.real_arcs..].iter().any(|&f| f != 0) {
            return Err(Error::Numerical {
                stage: "network simplex",
                detail: "artificial arcs carry flow at optimality".into(),
            });
        }
        self.flow.truncate(self.real_arcs);
        Ok(self.flow)
    }

    fn pivot(&mut self, entering: usize) {
        let Arc { source: first, target: second, .. } = self.arcs[entering];
        let join = {
            let (mut u, mut v) = (first, second);
            while u != v {
                if self.depth[u] >= self.depth[v] {
                    u = self.parent[u];
                } else {
                    v = self.parent[v];
                }
            }
            u
        };
        let mut delta = i64::MAX;
        let mut leaving = NONE;
        let mut u = first;
        while u != join {
            if self.upward[u] && self.flow[self.pred[u]] < delta {
                delta = self.flow[self.pred[u]];
                leaving = self.pred[u];
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.upward[u] && self.flow[self.pred[u]] <= delta {
                delta = self.flow[self.pred[u]];
                leaving = self.pred[u];
            }
            u = self.parent[u];
        }
        debug_assert!(leaving != NONE, "uncapacitated cycle must be bounded by tree flows");
        if delta > 0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += if self.upward[u] { -delta } else { delta };
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += if self.upward[u] { delta } else { -delta };
                u = self.parent[u];
            }
        }
        self.in_tree[entering] = true;
        self.in_tree[leaving] = false;
        self.rebuild_tree();
    }
}
