//! Vantage-point tree for exact k-nearest-neighbor search in any metric space.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A finite set of items with a metric between them.
pub trait MetricSpace: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn distance(&self, a: usize, b: usize) -> f64;
}

const LEAF_SIZE: usize = 12;
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<usize>),
    Split { vantage: usize, radius: f64, inside: usize, outside: usize },
}

/// Index over the items of a [`MetricSpace`].
#[derive(Debug, Clone)]
pub struct VpTree {
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl VpTree {
    pub fn build<M: MetricSpace>(space: &M) -> Self {
        let mut items: Vec<usize> = (0..space.len()).collect();
        let mut nodes = Vec::new();
        let root = Self::build_node(space, &mut items, &mut nodes);
        Self { nodes, root }
    }

    fn build_node<M: MetricSpace>(space: &M, items: &mut [usize], nodes: &mut Vec<Node>) -> usize {
        if items.len() <= LEAF_SIZE {
            nodes.push(Node::Leaf(items.to_vec()));
            return nodes.len() - 1;
        }
        let vantage = items[0];
        let rest = &mut items[1..];
        let mut keyed: Vec<Candidate> = rest
            .iter()
            .map(|&i| Candidate { dist: space.distance(vantage, i), index: i })
            .collect();
        let mid = keyed.len() / 2;
        keyed.select_nth_unstable(mid);
        let radius = keyed[mid].dist;
        for (slot, c) in rest.iter_mut().zip(&keyed) {
            *slot = c.index;
        }
        let (inner, outer) = rest.split_at_mut(mid);
        let inside = Self::build_node(space, inner, nodes);
        let outside = Self::build_node(space, outer, nodes);
        nodes.push(Node::Split { vantage, radius, inside, outside });
        nodes.len() - 1
    }

    /// The `k` items nearest to item `query`, excluding `query` itself,
    /// sorted by distance with ties broken by lower index.
    pub fn knn<M: MetricSpace>(&self, space: &M, query: usize, k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(space, self.root, query, k, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist)).collect()
    }

    fn search<M: MetricSpace>(
        &self,
        space: &M,
        node: usize,
        query: usize,
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match &self.nodes[node] {
            Node::Leaf(items) => {
                for &i in items {
                    if i != query {
                        offer(heap, k, Candidate { dist: space.distance(query, i), index: i });
                    }
                }
            }
            Node::Split { vantage, radius, inside, outside } => {
                let d = space.distance(query, *vantage);
                if *vantage != query {
                    offer(heap, k, Candidate { dist: d, index: *vantage });
                }
                let order = if d < *radius { [*inside, *outside] } else { [*outside, *inside] };
                for child in order {
                    let bound = if child == *inside { d - radius } else { radius - d };
                    if bound <= bound_limit(heap, k) {
                        self.search(space, child, query, k, heap);
                    }
                }
            }
        }
    }
}

fn bound_limit(heap: &BinaryHeap<Candidate>, k: usize) -> f64 {
    if heap.len() < k {
        f64::INFINITY
    } else {
        let tau = heap.peek().map_or(f64::INFINITY, |c| c.dist);
        tau + PRUNE_SLACK * (1.0 + tau.abs())
    }
}

fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, c: Candidate) {
    if heap.len() < k {
        heap.push(c);
    } else if let Some(worst) = heap.peek() {
        if c < *worst {
            heap.pop();
            heap.push(c);
        }
    }
}

/// Exhaustive k-nearest-neighbor search with the same ordering contract as [`VpTree::knn`].
pub fn brute_force_knn<M: MetricSpace>(space: &M, query: usize, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<Candidate> = (0..space.len())
        .filter(|&i| i != query)
        .map(|i| Candidate { dist: space.distance(query, i), index: i })
        .collect();
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    all.select_nth_unstable(k - 1);
    all.truncate(k);
    all.sort();
    all.into_iter().map(|c| (c.index, c.dist)).collect()
}
