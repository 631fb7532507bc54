//! Canonical graph families and seeded random fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::metric::{distances_from_set, MetricKind};
use crate::graph::{VertexSet, WeightedGraph};

fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Path `P_n` on vertices `0..n`, `m = 1`, `b = 1`.
pub fn path(n: usize) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(Error::InvalidParams("path needs at least one vertex".into()));
    }
    WeightedGraph::from_parts(numbered(n), vec![1.0; n], (1..n).map(|i| (i - 1, i, 1.0)))
}

/// Cycle `C_n` on vertices `0..n` in cyclic order, `m = 1`, `b = 1`.
pub fn cycle(n: usize) -> Result<WeightedGraph> {
    if n < 3 {
        return Err(Error::InvalidParams(format!("cycle needs n >= 3, got {n}")));
    }
    WeightedGraph::from_parts(numbered(n), vec![1.0; n], (0..n).map(|i| (i, (i + 1) % n, 1.0)))
}

/// Discrete torus `C_p × C_q`; vertex `(i, j)` has id `"i_j"` and index
/// `i * q + j`.
pub fn torus(p: usize, q: usize) -> Result<WeightedGraph> {
    if p < 3 || q < 3 {
        return Err(Error::InvalidParams(format!("torus needs p, q >= 3, got {p}x{q}")));
    }
    let ids = (0..p)
        .flat_map(|i| (0..q).map(move |j| format!("{i}_{j}")))
        .collect();
    let idx = |i: usize, j: usize| (i % p) * q + (j % q);
    let edges = (0..p).flat_map(|i| {
        (0..q).flat_map(move |j| [(idx(i, j), idx(i + 1, j), 1.0), (idx(i, j), idx(i, j + 1), 1.0)])
    });
    WeightedGraph::from_parts(ids, vec![1.0; p * q], edges)
}

/// Vertices with even (or odd) index.
pub fn parity_subset(g: &WeightedGraph, even: bool) -> VertexSet {
    VertexSet::new(g.len(), (0..g.len()).filter(|x| (x % 2 == 0) == even))
}

/// Random connected graph: a random recursive tree plus independent extra
/// edges with probability `extra_edge_prob`; `b, m ~ U[0.5, 2]`.
pub fn random_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(Error::InvalidParams("empty graph".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measure = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    let mut present = vec![false; n * n];
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        present[u * n + v] = true;
        edges.push((u, v, rng.random_range(0.5..=2.0)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if !present[u * n + v] && rng.random_bool(extra_edge_prob) {
                edges.push((u, v, rng.random_range(0.5..=2.0)));
            }
        }
    }
    WeightedGraph::from_parts(numbered(n), measure, edges)
}

/// Grows a control set from a random seed vertex by repeatedly adding a
/// uniformly chosen vertex farther than `max_covering_radius` from the set,
/// until the covering radius is at most `max_covering_radius`.
pub fn grow_relatively_dense(
    g: &WeightedGraph,
    kind: MetricKind,
    max_covering_radius: f64,
    seed: u64,
) -> VertexSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = vec![rng.random_range(0..g.len())];
    loop {
        let dist = distances_from_set(g, kind, members.iter().copied());
        let far: Vec<usize> = (0..g.len())
            .filter(|&x| dist[x] > max_covering_radius)
            .collect();
        if far.is_empty() {
            return VertexSet::new(g.len(), members);
        }
        members.push(far[rng.random_range(0..far.len())]);
    }
}

/// One instance of the randomized verification corpus: a connected graph
/// with `n` in `[min_n, max_n]` and a proper control set with
/// `Covr^{d_L}(D) <= 2`.
pub fn corpus_instance(seed: u64, min_n: usize, max_n: usize) -> (WeightedGraph, VertexSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    loop {
        let n = rng.random_range(min_n..=max_n);
        let p = rng.random_range(0.0..=(3.0 / n as f64).min(1.0));
        let g = random_connected(n, p, rng.random()).expect("n >= 1");
        let d = grow_relatively_dense(&g, MetricKind::Length, 2.0, rng.random());
        if !d.is_full() {
            return (g, d);
        }
    }
}
