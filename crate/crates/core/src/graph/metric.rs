//! Combinatorial and length metrics, and the geometric functionals built on
//! them: covering radius, inradius and maximal ball volume.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{VertexSet, WeightedGraph};
use crate::error::{Error, Result};

/// Absolute tolerance for ball-membership comparisons, so that equal path
/// sums computed in different orders land on the same side of a radius.
pub const BALL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Hop count `d_comb`.
    Combinatorial,
    /// Shortest path with edge cost `1/b`, `d_L`.
    Length,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from a set of sources (multi-source search). Unreachable
/// vertices get `+inf`.
pub fn distances_from_set(
    g: &WeightedGraph,
    kind: MetricKind,
    sources: impl IntoIterator<Item = usize>,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.len()];
    match kind {
        MetricKind::Combinatorial => {
            let mut queue = VecDeque::new();
            for s in sources {
                if dist[s] != 0.0 {
                    dist[s] = 0.0;
                    queue.push_back(s);
                }
            }
            while let Some(x) = queue.pop_front() {
                for &(y, _) in g.neighbors(x) {
                    if dist[y].is_infinite() {
                        dist[y] = dist[x] + 1.0;
                        queue.push_back(y);
                    }
                }
            }
        }
        MetricKind::Length => {
            let mut heap = BinaryHeap::new();
            for s in sources {
                dist[s] = 0.0;
                heap.push(Entry(0.0, s));
            }
            while let Some(Entry(d, x)) = heap.pop() {
                if d > dist[x] {
                    continue;
                }
                for &(y, b) in g.neighbors(x) {
                    let nd = d + 1.0 / b;
                    if nd < dist[y] {
                        dist[y] = nd;
                        heap.push(Entry(nd, y));
                    }
                }
            }
        }
    }
    dist
}

/// All-pairs distance table of a graph under one metric.
#[derive(Debug, Clone)]
pub struct GraphMetric {
    kind: MetricKind,
    n: usize,
    table: Vec<f64>,
}

impl GraphMetric {
    pub fn new(g: &WeightedGraph, kind: MetricKind) -> Self {
        let n = g.len();
        let mut table = Vec::with_capacity(n * n);
        for x in 0..n {
            table.extend(distances_from_set(g, kind, [x]));
        }
        // Path sums accumulated from opposite ends can differ in the last bit.
        for x in 0..n {
            for y in x + 1..n {
                let d = table[x * n + y].min(table[y * n + x]);
                table[x * n + y] = d;
                table[y * n + x] = d;
            }
        }
        GraphMetric { kind, n, table }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.n..(x + 1) * self.n]
    }

    /// `dist(x, A) = min_{a in A} d(x, a)`; `+inf` for empty `A`.
    pub fn distance_to_set(&self, x: usize, set: &VertexSet) -> f64 {
        set.iter()
            .map(|a| self.distance(x, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Closed ball `B_r(x)`.
    pub fn closed_ball(&self, x: usize, r: f64) -> VertexSet {
        VertexSet::new(
            self.n,
            (0..self.n).filter(|&y| self.distance(x, y) <= r + BALL_TOL),
        )
    }

    /// Closed `r`-neighbourhood of a set, `∪_{y in Y} B_r(y)`.
    pub fn closed_neighbourhood(&self, set: &VertexSet, r: f64) -> VertexSet {
        VertexSet::new(
            self.n,
            (0..self.n).filter(|&x| self.distance_to_set(x, set) <= r + BALL_TOL),
        )
    }

    /// Open ball `U_r(x)`.
    pub fn open_ball(&self, x: usize, r: f64) -> VertexSet {
        VertexSet::new(
            self.n,
            (0..self.n).filter(|&y| self.distance(x, y) < r - BALL_TOL),
        )
    }

    pub fn covering_radius(&self, set: &VertexSet) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok((0..self.n)
            .map(|x| self.distance_to_set(x, set))
            .fold(0.0, f64::max))
    }

    /// `Inr(Ω) = max_{x in Ω} dist(x, X \ Ω)`: an open ball `U_r(x)` stays
    /// inside `Ω` exactly for `r <= dist(x, X \ Ω)`.
    pub fn inradius(&self, omega: &VertexSet) -> Result<f64> {
        if omega.is_empty() {
            return Ok(0.0);
        }
        let outside = omega.complement();
        if outside.is_empty() {
            return Err(Error::UnboundedInradius);
        }
        let r = omega
            .iter()
            .map(|x| self.distance_to_set(x, &outside))
            .fold(0.0, f64::max);
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::UnboundedInradius)
        }
    }

    /// `vol(r) = max_x m(B_r(x))`.
    pub fn max_ball_volume(&self, g: &WeightedGraph, r: f64) -> f64 {
        (0..self.n)
            .map(|x| {
                self.row(x)
                    .iter()
                    .zip(g.measures())
                    .filter(|(&d, _)| d <= r + BALL_TOL)
                    .map(|(_, &m)| m)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

fn check_vertex(g: &WeightedGraph, x: usize) -> Result<()> {
    if x < g.len() {
        Ok(())
    } else {
        Err(Error::UnknownVertex(format!("#{x}")))
    }
}

/// `d(x, y)` under the chosen metric; `+inf` when `x` and `y` lie in
/// different components.
pub fn distance(g: &WeightedGraph, kind: MetricKind, x: usize, y: usize) -> Result<f64> {
    check_vertex(g, x)?;
    check_vertex(g, y)?;
    Ok(distances_from_set(g, kind, [x])[y])
}

pub fn covering_radius(g: &WeightedGraph, kind: MetricKind, set: &VertexSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(distances_from_set(g, kind, set.iter())
        .into_iter()
        .fold(0.0, f64::max))
}

pub fn inradius(g: &WeightedGraph, kind: MetricKind, omega: &VertexSet) -> Result<f64> {
    GraphMetric::new(g, kind).inradius(omega)
}

pub fn max_ball_volume(g: &WeightedGraph, kind: MetricKind, r: f64) -> f64 {
    GraphMetric::new(g, kind).max_ball_volume(g, r)
}
