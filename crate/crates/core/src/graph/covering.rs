//! Covering graphs, cyclic covers of cycles, lifted functions and the
//! Følner-type boundary ratios behind amenability.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use super::metric::{GraphMetric, MetricKind};
use super::{VertexSet, WeightedGraph};
use crate::error::{Error, Result};

/// A projection `p` from a cover graph onto a base graph.
#[derive(Debug, Clone)]
pub struct CoveringMap {
    base: WeightedGraph,
    cover: WeightedGraph,
    projection: Vec<usize>,
}

/// First covering axiom found to fail, in check order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoveringViolation {
    NotSurjective { base_vertex: usize },
    Measure { vertex: usize },
    NeighborBijection { vertex: usize },
    Weight { x: usize, y: usize },
    Disconnected,
}

impl CoveringMap {
    /// Wraps a projection without checking the covering axioms; see
    /// [`validate_covering`].
    pub fn from_parts(
        base: WeightedGraph,
        cover: WeightedGraph,
        projection: Vec<usize>,
    ) -> Result<Self> {
        if projection.len() != cover.len() {
            return Err(Error::DimensionMismatch {
                expected: cover.len(),
                got: projection.len(),
            });
        }
        if let Some(&bad) = projection.iter().find(|&&x| x >= base.len()) {
            return Err(Error::UnknownVertex(format!("#{bad}")));
        }
        Ok(CoveringMap {
            base,
            cover,
            projection,
        })
    }

    pub fn base(&self) -> &WeightedGraph {
        &self.base
    }

    pub fn cover(&self) -> &WeightedGraph {
        &self.cover
    }

    pub fn project(&self, x: usize) -> usize {
        self.projection[x]
    }

    pub fn projection(&self) -> &[usize] {
        &self.projection
    }

    /// `p^{-1}({x})`.
    pub fn fiber(&self, base_vertex: usize) -> VertexSet {
        VertexSet::new(
            self.cover.len(),
            (0..self.cover.len()).filter(|&y| self.projection[y] == base_vertex),
        )
    }

    /// Preimage of a base vertex set.
    pub fn preimage(&self, set: &VertexSet) -> VertexSet {
        VertexSet::new(
            self.cover.len(),
            (0..self.cover.len()).filter(|&y| set.contains(self.projection[y])),
        )
    }
}

/// Cyclic order of a cycle graph starting at vertex 0 and stepping to its
/// lower-indexed neighbor first.
fn cycle_order(g: &WeightedGraph) -> Result<Vec<usize>> {
    let n = g.len();
    if n < 3 || !g.is_connected() || (0..n).any(|x| g.neighbors(x).len() != 2) {
        return Err(Error::NotACycle);
    }
    let mut order = vec![0];
    let mut prev = 0;
    let mut cur = g.neighbors(0)[0].0;
    while cur != 0 {
        order.push(cur);
        let nb = g.neighbors(cur);
        let next = if nb[0].0 == prev { nb[1].0 } else { nb[0].0 };
        prev = cur;
        cur = next;
    }
    Ok(order)
}

/// The `k`-fold cyclic cover `C_{kn} -> C_n`, with cover vertex `j` mapped
/// to the `(j mod n)`-th vertex of the base cycle.
pub fn build_cyclic_cover(base: &WeightedGraph, k: usize) -> Result<CoveringMap> {
    if k == 0 {
        return Err(Error::InvalidFold(k));
    }
    let order = cycle_order(base)?;
    let n = order.len();
    let total = k * n;
    let projection: Vec<usize> = (0..total).map(|j| order[j % n]).collect();
    let ids = (0..total).map(|j| j.to_string()).collect();
    let measure = projection.iter().map(|&x| base.measure(x)).collect();
    let edges = (0..total).map(|j| {
        let next = (j + 1) % total;
        (j, next, base.weight(projection[j], projection[next]))
    });
    let cover = WeightedGraph::from_parts(ids, measure, edges)?;
    let map = CoveringMap::from_parts(base.clone(), cover, projection)?;
    debug_assert!(validate_covering(&map).is_ok());
    Ok(map)
}

/// Checks surjectivity, the measure axiom, neighbor bijectivity, the weight
/// axiom on neighbors, and connectivity of the cover, in that order.
pub fn validate_covering(c: &CoveringMap) -> std::result::Result<(), CoveringViolation> {
    let (base, cover) = (&c.base, &c.cover);
    let mut hit = vec![false; base.len()];
    for &x in &c.projection {
        hit[x] = true;
    }
    if let Some(base_vertex) = hit.iter().position(|h| !h) {
        return Err(CoveringViolation::NotSurjective { base_vertex });
    }
    for x in 0..cover.len() {
        if cover.measure(x) != base.measure(c.projection[x]) {
            return Err(CoveringViolation::Measure { vertex: x });
        }
    }
    for x in 0..cover.len() {
        let px = c.projection[x];
        let mut images: Vec<usize> = cover
            .neighbors(x)
            .iter()
            .map(|&(y, _)| c.projection[y])
            .collect();
        images.sort_unstable();
        let targets: Vec<usize> = base.neighbors(px).iter().map(|&(y, _)| y).collect();
        if images != targets {
            return Err(CoveringViolation::NeighborBijection { vertex: x });
        }
        for &(y, b) in cover.neighbors(x) {
            if b != base.weight(px, c.projection[y]) {
                return Err(CoveringViolation::Weight { x, y });
            }
        }
    }
    if !cover.is_connected() {
        return Err(CoveringViolation::Disconnected);
    }
    Ok(())
}

/// `φ ∘ p`.
pub fn lift_function<T: Clone>(c: &CoveringMap, phi: &[T]) -> Result<Vec<T>> {
    if phi.len() != c.base.len() {
        return Err(Error::DimensionMismatch {
            expected: c.base.len(),
            got: phi.len(),
        });
    }
    Ok(c.projection.iter().map(|&x| phi[x].clone()).collect())
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("weights are finite")
}

/// `b(Y, Y^c)` in exact arithmetic; every finite `f64` is a dyadic rational.
fn boundary_weight_exact(g: &WeightedGraph, set: &VertexSet) -> BigRational {
    let mut total = BigRational::zero();
    for x in set.iter() {
        for &(y, b) in g.neighbors(x) {
            if !set.contains(y) {
                total += exact(b);
            }
        }
    }
    total
}

fn measure_exact(g: &WeightedGraph, set: &VertexSet) -> BigRational {
    set.iter()
        .fold(BigRational::zero(), |acc, x| acc + exact(g.measure(x)))
}

/// `b(Y, Y^c) / m(Y)` computed exactly.
pub fn folner_ratio_exact(g: &WeightedGraph, set: &VertexSet) -> Result<BigRational> {
    if set.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(boundary_weight_exact(g, set) / measure_exact(g, set))
}

pub fn folner_ratio(g: &WeightedGraph, set: &VertexSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySubset);
    }
    let boundary: f64 = set
        .iter()
        .flat_map(|x| g.neighbors(x).iter().map(move |&(y, b)| (y, b)))
        .filter(|&(y, _)| !set.contains(y))
        .map(|(_, b)| b)
        .sum();
    Ok(boundary / g.measure_of(set.members()))
}

/// The enlarged set `Z = B_d(Y)` (combinatorial metric on the cover) and the
/// ratio `b(Z, Z^c) / m(Z ∩ p^{-1}({x1}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSets {
    pub z: VertexSet,
    pub fiber_hits: VertexSet,
    pub ratio: BigRational,
}

/// Builds `Z = B_d(Y)` inside the cover. The construction that drives the
/// ratio to zero along a Følner sequence takes `d` at least the base
/// diameter; smaller `d` is accepted.
pub fn lemma_sets(c: &CoveringMap, x1: usize, y: &VertexSet, d: usize) -> Result<LemmaSets> {
    if x1 >= c.base.len() {
        return Err(Error::UnknownVertex(format!("#{x1}")));
    }
    if y.is_empty() {
        return Err(Error::EmptySubset);
    }
    let metric = GraphMetric::new(&c.cover, MetricKind::Combinatorial);
    let z = metric.closed_neighbourhood(y, d as f64);
    let fiber_hits = VertexSet::new(
        c.cover.len(),
        z.iter().filter(|&v| c.projection[v] == x1),
    );
    if fiber_hits.is_empty() {
        return Err(Error::EmptyFiberIntersection);
    }
    let ratio = boundary_weight_exact(&c.cover, &z) / measure_exact(&c.cover, &fiber_hits);
    Ok(LemmaSets {
        z,
        fiber_hits,
        ratio,
    })
}

/// `p/q` as an exact rational, for comparisons in tests and reports.
pub fn rational(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}
