//! Weighted graphs `(X, b, m)`: a finite vertex set with a positive vertex
//! measure `m` and a symmetric, non-negative edge weight `b` with zero
//! diagonal.
//!
//! Vertices are addressed by their position in the graph's vertex list;
//! string ids are kept for file I/O and reports.

pub mod covering;
pub mod io;
pub mod metric;

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use covering::{
    build_cyclic_cover, folner_ratio, folner_ratio_exact, lemma_sets, lift_function,
    validate_covering, CoveringMap, CoveringViolation, LemmaSets,
};
pub use metric::{
    covering_radius, distance, inradius, max_ball_volume, GraphMetric, MetricKind,
};

/// One vertex in a [`GraphSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub id: String,
    pub m: f64,
}

/// One undirected edge in a [`GraphSpec`]; each edge is listed once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    pub b: f64,
}

/// Serializable vertex/edge list description of a weighted graph.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    pub fn vertex(&mut self, id: impl Into<String>, m: f64) -> &mut Self {
        self.vertices.push(VertexSpec { id: id.into(), m });
        self
    }

    pub fn edge(&mut self, u: impl Into<String>, v: impl Into<String>, b: f64) -> &mut Self {
        self.edges.push(EdgeSpec {
            u: u.into(),
            v: v.into(),
            b,
        });
        self
    }
}

/// A validated finite weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    measure: Vec<f64>,
    // Positive-weight neighbors, sorted by vertex index.
    adj: Vec<Vec<(usize, f64)>>,
}

/// Builds a graph from a vertex/edge description.
///
/// Each undirected edge must appear once. An edge listed in both directions
/// is rejected: with equal weights as a duplicate, with different weights as
/// an asymmetric weight. Zero-weight edges are accepted and carry no
/// adjacency.
pub fn build_graph(spec: &GraphSpec) -> Result<WeightedGraph> {
    let mut ids = Vec::with_capacity(spec.vertices.len());
    let mut index = HashMap::with_capacity(spec.vertices.len());
    let mut measure = Vec::with_capacity(spec.vertices.len());
    for v in &spec.vertices {
        if !v.m.is_finite() {
            return Err(Error::InvalidWeight {
                what: format!("measure of `{}`", v.id),
                value: v.m,
            });
        }
        if v.m <= 0.0 {
            return Err(Error::NonPositiveMeasure(v.id.clone(), v.m));
        }
        if index.insert(v.id.clone(), ids.len()).is_some() {
            return Err(Error::DuplicateVertex(v.id.clone()));
        }
        ids.push(v.id.clone());
        measure.push(v.m);
    }

    let mut seen: HashMap<(usize, usize), (f64, bool)> = HashMap::new();
    let mut adj = vec![Vec::new(); ids.len()];
    for e in &spec.edges {
        let u = *index
            .get(&e.u)
            .ok_or_else(|| Error::UnknownVertex(e.u.clone()))?;
        let v = *index
            .get(&e.v)
            .ok_or_else(|| Error::UnknownVertex(e.v.clone()))?;
        if !e.b.is_finite() || e.b < 0.0 {
            return Err(Error::InvalidWeight {
                what: format!("edge `{}`-`{}`", e.u, e.v),
                value: e.b,
            });
        }
        if u == v {
            return Err(Error::SelfLoop(e.u.clone()));
        }
        let key = (u.min(v), u.max(v));
        let forward = u < v;
        if let Some(&(prev, prev_forward)) = seen.get(&key) {
            if prev != e.b {
                let (fw, bw) = if prev_forward { (prev, e.b) } else { (e.b, prev) };
                return Err(Error::NonSymmetricWeight {
                    u: ids[key.0].clone(),
                    v: ids[key.1].clone(),
                    forward: fw,
                    backward: bw,
                });
            }
            return Err(Error::DuplicateEdge(e.u.clone(), e.v.clone()));
        }
        seen.insert(key, (e.b, forward));
        if e.b > 0.0 {
            adj[u].push((v, e.b));
            adj[v].push((u, e.b));
        }
    }
    for row in &mut adj {
        row.sort_by_key(|&(j, _)| j);
    }
    Ok(WeightedGraph {
        ids,
        index,
        measure,
        adj,
    })
}

impl WeightedGraph {
    /// Builds a graph directly from indexed data. Edges are `(u, v, b)` with
    /// `u != v`, listed once.
    pub fn from_parts(
        ids: Vec<String>,
        measure: Vec<f64>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut spec = GraphSpec::default();
        for (id, m) in ids.iter().zip(&measure) {
            spec.vertex(id.clone(), *m);
        }
        for (u, v, b) in edges {
            let (Some(iu), Some(iv)) = (ids.get(u), ids.get(v)) else {
                return Err(Error::UnknownVertex(format!("#{}", u.max(v))));
            };
            spec.edge(iu.clone(), iv.clone(), b);
        }
        build_graph(&spec)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, x: usize) -> &str {
        &self.ids[x]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    /// `m(A)` for a vertex set.
    pub fn measure_of<'a>(&self, set: impl IntoIterator<Item = &'a usize>) -> f64 {
        set.into_iter().map(|&x| self.measure[x]).sum()
    }

    /// Neighbors `y` with `b(x, y) > 0`, sorted by index.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[x]
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        match self.adj[x].binary_search_by_key(&y, |&(j, _)| j) {
            Ok(k) => self.adj[x][k].1,
            Err(_) => 0.0,
        }
    }

    /// `Deg(x) = (1/m(x)) Σ_y b(x, y)`.
    pub fn degree(&self, x: usize) -> f64 {
        self.adj[x].iter().map(|&(_, b)| b).sum::<f64>() / self.measure[x]
    }

    /// `D_max = max_x Deg(x)`.
    pub fn max_degree(&self) -> f64 {
        (0..self.len()).map(|x| self.degree(x)).fold(0.0, f64::max)
    }

    /// Undirected positive-weight edges `(u, v, b)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, row)| {
            row.iter()
                .filter(move |&&(v, _)| v > u)
                .map(move |&(v, b)| (u, v, b))
        })
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self
                .ids
                .iter()
                .zip(&self.measure)
                .map(|(id, &m)| VertexSpec { id: id.clone(), m })
                .collect(),
            edges: self
                .edges()
                .map(|(u, v, b)| EdgeSpec {
                    u: self.ids[u].clone(),
                    v: self.ids[v].clone(),
                    b,
                })
                .collect(),
        }
    }

    /// Resolves vertex ids into a [`VertexSet`].
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<VertexSet> {
        let members = ids
            .iter()
            .map(|id| self.index_of(id.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(VertexSet::new(self.len(), members))
    }

    pub fn all_vertices(&self) -> VertexSet {
        VertexSet::new(self.len(), 0..self.len())
    }

    /// Connected components over positive-weight edges, as a component
    /// label per vertex.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.len()];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &self.adj[x] {
                    if label[y] == usize::MAX {
                        label[y] = count;
                        queue.push_back(y);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.len() <= 1 || self.components().0 == 1
    }
}

/// A subset of the vertices of a graph with `n` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl VertexSet {
    /// Indices `>= n` are ignored; duplicates collapse.
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = vec![false; n];
        for x in members {
            if x < n {
                mask[x] = true;
            }
        }
        Self::from_mask(mask)
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        let members = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        VertexSet { members, mask }
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Size of the ambient vertex set.
    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.mask.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet::from_mask(self.mask.iter().map(|b| !b).collect())
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// Standing-assumption diagnostics for a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub connected: bool,
    pub d_max: f64,
    pub sup_m: f64,
    pub inf_m: f64,
    pub sup_b: f64,
    /// Smallest positive edge weight; 0 when there are no edges.
    pub inf_positive_b: f64,
}

pub fn validate_assumptions(g: &WeightedGraph) -> AssumptionReport {
    let (mut sup_b, mut inf_b) = (0.0_f64, f64::INFINITY);
    for (_, _, b) in g.edges() {
        sup_b = sup_b.max(b);
        inf_b = inf_b.min(b);
    }
    AssumptionReport {
        connected: g.is_connected(),
        d_max: g.max_degree(),
        sup_m: g.measures().iter().copied().fold(0.0, f64::max),
        inf_m: g.measures().iter().copied().fold(f64::INFINITY, f64::min),
        sup_b,
        inf_positive_b: if inf_b.is_finite() { inf_b } else { 0.0 },
    }
}
