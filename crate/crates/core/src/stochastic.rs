//! The continuous-time random walk generated by `-H`, Monte Carlo
//! Feynman–Kac estimates, and far-field leakage bounds for point masses.
//!
//! From `y` the walk waits an exponential time of rate `Deg(y)` and then
//! jumps to `z` with probability `b(y, z) / (m(y) Deg(y))`. Then
//! `(S_t f)(x) = E_x f(Z_t)`.

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::metric::{distances_from_set, MetricKind};
use crate::graph::{VertexSet, WeightedGraph};
use crate::observability::dirac;
use crate::report::{csv_string, ext, fmt_f64};
use crate::spectral::SpectralDecomposition;

/// Generator for stream `index` of `seed`. Streams never overlap, so path
/// `k` is the same whatever the order in which paths are drawn.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Jump kernels of a graph, precomputed for repeated sampling.
#[derive(Debug, Clone)]
pub struct Ctmc<'g> {
    graph: &'g WeightedGraph,
    kernels: Vec<Option<WeightedIndex<f64>>>,
}

impl<'g> Ctmc<'g> {
    pub fn new(graph: &'g WeightedGraph) -> Self {
        let kernels = (0..graph.len())
            .map(|x| WeightedIndex::new(graph.neighbors(x).iter().map(|&(_, b)| b)).ok())
            .collect();
        Ctmc { graph, kernels }
    }

    pub fn graph(&self) -> &WeightedGraph {
        self.graph
    }

    /// Holding time at `x` and the next state; `None` at an isolated
    /// vertex.
    pub fn step<R: Rng>(&self, x: usize, rng: &mut R) -> Option<(f64, usize)> {
        let kernel = self.kernels[x].as_ref()?;
        let u: f64 = rng.sample(Open01);
        let hold = -u.ln() / self.graph.degree(x);
        let y = self.graph.neighbors(x)[kernel.sample(rng)].0;
        Some((hold, y))
    }

    /// `Z_t` for a walk started at `x`.
    pub fn position_at<R: Rng>(&self, x: usize, t: f64, rng: &mut R) -> usize {
        let mut now = 0.0;
        let mut state = x;
        while let Some((hold, next)) = self.step(state, rng) {
            now += hold;
            if now > t {
                break;
            }
            state = next;
        }
        state
    }

    pub fn path<R: Rng>(&self, x0: usize, t_max: f64, rng: &mut R) -> CtmcPath {
        let mut jump_times = vec![0.0];
        let mut states = vec![x0];
        let mut now = 0.0;
        let mut state = x0;
        let constant = self.kernels[x0].is_none();
        while let Some((hold, next)) = self.step(state, rng) {
            now += hold;
            if now > t_max {
                break;
            }
            jump_times.push(now);
            states.push(next);
            state = next;
        }
        CtmcPath {
            jump_times,
            states,
            horizon: t_max,
            constant,
        }
    }
}

/// A walk on `[0, horizon]`: `states[k]` is occupied on
/// `[jump_times[k], jump_times[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtmcPath {
    #[serde(with = "ext::vec")]
    pub jump_times: Vec<f64>,
    pub states: Vec<usize>,
    #[serde(with = "ext")]
    pub horizon: f64,
    /// Started at an isolated vertex, so the walk never moves.
    pub constant: bool,
}

impl CtmcPath {
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&j| j <= t);
        self.states[k.max(1) - 1]
    }

    pub fn jumps(&self) -> usize {
        self.states.len() - 1
    }

    /// CSV with columns `jump_time, state` (vertex ids).
    pub fn to_csv(&self, g: &WeightedGraph) -> Result<String> {
        csv_string(
            &["jump_time", "state"],
            self.jump_times
                .iter()
                .zip(&self.states)
                .map(|(t, x)| vec![fmt_f64(*t), g.id(*x).to_string()]),
        )
    }
}

/// Path from stream 0 of `seed`.
pub fn sample_ctmc_path(g: &WeightedGraph, x0: usize, t_max: f64, seed: u64) -> Result<CtmcPath> {
    check_vertex(g, x0)?;
    if t_max.is_nan() || t_max < 0.0 {
        return Err(Error::NegativeTime(t_max));
    }
    Ok(Ctmc::new(g).path(x0, t_max, &mut stream_rng(seed, 0)))
}

fn check_vertex(g: &WeightedGraph, x: usize) -> Result<()> {
    if x >= g.len() {
        return Err(Error::UnknownVertex(x.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    #[serde(with = "ext")]
    pub mean: f64,
    #[serde(with = "ext")]
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error of samples, with compensated summation.
pub fn summarize(values: &[f64], seed: u64) -> McEstimate {
    let n = values.len();
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let stderr = if n > 1 {
        let ss = compensated_sum(values.iter().map(|v| (v - mean).powi(2)));
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean,
        stderr,
        n_samples: n,
        seed,
    }
}

/// Monte Carlo estimate of `(S_t f)(x) = E_x f(Z_t)`; path `k` uses stream
/// `k` of `seed`.
pub fn fk_estimate(
    g: &WeightedGraph,
    f: &DVector<f64>,
    t: f64,
    x: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_vertex(g, x)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: f.len(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidParams("no samples".into()));
    }
    let chain = Ctmc::new(g);
    let values: Vec<f64> = (0..n_samples)
        .map(|k| f[chain.position_at(x, t, &mut stream_rng(seed, k as u64))])
        .collect();
    Ok(summarize(&values, seed))
}

/// `P(Poisson(d t) >= n) = e^{-dt} Σ_{i>=n} (dt)^i / i!`.
///
/// Sums the tail directly when `n > dt` and the complementary head
/// otherwise; series stop once a term drops below `1e-18` of the sum.
pub fn erlang_tail(d_max: f64, t: f64, n: usize) -> f64 {
    let a = d_max * t;
    if n == 0 {
        return 1.0;
    }
    if a <= 0.0 {
        return 0.0;
    }
    let (head, tail) = poisson_split(a, n);
    if n as f64 > a {
        tail
    } else {
        1.0 - head
    }
}

/// `1 - erlang_tail(d_max, t, n)`.
pub fn erlang_head_probability(d_max: f64, t: f64, n: usize) -> f64 {
    let a = d_max * t;
    if n == 0 {
        0.0
    } else if a <= 0.0 {
        1.0
    } else {
        poisson_split(a, n).0
    }
}

/// `(P(N < n), P(N >= n))` for `N ~ Poisson(a)`. Weights are built by term
/// ratios outwards from the mode and normalized by their total, which
/// avoids evaluating `e^{-a}` on its own.
fn poisson_split(a: f64, n: usize) -> (f64, f64) {
    const CUTOFF: f64 = 1e-18;
    let mode = a.floor() as usize;
    let (mut head, mut tail) = (Vec::new(), Vec::new());
    let mut push = |i: usize, w: f64| if i < n { head.push(w) } else { tail.push(w) };

    let mut w = 1.0;
    let mut total = 1.0;
    push(mode, w);
    for i in (0..mode).rev() {
        w *= (i + 1) as f64 / a;
        total += w;
        push(i, w);
        if w < CUTOFF * total && i < n {
            break;
        }
    }
    w = 1.0;
    let mut i = mode;
    let mut tail_sum = if mode >= n { 1.0 } else { 0.0 };
    loop {
        i += 1;
        w *= a / i as f64;
        if w == 0.0 {
            break;
        }
        total += w;
        if i >= n {
            tail_sum += w;
        }
        push(i, w);
        if i >= n && w < CUTOFF * tail_sum && w < CUTOFF * total {
            break;
        }
    }
    let head = compensated_sum(head);
    let tail = compensated_sum(tail);
    let total = head + tail;
    (head / total, tail / total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarVertexSequence {
    /// `vertices[k]` is at combinatorial distance `>= k + 1` from `D`.
    pub vertices: Vec<usize>,
    /// First `n <= n_max` admitting no such vertex.
    pub stopped_at: Option<usize>,
    pub max_distance: usize,
}

/// For `n = 1, 2, …, n_max` the lowest-index vertex with
/// `d_comb(x, D) >= n`, stopping at the first `n` with none.
pub fn far_vertex_sequence(g: &WeightedGraph, d: &VertexSet, n_max: usize) -> Result<FarVertexSequence> {
    if d.is_empty() {
        return Err(Error::EmptySubset);
    }
    let dist = distances_from_set(g, MetricKind::Combinatorial, d.iter());
    let max_distance = dist
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, &b| a.max(b)) as usize;
    let mut vertices = Vec::new();
    for n in 1..=n_max {
        match dist.iter().position(|&v| v >= n as f64) {
            Some(x) => vertices.push(x),
            None => {
                return Ok(FarVertexSequence {
                    vertices,
                    stopped_at: Some(n),
                    max_distance,
                })
            }
        }
    }
    Ok(FarVertexSequence {
        vertices,
        stopped_at: None,
        max_distance,
    })
}

/// Slack allowed in both necessity inequalities.
pub const NECESSITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NecessityRow {
    #[serde(with = "ext")]
    pub t: f64,
    /// `‖S_t δ_x‖`.
    #[serde(with = "ext")]
    pub norm: f64,
    /// `e^{-Deg(x) t}`.
    #[serde(with = "ext")]
    pub lower_bound: f64,
    /// `‖(S_t δ_x)|_D‖²`.
    #[serde(with = "ext")]
    pub restricted_sq: f64,
    /// `erlang_tail(D_max, t, d_comb(x, D))`.
    #[serde(with = "ext")]
    pub erlang_bound: f64,
    #[serde(with = "ext")]
    pub lower_margin: f64,
    #[serde(with = "ext")]
    pub upper_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityReport {
    pub x: usize,
    #[serde(with = "ext")]
    pub degree: f64,
    #[serde(with = "ext")]
    pub d_max: f64,
    /// `d_comb(x, D)`.
    pub distance: usize,
    pub rows: Vec<NecessityRow>,
    pub passed: bool,
}

/// Evaluates `‖S_t δ_x‖ >= e^{-Deg(x) t}` and
/// `‖(S_t δ_x)|_D‖² <= erlang_tail(D_max, t, d_comb(x, D))` exactly
/// through the spectral decomposition, with slack [`NECESSITY_SLACK`].
pub fn necessity_bounds_check(
    sd: &SpectralDecomposition,
    d: &VertexSet,
    x: usize,
    t_grid: &[f64],
) -> Result<NecessityReport> {
    let g = sd.graph();
    check_vertex(g, x)?;
    if d.is_empty() {
        return Err(Error::EmptySubset);
    }
    let dist = distances_from_set(g, MetricKind::Combinatorial, d.iter())[x];
    if !dist.is_finite() {
        return Err(Error::NotRelativelyDense);
    }
    let distance = dist as usize;
    let degree = g.degree(x);
    let d_max = g.max_degree();
    let delta = dirac(g, x);
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let s = sd.semigroup_apply(t, &delta)?;
        let norm = sd.norm(&s);
        let restricted_sq = sd.restricted_norm(&s, d).powi(2);
        let lower_bound = (-degree * t).exp();
        let erlang_bound = erlang_tail(d_max, t, distance);
        let lower_margin = norm - lower_bound;
        let upper_margin = erlang_bound - restricted_sq;
        rows.push(NecessityRow {
            t,
            norm,
            lower_bound,
            restricted_sq,
            erlang_bound,
            lower_margin,
            upper_margin,
            passed: lower_margin >= -NECESSITY_SLACK && upper_margin >= -NECESSITY_SLACK,
        });
    }
    Ok(NecessityReport {
        x,
        degree,
        d_max,
        distance,
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::spectral::eigendecompose;

    #[test]
    fn erlang_examples() {
        assert_eq!(erlang_tail(2.0, 1.0, 0), 1.0);
        assert_eq!(erlang_tail(2.0, 0.0, 4), 0.0);
        let expected = 1.0 - 5.0 * (-2.0f64).exp();
        assert!((erlang_tail(2.0, 1.0, 3) - expected).abs() <= 1e-14);
        // Direct tail branch: e^{-2} 2^20/20! dominates.
        let lead = (-2.0f64).exp() * 2f64.powi(20) / (1..=20).map(|i| i as f64).product::<f64>();
        let tail = erlang_tail(2.0, 1.0, 20);
        assert!(tail > lead && tail < lead * 1.2);
    }

    #[test]
    fn erlang_monotone_and_complementary() {
        for &a in &[0.01, 0.5, 2.0, 7.5, 40.0] {
            let mut prev = 1.0;
            for n in 0..80 {
                let tail = erlang_tail(a, 1.0, n);
                assert!(tail <= prev + 1e-15, "a={a} n={n}");
                let sum = tail + erlang_head_probability(a, 1.0, n);
                assert!((sum - 1.0).abs() <= 1e-14, "a={a} n={n} {sum}");
                assert!(erlang_tail(a, 1.1, n) >= tail - 1e-15);
                prev = tail;
            }
        }
    }

    #[test]
    fn paths_replay_and_respect_adjacency() {
        let g = families::random_connected(9, 0.3, 4).unwrap();
        let p = sample_ctmc_path(&g, 3, 20.0, 11).unwrap();
        assert_eq!(p, sample_ctmc_path(&g, 3, 20.0, 11).unwrap());
        assert!(p.jumps() > 0);
        for w in p.states.windows(2) {
            assert!(g.weight(w[0], w[1]) > 0.0);
        }
        assert!(p.jump_times.windows(2).all(|w| w[1] > w[0]));
        assert!(*p.jump_times.last().unwrap() <= 20.0);
        assert_eq!(p.state_at(0.0), 3);
        assert_eq!(p.state_at(20.0), *p.states.last().unwrap());
        let csv = p.to_csv(&g).unwrap();
        assert_eq!(csv.lines().count(), p.states.len() + 1);
    }

    #[test]
    fn single_vertex_path_is_constant() {
        let g = families::path(1).unwrap();
        let p = sample_ctmc_path(&g, 0, 5.0, 1).unwrap();
        assert!(p.constant);
        assert_eq!(p.jumps(), 0);
    }

    #[test]
    fn k2_jump_count_is_poisson() {
        let g = families::path(2).unwrap();
        let chain = Ctmc::new(&g);
        let t = 1.5;
        let counts: Vec<f64> = (0..100_000u64)
            .map(|k| chain.path(0, t, &mut stream_rng(5, k)).jumps() as f64)
            .collect();
        let est = summarize(&counts, 5);
        assert!((est.mean - t).abs() <= 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn fk_trivial_cases() {
        let g = families::cycle(5).unwrap();
        let f = DVector::from_fn(5, |x, _| x as f64);
        let at_zero = fk_estimate(&g, &f, 0.0, 3, 100, 0).unwrap();
        assert_eq!((at_zero.mean, at_zero.stderr), (3.0, 0.0));
        let ones = fk_estimate(&g, &DVector::from_element(5, 1.0), 2.0, 1, 500, 9).unwrap();
        assert_eq!((ones.mean, ones.stderr), (1.0, 0.0));
        assert_eq!(ones.seed, 9);
    }

    #[test]
    fn fk_matches_k2_closed_form() {
        let g = families::path(2).unwrap();
        let f = DVector::from_vec(vec![1.0, 0.0]);
        let est = fk_estimate(&g, &f, 1.0, 0, 20_000, 3).unwrap();
        let exact = (1.0 + (-2.0f64).exp()) / 2.0;
        assert!((est.mean - exact).abs() <= 4.0 * est.stderr);
    }

    #[test]
    fn far_vertices() {
        let p = families::path(101).unwrap();
        let seq = far_vertex_sequence(&p, &VertexSet::new(101, [0]), 100).unwrap();
        assert_eq!(seq.vertices, (1..=100).collect::<Vec<_>>());
        assert_eq!(seq.stopped_at, None);

        let c8 = families::cycle(8).unwrap();
        let seq = far_vertex_sequence(&c8, &families::parity_subset(&c8, true), 5).unwrap();
        assert_eq!(seq.stopped_at, Some(2));
        assert_eq!(seq.max_distance, 1);
        assert!(far_vertex_sequence(&c8, &VertexSet::new(8, []), 3).is_err());
    }

    #[test]
    fn necessity_on_k2_and_path() {
        let g = families::path(2).unwrap();
        let sd = eigendecompose(&g).unwrap();
        let rep = necessity_bounds_check(&sd, &VertexSet::new(2, [1]), 0, &[0.0, 0.1, 1.0, 10.0]).unwrap();
        assert!(rep.passed);
        for row in &rep.rows {
            let closed = ((1.0 + (-4.0 * row.t).exp()) / 2.0).sqrt();
            assert!((row.norm - closed).abs() < 1e-14);
        }
        assert_eq!(rep.rows[0].restricted_sq, 0.0);

        let p = families::path(101).unwrap();
        let sd = eigendecompose(&p).unwrap();
        let rep = necessity_bounds_check(&sd, &VertexSet::new(101, [0]), 20, &[1.0]).unwrap();
        assert_eq!(rep.distance, 20);
        assert!(rep.passed, "{rep:?}");
    }
}
