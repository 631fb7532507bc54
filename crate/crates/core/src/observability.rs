//! Uncertainty-principle constants, weak observability constants and their
//! empirical verification, and exact final-time observability constants.
//!
//! The geometric inputs are the inradius of `Ω = X \ D` and the maximal
//! ball volume at that radius, both in the length metric `d_L`:
//!
//! * threshold `(Inr(Ω) vol(Inr(Ω)))^{-1}`;
//! * low-energy uncertainty bound `16 ‖H+1‖⁴ / (threshold - sup I)²`, valid
//!   for `sup I < threshold`;
//! * alternative bound `42 vol(Inr(Ω)) / inf m`, valid for
//!   `sup I <= inf m / (42 Inr(Ω) vol(Inr(Ω))²)`;
//! * weak observability `‖S_T φ‖ <= K ‖(S_· φ)|_D‖_{L_r(δT, T)} + α ‖φ‖`
//!   with `2λ = threshold`, `κ = 8 ‖H+1‖² Inr(Ω) vol(Inr(Ω))`,
//!   `K = κ / ((1-δ)T)^{1/r}` and `α = (κ+1) e^{-δλT}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::control::{gramian, hautus_obstruction, HAUTUS_TOL};
use crate::error::{Error, Result};
use crate::graph::{GraphMetric, MetricKind, VertexSet, WeightedGraph};
use crate::report::ext;
use crate::spectral::{EnergyInterval, RestrictedTrajectories, SpectralDecomposition};

/// Compression eigenvalues at or below this fraction of the largest one
/// count as zero.
pub const UP_SINGULAR_CUTOFF: f64 = 1e-12;

/// Smallest Gramian eigenvalue ratio for which [`exact_obs_constant`] is
/// trusted; the relative error of the result is about `ε / ratio`.
pub const OBS_RESOLUTION: f64 = 1e-13;

/// Geometric constants of a control set under one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    pub metric: MetricKind,
    #[serde(with = "ext")]
    pub covering_radius: f64,
    #[serde(with = "ext")]
    pub inradius: f64,
    /// `vol(Inr(Ω))`.
    #[serde(with = "ext")]
    pub ball_volume: f64,
}

impl Geometry {
    /// Requires `D` nonempty and proper.
    pub fn compute(g: &WeightedGraph, d: &VertexSet, metric: MetricKind) -> Result<Self> {
        check_proper(d)?;
        let table = GraphMetric::new(g, metric);
        let covering_radius = table.covering_radius(d)?;
        let inradius = table.inradius(&d.complement())?;
        Ok(Geometry {
            metric,
            covering_radius,
            inradius,
            ball_volume: table.max_ball_volume(g, inradius),
        })
    }

    /// `Inr(Ω) · vol(Inr(Ω))`.
    pub fn inr_vol(&self) -> f64 {
        self.inradius * self.ball_volume
    }

    pub fn threshold(&self) -> f64 {
        1.0 / self.inr_vol()
    }
}

fn check_proper(d: &VertexSet) -> Result<()> {
    if d.is_empty() {
        Err(Error::EmptySubset)
    } else if d.is_full() {
        Err(Error::FullSubset)
    } else {
        Ok(())
    }
}

/// Smallest `c` with `P_I <= c · P_I 1_D P_I` as quadratic forms.
///
/// Returns `0` when `P_I = 0` and `+inf` when some function in the range of
/// `P_I` vanishes on `D` (up to [`UP_SINGULAR_CUTOFF`]).
pub fn up_sharp_constant(sd: &SpectralDecomposition, d: &VertexSet, interval: &EnergyInterval) -> f64 {
    let idx = sd.indices_in(interval);
    if idx.is_empty() {
        return 0.0;
    }
    let basis = sd.restricted_basis(d);
    let cols = DMatrix::from_fn(basis.nrows(), idx.len(), |r, c| basis[(r, idx[c])]);
    let comp = cols.transpose() * cols;
    let eig = SymmetricEigen::new(comp).eigenvalues;
    let mu_max = eig.max();
    let mu_min = eig.min();
    if mu_max <= 0.0 || mu_min <= UP_SINGULAR_CUTOFF * mu_max {
        f64::INFINITY
    } else {
        1.0 / mu_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpReport {
    pub interval: EnergyInterval,
    #[serde(with = "ext")]
    pub sup_i: f64,
    pub geometry: Geometry,
    #[serde(with = "ext")]
    pub norm_h_plus_1: f64,
    #[serde(with = "ext")]
    pub threshold: f64,
    pub applicable: bool,
    /// `16 ‖H+1‖⁴ / (threshold − sup I)²`, when `sup I < threshold`.
    #[serde(with = "ext::option")]
    pub guaranteed_bound: Option<f64>,
    /// `inf m / (42 Inr vol²)`.
    #[serde(with = "ext")]
    pub volume_threshold: f64,
    pub volume_applicable: bool,
    /// `42 vol / inf m`, when `sup I <= volume_threshold`.
    #[serde(with = "ext::option")]
    pub volume_bound: Option<f64>,
    #[serde(with = "ext")]
    pub sharp_constant: f64,
}

impl UpReport {
    /// Every applicable bound dominates the sharp constant.
    pub fn consistent(&self) -> bool {
        self.guaranteed_bound.is_none_or(|b| self.sharp_constant <= b)
            && self.volume_bound.is_none_or(|b| self.sharp_constant <= b)
    }
}

/// Low-energy uncertainty bounds for `I` next to the sharp constant.
pub fn up_bounds(
    g: &WeightedGraph,
    sd: &SpectralDecomposition,
    d: &VertexSet,
    interval: &EnergyInterval,
) -> Result<UpReport> {
    let geometry = Geometry::compute(g, d, MetricKind::Length)?;
    Ok(up_report_with(g, sd, d, interval, geometry))
}

fn up_report_with(
    g: &WeightedGraph,
    sd: &SpectralDecomposition,
    d: &VertexSet,
    interval: &EnergyInterval,
    geometry: Geometry,
) -> UpReport {
    let sup_i = interval.sup();
    let norm = sd.op_norm_h_plus_1();
    let threshold = geometry.threshold();
    let applicable = sup_i < threshold;
    let guaranteed_bound = applicable.then(|| 16.0 * norm.powi(4) / (threshold - sup_i).powi(2));
    let inf_m = g.measures().iter().copied().fold(f64::INFINITY, f64::min);
    let volume_threshold =
        inf_m / (42.0 * geometry.inradius * geometry.ball_volume * geometry.ball_volume);
    let volume_applicable = sup_i <= volume_threshold;
    let volume_bound = volume_applicable.then(|| 42.0 * geometry.ball_volume / inf_m);
    UpReport {
        interval: *interval,
        sup_i,
        geometry,
        norm_h_plus_1: norm,
        threshold,
        applicable,
        guaranteed_bound,
        volume_threshold,
        volume_applicable,
        volume_bound,
        sharp_constant: up_sharp_constant(sd, d, interval),
    }
}

/// `sup I` grid for sweeps: each eigenvalue (group mean) and each midpoint
/// between consecutive ones. `P_I` is constant between these points.
pub fn sweep_grid(sd: &SpectralDecomposition) -> Vec<f64> {
    let reps: Vec<f64> = sd
        .groups()
        .iter()
        .map(|r| sd.eigenvalues()[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();
    let mut grid = Vec::with_capacity(2 * reps.len());
    for (k, &l) in reps.iter().enumerate() {
        grid.push(l);
        if let Some(&next) = reps.get(k + 1) {
            grid.push(0.5 * (l + next));
        }
    }
    grid
}

/// Uncertainty reports for `I = (-inf, s]` over [`sweep_grid`].
pub fn up_sweep(g: &WeightedGraph, sd: &SpectralDecomposition, d: &VertexSet) -> Result<Vec<UpReport>> {
    let geometry = Geometry::compute(g, d, MetricKind::Length)?;
    Ok(sweep_grid(sd)
        .into_iter()
        .map(|s| up_report_with(g, sd, d, &EnergyInterval::at_most(s), geometry))
        .collect())
}

/// Constants of the weak observability estimate at time `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakObsConstants {
    #[serde(with = "ext")]
    pub lambda: f64,
    #[serde(with = "ext")]
    pub kappa: f64,
    #[serde(rename = "K", with = "ext")]
    pub k: f64,
    #[serde(with = "ext")]
    pub alpha: f64,
    #[serde(rename = "T", with = "ext")]
    pub t: f64,
    #[serde(with = "ext")]
    pub delta: f64,
    #[serde(with = "ext")]
    pub r: f64,
    /// `None` when `D = X`.
    pub geometry: Option<Geometry>,
}

impl WeakObsConstants {
    /// Observation window `(δT, T)`.
    pub fn window(&self) -> (f64, f64) {
        (self.delta * self.t, self.t)
    }

    /// Hölder conjugate of `r`: the control cost index dual to this
    /// observation index.
    pub fn dual_index(&self) -> f64 {
        holder_conjugate(self.r)
    }
}

pub fn holder_conjugate(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

/// Weak observability constants for `(g, D)`.
///
/// For `D = X` the estimate holds with `K = 1/((1-δ)T)^{1/r}` and `α = 0`;
/// that case reports `λ = +inf` and `κ = 1`.
pub fn weak_obs_constants(
    g: &WeightedGraph,
    sd: &SpectralDecomposition,
    d: &VertexSet,
    t: f64,
    delta: f64,
    r: f64,
) -> Result<WeakObsConstants> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("T = {t}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParams(format!("delta = {delta}")));
    }
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidParams(format!("r = {r}")));
    }
    if d.is_empty() {
        return Err(Error::EmptySubset);
    }
    let time_factor = ((1.0 - delta) * t).powf(1.0 / r);
    if d.is_full() {
        return Ok(WeakObsConstants {
            lambda: f64::INFINITY,
            kappa: 1.0,
            k: 1.0 / time_factor,
            alpha: 0.0,
            t,
            delta,
            r,
            geometry: None,
        });
    }
    let geometry = Geometry::compute(g, d, MetricKind::Length)?;
    if !geometry.covering_radius.is_finite() {
        return Err(Error::NotRelativelyDense);
    }
    let lambda = 0.5 * geometry.threshold();
    let kappa = 8.0 * sd.op_norm_h_plus_1().powi(2) * geometry.inr_vol();
    Ok(WeakObsConstants {
        lambda,
        kappa,
        k: kappa / time_factor,
        alpha: (kappa + 1.0) * (-delta * lambda * t).exp(),
        t,
        delta,
        r,
        geometry: Some(geometry),
    })
}

/// Which test state produced a slack value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Probe {
    Eigenvector(usize),
    Dirac(usize),
    Random(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakObsVerification {
    #[serde(with = "ext")]
    pub min_slack: f64,
    pub worst: Probe,
    #[serde(skip)]
    pub worst_state: DVector<f64>,
    pub probes: usize,
    pub seed: u64,
}

/// `δ_x = 1/sqrt(m(x))` at `x`: unit norm in `ℓ²(X, m)`.
pub fn dirac(g: &WeightedGraph, x: usize) -> DVector<f64> {
    let mut v = DVector::zeros(g.len());
    v[x] = 1.0 / g.measure(x).sqrt();
    v
}

/// Unit vector drawn from stream `index` of `seed`.
pub fn random_unit_state(sd: &SpectralDecomposition, seed: u64, index: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    loop {
        let v = DVector::from_fn(sd.dim(), |_, _| StandardNormal.sample(&mut rng));
        let norm = sd.norm(&v);
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Evaluates `K ‖(S_· φ)|_D‖_{L_r(δT,T)} + α‖φ‖ - ‖S_T φ‖` over all
/// eigenvectors, all Dirac deltas and `samples` seeded random unit vectors,
/// and reports the minimum.
pub fn verify_weak_obs(
    sd: &SpectralDecomposition,
    d: &VertexSet,
    constants: &WeakObsConstants,
    samples: usize,
    seed: u64,
) -> Result<WeakObsVerification> {
    let g = sd.graph();
    let n = sd.dim();
    let mut probes = Vec::with_capacity(2 * n + samples);
    let mut coeffs = DMatrix::zeros(n, 2 * n + samples);
    let mut col = 0;
    for i in 0..n {
        probes.push(Probe::Eigenvector(i));
        coeffs[(i, col)] = 1.0;
        col += 1;
    }
    for x in 0..n {
        probes.push(Probe::Dirac(x));
        coeffs.set_column(col, &sd.coefficients(&dirac(g, x))?);
        col += 1;
    }
    for k in 0..samples {
        probes.push(Probe::Random(k));
        coeffs.set_column(col, &sd.coefficients(&random_unit_state(sd, seed, k))?);
        col += 1;
    }

    let (a, b) = constants.window();
    let decay: Vec<f64> = sd.eigenvalues().iter().map(|l| (-l * constants.t).exp()).collect();
    let traj = RestrictedTrajectories::from_coefficients(sd, d, coeffs.clone())?;
    let observed = traj.lr_norms(a, b, constants.r)?;

    let mut best = (f64::INFINITY, 0);
    for (j, obs) in observed.iter().enumerate() {
        let final_norm = coeffs
            .column(j)
            .iter()
            .zip(&decay)
            .map(|(ci, e)| (ci * e).powi(2))
            .sum::<f64>()
            .sqrt();
        let slack = constants.k * obs + constants.alpha * traj.initial_norms()[j] - final_norm;
        if slack < best.0 {
            best = (slack, j);
        }
    }
    let worst = probes[best.1];
    Ok(WeakObsVerification {
        min_slack: best.0,
        worst,
        worst_state: probe_state(sd, worst, seed),
        probes: probes.len(),
        seed,
    })
}

fn probe_state(sd: &SpectralDecomposition, probe: Probe, seed: u64) -> DVector<f64> {
    match probe {
        Probe::Eigenvector(i) => sd.eigenvector(i),
        Probe::Dirac(x) => dirac(sd.graph(), x),
        Probe::Random(k) => random_unit_state(sd, seed, k),
    }
}

/// Smallest `C` with `‖S_T φ‖ <= C (∫_0^T ‖(S_t φ)|_D‖² dt)^{1/2}` for all
/// `φ`. `+inf` exactly when some eigenfunction vanishes on `D`; an
/// observable pair whose Gramian is below [`OBS_RESOLUTION`] is an error.
pub fn exact_obs_constant(sd: &SpectralDecomposition, d: &VertexSet, t: f64) -> Result<f64> {
    if d.is_empty() || !hautus_obstruction(sd, d, HAUTUS_TOL).is_empty() {
        return Ok(f64::INFINITY);
    }
    let q = gramian(sd, d, t)?;
    let ratio = q.min_eigenvalue() / q.max_eigenvalue();
    let chol = (ratio > OBS_RESOLUTION)
        .then(|| q.coords().clone().cholesky())
        .flatten()
        .ok_or(Error::IllConditionedGramian { ratio })?;
    let l = chol.l();
    let n = sd.dim();
    let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| (-2.0 * sd.eigenvalue(i) * t).exp()));
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EigensolveFailure("singular Cholesky factor".into()))?;
    let b = &linv * a * linv.transpose();
    let b = (&b + b.transpose()) * 0.5;
    Ok(SymmetricEigen::new(b).eigenvalues.max().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::spectral::eigendecompose;

    fn c4() -> (WeightedGraph, SpectralDecomposition, VertexSet) {
        let g = families::cycle(4).unwrap();
        let sd = eigendecompose(&g).unwrap();
        (g, sd, VertexSet::new(4, [0, 2]))
    }

    #[test]
    fn sharp_constant_examples() {
        let (g, sd, d) = c4();
        let low = up_sharp_constant(&sd, &d, &EnergyInterval::at_most(0.1));
        assert!((low - 2.0).abs() < 1e-10);
        let all = g.all_vertices();
        assert!((up_sharp_constant(&sd, &all, &EnergyInterval::at_most(10.0)) - 1.0).abs() < 1e-10);
        let two = EnergyInterval::closed(2.0, 2.0).unwrap();
        assert!(up_sharp_constant(&sd, &d, &two).is_infinite());
        let none = EnergyInterval::closed(0.5, 1.5).unwrap();
        assert_eq!(up_sharp_constant(&sd, &d, &none), 0.0);
    }

    #[test]
    fn c4_guaranteed_bound() {
        let (g, sd, d) = c4();
        let rep = up_bounds(&g, &sd, &d, &EnergyInterval::at_most(0.1)).unwrap();
        assert_eq!(rep.geometry.inradius, 1.0);
        assert_eq!(rep.geometry.ball_volume, 3.0);
        assert!((rep.threshold - 1.0 / 3.0).abs() < 1e-15);
        let expected = 10000.0 / (7.0f64 / 30.0).powi(2);
        assert!((rep.guaranteed_bound.unwrap() / expected - 1.0).abs() < 1e-6);
        assert!(rep.consistent());

        let high = up_bounds(&g, &sd, &d, &EnergyInterval::at_most(0.5)).unwrap();
        assert!(!high.applicable && high.guaranteed_bound.is_none());

        assert_eq!(
            up_bounds(&g, &sd, &g.all_vertices(), &EnergyInterval::at_most(0.0)).unwrap_err(),
            Error::FullSubset
        );
        assert_eq!(
            up_bounds(&g, &sd, &VertexSet::new(4, []), &EnergyInterval::at_most(0.0))
                .unwrap_err(),
            Error::EmptySubset
        );
    }

    #[test]
    fn weak_obs_constants_c4() {
        let (g, sd, d) = c4();
        let c = weak_obs_constants(&g, &sd, &d, 6.0, 0.5, 1.0).unwrap();
        assert!((c.lambda - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.kappa - 600.0).abs() < 1e-9);
        assert!((c.k - 200.0).abs() < 1e-9);
        assert!((c.alpha - 601.0 * (-0.5f64).exp()).abs() < 1e-9);

        let c0 = weak_obs_constants(&g, &sd, &d, 6.0, 0.0, 2.0).unwrap();
        assert!((c0.alpha - (c0.kappa + 1.0)).abs() < 1e-12);

        let full = weak_obs_constants(&g, &sd, &g.all_vertices(), 4.0, 0.5, 2.0).unwrap();
        assert_eq!(full.alpha, 0.0);
        assert!((full.k - 1.0 / 2f64.sqrt()).abs() < 1e-15);

        let split = WeightedGraph::from_parts(
            (0..4).map(|i| i.to_string()).collect(),
            vec![1.0; 4],
            [(0, 1, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        let sd_split = eigendecompose(&split).unwrap();
        assert!(weak_obs_constants(&split, &sd_split, &VertexSet::new(4, [0]), 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn weak_obs_holds_on_c4() {
        let (g, sd, d) = c4();
        for (t, delta, r) in [(6.0, 0.5, 2.0), (0.5, 0.0, 1.0), (30.0, 0.5, f64::INFINITY)] {
            let c = weak_obs_constants(&g, &sd, &d, t, delta, r).unwrap();
            let v = verify_weak_obs(&sd, &d, &c, 200, 7).unwrap();
            assert!(v.min_slack >= -1e-9 * (c.k + c.alpha + 1.0), "{v:?}");
            assert_eq!(v.probes, 208);
        }
    }

    #[test]
    fn exact_obs_examples() {
        let single = families::path(1).unwrap();
        let sd = eigendecompose(&single).unwrap();
        let c = exact_obs_constant(&sd, &single.all_vertices(), 4.0).unwrap();
        assert!((c - 0.5).abs() < 1e-12);

        let (_, sd4, d) = c4();
        assert!(exact_obs_constant(&sd4, &d, 1.0).unwrap().is_infinite());

        let k2 = eigendecompose(&families::path(2).unwrap()).unwrap();
        let c = exact_obs_constant(&k2, &VertexSet::new(2, [0]), 1.0).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }
}
