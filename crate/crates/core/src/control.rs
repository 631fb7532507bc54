//! Controllability Gramians, minimal-energy control synthesis towards
//! `‖f(T)‖ <= α ‖f0‖`, Duhamel verification, Hautus obstructions and
//! periodic feedback stabilization.
//!
//! The controlled equation is `f' + H f = 1_D u`, `f(0) = f0`. With
//! `Q_T = ∫_0^T S_t 1_D S_t dt`, the synthesized control is
//! `u(τ) = 1_D S_{T-τ} η` with `η = -ν (I + ν Q_T)^{-1} S_T f0`, which gives
//! `f(T) = (I + ν Q_T)^{-1} S_T f0`. The scalar `ν >= 0` is the smallest one
//! meeting the target.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};
use crate::quadrature::{adaptive_simpson, adaptive_simpson_scalar, Acceptance, SIMPSON_REL_TOL};
use crate::report::{csv_string, ext, fmt_f64};
use crate::spectral::{RestrictedTrajectories, SpectralDecomposition};

/// Gramian eigenvalues at or below this fraction of the largest count as
/// zero.
pub const GRAMIAN_RANK_TOL: f64 = 1e-10;
/// Singular-value threshold for unobservable eigenfunctions.
pub const HAUTUS_TOL: f64 = 1e-10;
/// Sample count of a synthesized control on `[0, T]`.
pub const CONTROL_GRID_POINTS: usize = 512;
const MAX_TIGHTENING: usize = 16;
const MAX_BISECTIONS: usize = 200;

/// `Q_T` in eigen-coordinates:
/// `Q[i,j] = ⟨v_i, 1_D v_j⟩ (1 - e^{-(λ_i+λ_j)T}) / (λ_i+λ_j)`.
#[derive(Debug, Clone)]
pub struct Gramian {
    horizon: f64,
    coords: DMatrix<f64>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl Gramian {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.eigenvalues.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig.eigenvalues.max()
    }

    pub fn is_nonsingular(&self) -> bool {
        let max = self.max_eigenvalue();
        max > 0.0 && self.min_eigenvalue() > GRAMIAN_RANK_TOL * max
    }

    /// `Q_T` as a matrix acting on vertex values.
    pub fn vertex_matrix(&self, sd: &SpectralDecomposition) -> DMatrix<f64> {
        let v = sd.eigenvectors();
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(sd.graph().measures()));
        v * &self.coords * v.transpose() * m
    }
}

/// `(1 - e^{-sT}) / s`, equal to `T` at `s = 0`.
fn gamma(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        t
    } else {
        -(-s * t).exp_m1() / s
    }
}

pub fn gramian(sd: &SpectralDecomposition, d: &VertexSet, t: f64) -> Result<Gramian> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("T = {t}")));
    }
    if d.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(gramian_unchecked(sd, &sd.compression(d), t))
}

fn gramian_unchecked(sd: &SpectralDecomposition, compression: &DMatrix<f64>, t: f64) -> Gramian {
    let lam = sd.eigenvalues();
    let coords = DMatrix::from_fn(sd.dim(), sd.dim(), |i, j| {
        compression[(i, j)] * gamma(lam[i] + lam[j], t)
    });
    let eig = SymmetricEigen::new(coords.clone());
    Gramian {
        horizon: t,
        coords,
        eig,
    }
}

/// `u(τ)|_D = V_D (e^{-λ(T-τ)} ∘ η)`.
#[derive(Debug, Clone)]
struct ClosedForm {
    lambdas: Vec<f64>,
    rows: DMatrix<f64>,
    scaled_rows: DMatrix<f64>,
    eta: DVector<f64>,
}

/// A control supported on `D` over `[0, T]`: samples on a grid, and the
/// exact formula when the control was synthesized.
#[derive(Debug, Clone)]
pub struct ControlSignal {
    horizon: f64,
    support: VertexSet,
    weights: Vec<f64>,
    grid: Vec<f64>,
    samples: DMatrix<f64>,
    closed: Option<ClosedForm>,
}

impl ControlSignal {
    /// Piecewise-linear control from samples; `samples` has one row per
    /// vertex of `D` (in increasing index order) and one column per grid
    /// time. The grid must increase from `0` to `T`.
    pub fn sampled(
        g: &WeightedGraph,
        support: VertexSet,
        grid: Vec<f64>,
        samples: DMatrix<f64>,
    ) -> Result<Self> {
        if grid.len() < 2 || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("control grid must increase from 0".into()));
        }
        if support.universe() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                got: support.universe(),
            });
        }
        if samples.nrows() != support.len() || samples.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len() * grid.len(),
                got: samples.nrows() * samples.ncols(),
            });
        }
        Ok(ControlSignal {
            horizon: *grid.last().expect("nonempty"),
            weights: support.iter().map(|x| g.measure(x)).collect(),
            support,
            grid,
            samples,
            closed: None,
        })
    }

    /// The zero control on `D` over `[0, T]`.
    pub fn zero(g: &WeightedGraph, support: VertexSet, t: f64) -> Result<Self> {
        let grid = uniform_grid(t);
        let samples = DMatrix::zeros(support.len(), grid.len());
        Self::sampled(g, support, grid, samples)
    }

    fn closed_form(sd: &SpectralDecomposition, support: VertexSet, t: f64, eta: DVector<f64>) -> Self {
        let v = sd.eigenvectors();
        let rows = DMatrix::from_fn(support.len(), sd.dim(), |r, i| v[(support.members()[r], i)]);
        let closed = ClosedForm {
            lambdas: sd.eigenvalues().to_vec(),
            rows,
            scaled_rows: sd.restricted_basis(&support),
            eta,
        };
        let grid = uniform_grid(t);
        let mut samples = DMatrix::zeros(support.len(), grid.len());
        for (k, &tau) in grid.iter().enumerate() {
            samples.set_column(k, &closed.eval(t, tau));
        }
        ControlSignal {
            horizon: t,
            weights: support.iter().map(|x| sd.graph().measure(x)).collect(),
            support,
            grid,
            samples,
            closed: Some(closed),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn support(&self) -> &VertexSet {
        &self.support
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    /// `η` in eigen-coordinates when the closed form is known.
    pub fn eta(&self) -> Option<&DVector<f64>> {
        self.closed.as_ref().map(|c| &c.eta)
    }

    /// `u(τ)` on `D`, exact if known, otherwise linearly interpolated.
    pub fn eval(&self, tau: f64) -> DVector<f64> {
        if let Some(c) = &self.closed {
            return c.eval(self.horizon, tau);
        }
        let tau = tau.clamp(0.0, self.horizon);
        let k = self.grid.partition_point(|&s| s <= tau).clamp(1, self.grid.len() - 1);
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let w = (tau - t0) / (t1 - t0);
        self.samples.column(k - 1) * (1.0 - w) + self.samples.column(k) * w
    }

    /// `u(τ)` as a vertex function, zero off `D`.
    pub fn eval_full(&self, tau: f64) -> DVector<f64> {
        let on_d = self.eval(tau);
        let mut out = DVector::zeros(self.support.universe());
        for (r, x) in self.support.iter().enumerate() {
            out[x] = on_d[r];
        }
        out
    }

    fn pointwise_norm(&self, u: &DVector<f64>) -> f64 {
        u.iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `‖τ ↦ ‖u(τ)‖_{ℓ²(D,m)}‖_{L_r(0,T)}`.
    pub fn lr_norm(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 1.0 {
            return Err(Error::InvalidParams(format!("norm index r = {r}")));
        }
        if let Some(c) = &self.closed {
            // τ ↦ ‖u(τ)‖ is the restricted trajectory of η run backwards.
            let traj = RestrictedTrajectories::from_raw(
                c.lambdas.clone(),
                c.scaled_rows.clone(),
                DMatrix::from_column_slice(c.eta.len(), 1, c.eta.as_slice()),
            );
            return Ok(traj.lr_norms(0.0, self.horizon, r)?[0]);
        }
        let node_norms: Vec<f64> = self
            .samples
            .column_iter()
            .map(|col| self.pointwise_norm(&col.into_owned()))
            .collect();
        let peak = node_norms.iter().copied().fold(0.0, f64::max);
        if r.is_infinite() || peak == 0.0 {
            // The norm of an affine path is convex, so cell maxima sit on nodes.
            return Ok(peak);
        }
        let mut total = 0.0;
        for k in 1..self.grid.len() {
            let (a, b) = (self.grid[k - 1], self.grid[k]);
            let floor = 1e-15 * peak.powf(r) * (b - a);
            total += adaptive_simpson_scalar(
                |t| self.pointwise_norm(&self.eval(t)).powf(r),
                a,
                b,
                SIMPSON_REL_TOL,
                floor,
            )?;
        }
        Ok(total.powf(1.0 / r))
    }

    pub fn costs(&self) -> Result<ControlCosts> {
        Ok(ControlCosts {
            l1: self.lr_norm(1.0)?,
            l2: self.lr_norm(2.0)?,
            linf: self.lr_norm(f64::INFINITY)?,
        })
    }

    /// CSV with a time column and one column per vertex of `D`.
    pub fn to_csv(&self, g: &WeightedGraph) -> Result<String> {
        let mut header = vec!["t"];
        header.extend(self.support.iter().map(|x| g.id(x)));
        let rows = self.grid.iter().enumerate().map(|(k, &t)| {
            std::iter::once(fmt_f64(t))
                .chain(self.samples.column(k).iter().map(|v| fmt_f64(*v)))
                .collect::<Vec<_>>()
        });
        csv_string(&header, rows)
    }
}

impl ClosedForm {
    fn eval(&self, t: f64, tau: f64) -> DVector<f64> {
        let decayed = DVector::from_fn(self.eta.len(), |i, _| {
            self.eta[i] * (-self.lambdas[i] * (t - tau)).exp()
        });
        &self.rows * decayed
    }
}

fn uniform_grid(t: f64) -> Vec<f64> {
    let n = CONTROL_GRID_POINTS - 1;
    (0..=n).map(|k| t * k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlCosts {
    #[serde(with = "ext")]
    pub l1: f64,
    #[serde(with = "ext")]
    pub l2: f64,
    #[serde(with = "ext")]
    pub linf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlResult {
    #[serde(with = "ext::vec")]
    pub final_state: Vec<f64>,
    #[serde(with = "ext")]
    pub initial_norm: f64,
    #[serde(with = "ext")]
    pub final_norm: f64,
    /// `‖f(T)‖ / ‖f0‖`.
    #[serde(with = "ext")]
    pub achieved_alpha: f64,
    /// Penalty parameter of the synthesis; absent for verified controls.
    #[serde(with = "ext::option")]
    pub nu: Option<f64>,
    /// `∫_0^T ‖u‖² dt`.
    #[serde(with = "ext")]
    pub energy: f64,
    pub costs: ControlCosts,
}

impl ControlResult {
    pub fn final_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.final_state)
    }
}

/// How [`verify_control_with`] propagates the Duhamel formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duhamel {
    /// `f(T) = S_T f0 + Q_T η`; needs the closed form.
    Exact,
    /// Adaptive quadrature of `∫ S_{T-τ} 1_D u(τ) dτ`.
    Quadrature,
}

/// Smallest-energy control with `‖f(T)‖ <= α ‖f0‖`.
///
/// `α = 0` requires a nonsingular Gramian. A target at or below the norm of
/// the unobservable part of `S_T f0` fails with
/// [`Error::TargetUnreachable`], whose `floor` is that norm over `‖f0‖`.
pub fn synth_control(
    sd: &SpectralDecomposition,
    d: &VertexSet,
    t: f64,
    f0: &DVector<f64>,
    alpha: f64,
) -> Result<(ControlSignal, ControlResult)> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidParams(format!("alpha = {alpha}")));
    }
    let q = gramian(sd, d, t)?;
    let c0 = sd.coefficients(f0)?;
    let lam = sd.eigenvalues();
    let s = DVector::from_fn(sd.dim(), |i, _| c0[i] * (-lam[i] * t).exp());
    let f0_norm = c0.norm();
    let target = alpha * f0_norm;

    let (eta, nu) = if s.norm() <= target {
        (DVector::zeros(sd.dim()), 0.0)
    } else {
        let floor = unobservable_norm(sd, d, &s);
        let floor_ratio = floor / f0_norm;
        if (floor > 0.0 && target <= floor * (1.0 + 1e-12)) || (alpha == 0.0 && !q.is_nonsingular()) {
            return Err(Error::TargetUnreachable {
                target: alpha,
                floor: floor_ratio,
            });
        }
        if alpha == 0.0 {
            let eta = -q
                .coords
                .clone()
                .cholesky()
                .ok_or_else(|| Error::EigensolveFailure("Gramian is not positive definite".into()))?
                .solve(&s);
            (eta, f64::INFINITY)
        } else {
            // Large ν makes `s + Q η` cancel; aim lower until the state that
            // the control actually produces meets the target.
            let mut goal = target * (1.0 - 1e-12);
            let mut attempt = 0;
            loop {
                let nu = solve_penalty(&q, &s, goal)?;
                let eta = -(resolvent(&q, nu, &s) * nu);
                let reached = (&s + &q.coords * &eta).norm();
                if reached <= target {
                    break (eta, nu);
                }
                goal -= 2.0 * (reached - goal);
                attempt += 1;
                if attempt == MAX_TIGHTENING || goal <= floor {
                    return Err(Error::BisectionNonConvergence);
                }
            }
        }
    };

    let signal = ControlSignal::closed_form(sd, d.clone(), t, eta.clone());
    let final_c = &s + &q.coords * &eta;
    let energy = eta.dot(&(&q.coords * &eta)).max(0.0);
    let result = finish(sd, final_c, f0_norm, Some(nu), energy, signal.costs()?);
    Ok((signal, result))
}

fn finish(
    sd: &SpectralDecomposition,
    final_c: DVector<f64>,
    f0_norm: f64,
    nu: Option<f64>,
    energy: f64,
    costs: ControlCosts,
) -> ControlResult {
    let final_norm = final_c.norm();
    let achieved_alpha = if f0_norm > 0.0 {
        final_norm / f0_norm
    } else if final_norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    ControlResult {
        final_state: sd.synthesize(&final_c).as_slice().to_vec(),
        initial_norm: f0_norm,
        final_norm,
        achieved_alpha,
        nu,
        energy,
        costs,
    }
}

/// `(I + ν Q)^{-1} s` through the eigendecomposition of `Q`.
fn resolvent(q: &Gramian, nu: f64, s: &DVector<f64>) -> DVector<f64> {
    let w = &q.eig.eigenvectors;
    let mut st = w.transpose() * s;
    for (k, v) in st.iter_mut().enumerate() {
        *v /= 1.0 + nu * q.eig.eigenvalues[k].max(0.0);
    }
    w * st
}

/// Smallest `ν` (to relative precision `1e-12`) with
/// `‖(I + ν Q)^{-1} s‖ <= target`, by bracket doubling and bisection.
fn solve_penalty(q: &Gramian, s: &DVector<f64>, target: f64) -> Result<f64> {
    let st = q.eig.eigenvectors.transpose() * s;
    let q_eig: Vec<f64> = q.eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let residual = |nu: f64| {
        st.iter()
            .zip(&q_eig)
            .map(|(c, qk)| (c / (1.0 + nu * qk)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while residual(hi) > target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::BisectionNonConvergence);
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 1e-12 * hi {
            return Ok(hi);
        }
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if residual(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionNonConvergence)
}

/// Re-propagates `f0` under `u`: exactly when `u` carries its closed form,
/// by quadrature otherwise.
pub fn verify_control(sd: &SpectralDecomposition, f0: &DVector<f64>, u: &ControlSignal) -> Result<ControlResult> {
    let method = if u.has_closed_form() {
        Duhamel::Exact
    } else {
        Duhamel::Quadrature
    };
    verify_control_with(sd, f0, u, method)
}

pub fn verify_control_with(
    sd: &SpectralDecomposition,
    f0: &DVector<f64>,
    u: &ControlSignal,
    method: Duhamel,
) -> Result<ControlResult> {
    let t = u.horizon;
    let c0 = sd.coefficients(f0)?;
    let lam = sd.eigenvalues();
    let free = DVector::from_fn(sd.dim(), |i, _| c0[i] * (-lam[i] * t).exp());
    let forced = match (method, &u.closed) {
        (Duhamel::Exact, Some(c)) => gramian(sd, &u.support, t)?.coords * &c.eta,
        (Duhamel::Exact, None) => {
            return Err(Error::InvalidParams("exact propagation needs a closed-form control".into()))
        }
        (Duhamel::Quadrature, _) => duhamel_quadrature(sd, u)?,
    };
    let costs = u.costs()?;
    Ok(finish(sd, free + forced, c0.norm(), None, costs.l2 * costs.l2, costs))
}

/// `∫_0^T e^{-λ(T-τ)} ∘ Vᵀ M 1_D u(τ) dτ` in eigen-coordinates.
fn duhamel_quadrature(sd: &SpectralDecomposition, u: &ControlSignal) -> Result<DVector<f64>> {
    let n = sd.dim();
    let t = u.horizon;
    let lam = sd.eigenvalues();
    let v = sd.eigenvectors();
    let proj = DMatrix::from_fn(n, u.support.len(), |i, r| {
        let x = u.support.members()[r];
        v[(x, i)] * sd.graph().measure(x)
    });
    let peak = u
        .samples
        .column_iter()
        .map(|c| u.pointwise_norm(&c.into_owned()))
        .fold(0.0, f64::max);
    let integrand = |tau: f64, out: &mut [f64]| {
        let b = &proj * u.eval(tau);
        for i in 0..n {
            out[i] = (-lam[i] * (t - tau)).exp() * b[i];
        }
    };
    let pieces: Vec<(f64, f64)> = if u.closed.is_some() {
        vec![(0.0, t)]
    } else {
        u.grid.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let mut total = DVector::zeros(n);
    for (a, b) in pieces {
        let floor = [1e-15 * peak * (b - a)];
        let piece = adaptive_simpson(integrand, n, a, b, SIMPSON_REL_TOL, &floor, Acceptance::Euclidean)?;
        total += DVector::from_vec(piece.values);
    }
    Ok(total)
}

/// An eigenspace part that vanishes identically on `D`.
#[derive(Debug, Clone)]
pub struct Obstruction {
    pub eigenvalue: f64,
    /// `m`-orthonormal eigenfunctions vanishing on `D`.
    pub vectors: Vec<DVector<f64>>,
}

/// Eigenfunctions of `H` vanishing on `D`, one entry per eigenvalue with a
/// nontrivial such subspace. An eigenspace combination counts when its
/// restriction to `D` has norm at most `tol` (the full eigenspace basis is
/// orthonormal, so the threshold is absolute).
pub fn hautus_obstruction(sd: &SpectralDecomposition, d: &VertexSet, tol: f64) -> Vec<Obstruction> {
    let basis = sd.restricted_basis(d);
    let v = sd.eigenvectors();
    let mut out = Vec::new();
    for group in sd.groups() {
        let k = group.len();
        let rows = basis.nrows().max(k);
        let block = DMatrix::from_fn(rows, k, |r, c| {
            if r < basis.nrows() {
                basis[(r, group.start + c)]
            } else {
                0.0
            }
        });
        let svd = block.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let mut vectors = Vec::new();
        for (idx, sigma) in svd.singular_values.iter().enumerate() {
            if *sigma <= tol {
                let w = vt.row(idx).transpose();
                let mut phi = v.columns(group.start, k) * w;
                let lead = phi.iter().copied().fold(0.0, |a: f64, x| if x.abs() > a.abs() { x } else { a });
                if lead < 0.0 {
                    phi = -phi;
                }
                vectors.push(phi);
            }
        }
        if !vectors.is_empty() {
            let eigenvalue = sd.eigenvalues()[group.clone()].iter().sum::<f64>() / k as f64;
            out.push(Obstruction {
                eigenvalue,
                vectors,
            });
        }
    }
    out
}

/// Norm of the component of `c` (eigen-coordinates) in unobservable
/// eigenspaces.
fn unobservable_norm(sd: &SpectralDecomposition, d: &VertexSet, c: &DVector<f64>) -> f64 {
    let f = sd.synthesize(c);
    hautus_obstruction(sd, d, HAUTUS_TOL)
        .iter()
        .flat_map(|o| o.vectors.iter())
        .map(|phi| sd.inner(&f, phi).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `|⟨f(T), φ⟩ - e^{-λT} ⟨f0, φ⟩|` for an eigenfunction `φ` vanishing on
/// `D`; zero for every control supported on `D`.
pub fn mode_invariance_check(
    sd: &SpectralDecomposition,
    phi: &DVector<f64>,
    lambda: f64,
    f0: &DVector<f64>,
    u: &ControlSignal,
) -> Result<f64> {
    let res = verify_control(sd, f0, u)?;
    let ft = res.final_vector();
    Ok((sd.inner(&ft, phi) - (-lambda * u.horizon).exp() * sd.inner(f0, phi)).abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilizationReport {
    #[serde(rename = "T", with = "ext")]
    pub horizon: f64,
    #[serde(with = "ext")]
    pub alpha: f64,
    pub periods: usize,
    /// `ln(α) / T`.
    #[serde(with = "ext")]
    pub omega: f64,
    /// Largest `‖u_k‖_{L_1} / ‖f(kT)‖` over the periods.
    #[serde(with = "ext")]
    pub k1: f64,
    /// Least-squares slope of `ln ‖f(kT)‖` against `kT`.
    #[serde(with = "ext")]
    pub fitted_omega: f64,
    /// `(1 + K1) / α`.
    #[serde(rename = "M", with = "ext")]
    pub m: f64,
    /// `‖f(kT)‖` for `k = 0..=periods`.
    #[serde(with = "ext::vec")]
    pub period_norms: Vec<f64>,
    #[serde(with = "ext::vec")]
    pub l1_costs: Vec<f64>,
    /// `(t, ‖f(t)‖)` samples inside the periods.
    #[serde(skip)]
    pub trajectory: Vec<(f64, f64)>,
    /// `max_t ‖f(t)‖ / (M e^{ωt} ‖f0‖)` over the samples.
    #[serde(with = "ext")]
    pub max_envelope_ratio: f64,
}

/// Samples per period of the stabilized trajectory.
pub const STABILIZATION_SAMPLES: usize = 16;

/// Applies the synthesized control period after period, restarting from the
/// reached state, which gives `‖f(kT)‖ <= α^k ‖f0‖` and
/// `‖f(t)‖ <= M e^{ωt} ‖f0‖`.
pub fn stabilize(
    sd: &SpectralDecomposition,
    d: &VertexSet,
    t: f64,
    alpha: f64,
    periods: usize,
    f0: &DVector<f64>,
) -> Result<StabilizationReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("stabilization needs 0 < alpha < 1, got {alpha}")));
    }
    let compression = sd.compression(d);
    let lam = sd.eigenvalues();
    let mut state = f0.clone();
    let mut period_norms = vec![sd.norm(f0)];
    let mut l1_costs = Vec::with_capacity(periods);
    let mut k1: f64 = 0.0;
    let mut trajectory = vec![(0.0, period_norms[0])];
    for k in 0..periods {
        let (signal, res) = synth_control(sd, d, t, &state, alpha)?;
        let norm_k = period_norms[k];
        if norm_k > 0.0 {
            k1 = k1.max(res.costs.l1 / norm_k);
        }
        l1_costs.push(res.costs.l1);
        let c = sd.coefficients(&state)?;
        let eta = signal.eta().expect("synthesized").clone();
        for j in 1..STABILIZATION_SAMPLES {
            // f(τ) = S_τ f_k + Q_τ (e^{-λ(T-τ)} ∘ η).
            let tau = t * j as f64 / STABILIZATION_SAMPLES as f64;
            let q = gramian_unchecked(sd, &compression, tau);
            let shifted = DVector::from_fn(sd.dim(), |i, _| eta[i] * (-lam[i] * (t - tau)).exp());
            let free = DVector::from_fn(sd.dim(), |i, _| c[i] * (-lam[i] * tau).exp());
            trajectory.push((k as f64 * t + tau, (free + q.coords * shifted).norm()));
        }
        trajectory.push(((k + 1) as f64 * t, res.final_norm));
        period_norms.push(res.final_norm);
        state = res.final_vector();
    }
    let omega = alpha.ln() / t;
    let m = (1.0 + k1) / alpha;
    let f0_norm = period_norms[0];
    let max_envelope_ratio = if f0_norm == 0.0 {
        0.0
    } else {
        trajectory
            .iter()
            .map(|&(s, n)| n / (m * (omega * s).exp() * f0_norm))
            .fold(0.0, f64::max)
    };
    Ok(StabilizationReport {
        horizon: t,
        alpha,
        periods,
        omega,
        fitted_omega: log_slope(&period_norms, t),
        k1,
        m,
        period_norms,
        l1_costs,
        trajectory,
        max_envelope_ratio,
    })
}

fn log_slope(norms: &[f64], t: f64) -> f64 {
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .filter(|(_, n)| **n > 0.0)
        .map(|(k, n)| (k as f64 * t, n.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::spectral::eigendecompose;

    fn sym_generator(g: &WeightedGraph) -> DMatrix<f64> {
        let n = g.len();
        DMatrix::from_fn(n, n, |x, y| {
            let s = (g.measure(x) * g.measure(y)).sqrt();
            if x == y {
                g.degree(x)
            } else {
                -g.weight(x, y) / s
            }
        })
    }

    #[test]
    fn gramian_matches_matrix_exponential_quadrature() {
        let g = families::random_connected(7, 0.4, 3).unwrap();
        let sd = eigendecompose(&g).unwrap();
        let d = VertexSet::new(7, [1, 4]);
        let t = 1.5;
        let a = sym_generator(&g);
        let p = DMatrix::from_diagonal(&DVector::from_fn(7, |x, _| if d.contains(x) { 1.0 } else { 0.0 }));
        // Composite Simpson on ∫ e^{-tA} P e^{-tA} dt.
        let steps = 2000;
        let h = t / steps as f64;
        let mut oracle = DMatrix::zeros(7, 7);
        for k in 0..=steps {
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let e = (-(k as f64 * h) * &a).exp();
            oracle += w * h / 3.0 * (&e * &p * &e);
        }
        // Symmetric form of Q_T: M^{1/2} V Q Vᵀ M^{1/2}.
        let q = gramian(&sd, &d, t).unwrap();
        let sqrt_m = DMatrix::from_diagonal(&DVector::from_fn(7, |x, _| g.measure(x).sqrt()));
        let w = &sqrt_m * sd.eigenvectors();
        let ours = &w * q.coords() * w.transpose();
        assert!((&ours - &oracle).amax() < 1e-9, "{}", (&ours - &oracle).amax());
        assert!(q.is_nonsingular());
    }

    #[test]
    fn synthesis_reaches_target_on_k2() {
        let g = families::path(2).unwrap();
        let sd = eigendecompose(&g).unwrap();
        let d = VertexSet::new(2, [0]);
        let f0 = DVector::from_vec(vec![1.0, -0.5]);
        let (u, res) = synth_control(&sd, &d, 1.0, &f0, 0.1).unwrap();
        assert!((res.achieved_alpha - 0.1).abs() < 1e-8);
        assert!(res.achieved_alpha <= 0.1);
        assert!((res.energy - res.costs.l2.powi(2)).abs() <= 1e-8 * res.energy);

        let quad = verify_control_with(&sd, &f0, &u, Duhamel::Quadrature).unwrap();
        let diff = (quad.final_vector() - res.final_vector()).norm();
        assert!(diff <= 1e-8 * res.final_norm, "{diff}");

        let sampled = ControlSignal::sampled(&g, d.clone(), u.grid().to_vec(), u.samples().clone()).unwrap();
        for k in [0, 17, 511] {
            let tau = u.grid()[k];
            assert!((sampled.eval(tau) - u.eval(tau)).amax() < 1e-12);
        }
        let loose = verify_control(&sd, &f0, &sampled).unwrap();
        assert!((loose.achieved_alpha - 0.1).abs() < 1e-3);

        let (_, exact) = synth_control(&sd, &d, 1.0, &f0, 0.0).unwrap();
        assert!(exact.final_norm < 1e-8);
    }

    #[test]
    fn free_decay_needs_no_control() {
        let sd = eigendecompose(&families::path(2).unwrap()).unwrap();
        let f0 = DVector::from_vec(vec![1.0, -1.0]);
        let (u, res) = synth_control(&sd, &VertexSet::new(2, [0]), 1.0, &f0, 0.9).unwrap();
        assert_eq!(res.costs.l1, 0.0);
        assert_eq!(res.nu, Some(0.0));
        assert_eq!(u.eval(0.3).amax(), 0.0);
    }

    #[test]
    fn c4_obstruction_blocks_null_control() {
        let g = families::cycle(4).unwrap();
        let sd = eigendecompose(&g).unwrap();
        let d = families::parity_subset(&g, true);
        let obs = hautus_obstruction(&sd, &d, HAUTUS_TOL);
        assert_eq!(obs.len(), 1);
        assert!((obs[0].eigenvalue - 2.0).abs() < 1e-12);
        assert_eq!(obs[0].vectors.len(), 1);
        let s = 0.5f64.sqrt();
        let expected = DVector::from_vec(vec![0.0, s, 0.0, -s]);
        assert!((&obs[0].vectors[0] - expected).amax() < 1e-10);

        let f0 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        match synth_control(&sd, &d, 1.0, &f0, 0.0) {
            Err(Error::TargetUnreachable { floor, .. }) => {
                assert!((floor - s * (-2.0f64).exp()).abs() < 1e-10)
            }
            other => panic!("{other:?}"),
        }
        // The observable part can still be pushed down to the floor.
        let (_, res) = synth_control(&sd, &d, 1.0, &f0, 0.2).unwrap();
        assert!(res.achieved_alpha <= 0.2);
    }

    #[test]
    fn obstructions_on_larger_cycles() {
        for n in [8, 12] {
            let g = families::cycle(n).unwrap();
            let sd = eigendecompose(&g).unwrap();
            let d = families::parity_subset(&g, true);
            let obs = hautus_obstruction(&sd, &d, HAUTUS_TOL);
            assert_eq!(obs.len(), 1, "C{n}");
            assert!((obs[0].eigenvalue - 2.0).abs() < 1e-10);
            let phi = &obs[0].vectors[0];
            assert!(d.iter().all(|x| phi[x].abs() < 1e-10));

            let f0 = DVector::from_fn(n, |x, _| (x as f64 * 0.7).sin());
            let grid: Vec<f64> = (0..=64).map(|k| k as f64 / 32.0).collect();
            let samples = DMatrix::from_fn(d.len(), grid.len(), |r, k| (r as f64 + grid[k]).cos());
            let u = ControlSignal::sampled(&g, d.clone(), grid, samples).unwrap();
            let resid = mode_invariance_check(&sd, phi, 2.0, &f0, &u).unwrap();
            assert!(resid < 1e-10, "{resid}");
        }
    }

    #[test]
    fn stabilization_decays_geometrically() {
        let g = families::cycle(6).unwrap();
        let sd = eigendecompose(&g).unwrap();
        let d = VertexSet::new(6, [0, 3]);
        let f0 = DVector::from_fn(6, |x, _| 1.0 + x as f64);
        let rep = stabilize(&sd, &d, 1.0, 0.3, 5, &f0).unwrap();
        for (k, n) in rep.period_norms.iter().enumerate() {
            assert!(*n <= 0.3f64.powi(k as i32) * rep.period_norms[0] * (1.0 + 1e-9));
        }
        assert!(rep.max_envelope_ratio <= 1.0 + 1e-9);
        assert!(stabilize(&sd, &d, 1.0, 1.0, 5, &f0).is_err());
    }

    #[test]
    fn control_csv_layout() {
        let g = families::path(3).unwrap();
        let u = ControlSignal::zero(&g, VertexSet::new(3, [0, 2]), 1.0).unwrap();
        let csv = u.to_csv(&g).unwrap();
        assert!(csv.starts_with("t,0,2\n"));
        assert_eq!(csv.lines().count(), CONTROL_GRID_POINTS + 1);
    }
}
