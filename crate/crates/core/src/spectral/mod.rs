//! The weighted Laplacian `H`, its m-orthonormal eigendecomposition, and the
//! spectral calculus built on it: the heat semigroup `S_t = e^{-tH}` and
//! spectral projections `P_I(H)`.
//!
//! `H` is self-adjoint on `ℓ²(X, m)`. Conjugating by `M^{1/2}` gives the
//! symmetric matrix `M^{-1/2} L M^{-1/2}` with `L = diag(Σ_y b(·, y)) - B`,
//! whose orthonormal eigenvectors `w` map back to m-orthonormal
//! eigenvectors `v = M^{-1/2} w` of `H`.
//!
//! State vectors may be real or complex; all operators are real, so any
//! `T: ComplexField<RealField = f64>` works.

pub mod trajectory;

use std::ops::Range;

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};

pub use trajectory::{time_lr_norm, RestrictedTrajectories};

/// Scalars usable as state-vector entries (`f64` or `Complex<f64>`).
pub trait Scalar: ComplexField<RealField = f64> + Copy {}

impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

/// Relative tolerance for grouping numerically repeated eigenvalues.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// An energy interval `(-inf, sup]` or `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergyInterval {
    AtMost { sup: f64 },
    Closed { lo: f64, hi: f64 },
}

impl EnergyInterval {
    pub fn at_most(sup: f64) -> Self {
        EnergyInterval::AtMost { sup }
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidParams(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(EnergyInterval::Closed { lo, hi })
    }

    pub fn sup(&self) -> f64 {
        match *self {
            EnergyInterval::AtMost { sup } => sup,
            EnergyInterval::Closed { hi, .. } => hi,
        }
    }

    /// Closed-endpoint membership with an absolute slack `tol`.
    pub fn contains(&self, lambda: f64, tol: f64) -> bool {
        match *self {
            EnergyInterval::AtMost { sup } => lambda <= sup + tol,
            EnergyInterval::Closed { lo, hi } => lo - tol <= lambda && lambda <= hi + tol,
        }
    }
}

/// `Hf(x) = (1/m(x)) Σ_y b(x, y) (f(x) - f(y))`.
pub fn apply_laplacian<T: Scalar>(g: &WeightedGraph, f: &DVector<T>) -> Result<DVector<T>> {
    check_len(g.len(), f.len())?;
    Ok(DVector::from_fn(g.len(), |x, _| {
        let mut acc = T::zero();
        for &(y, b) in g.neighbors(x) {
            acc += (f[x] - f[y]).scale(b);
        }
        acc.unscale(g.measure(x))
    }))
}

/// Dense matrix of `H` in the vertex basis.
pub fn laplacian_matrix(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.len();
    let mut h = DMatrix::zeros(n, n);
    for x in 0..n {
        let m = g.measure(x);
        for &(y, b) in g.neighbors(x) {
            h[(x, x)] += b / m;
            h[(x, y)] -= b / m;
        }
    }
    h
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// m-orthonormal eigenpairs of `H`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    graph: WeightedGraph,
    eigenvalues: Vec<f64>,
    // Column i is the eigenvector for eigenvalue i.
    vectors: DMatrix<f64>,
    groups: Vec<Range<usize>>,
}

pub fn eigendecompose(g: &WeightedGraph) -> Result<SpectralDecomposition> {
    let n = g.len();
    if n == 0 {
        return Err(Error::EigensolveFailure("empty graph".into()));
    }
    let sqrt_m: Vec<f64> = g.measures().iter().map(|m| m.sqrt()).collect();
    let mut sym = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for &(y, b) in g.neighbors(x) {
            sym[(x, x)] += b / g.measure(x);
            sym[(x, y)] = -b / (sqrt_m[x] * sqrt_m[y]);
        }
    }
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigensolveFailure("no convergence".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolveFailure("non-finite eigenvalue".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // H is non-negative; clip roundoff below zero.
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::from_fn(n, n, |x, k| eig.eigenvectors[(x, order[k])] / sqrt_m[x]);

    let tol = DEGENERACY_TOL * (eigenvalues[n - 1] + 1.0);
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || eigenvalues[k] - eigenvalues[k - 1] > tol {
            groups.push(start..k);
            start = k;
        }
    }

    let m = g.measures();
    for group in &groups {
        for k in group.clone() {
            for j in group.start..k {
                let proj = m_inner_cols(&vectors, j, k, m);
                for x in 0..n {
                    vectors[(x, k)] -= proj * vectors[(x, j)];
                }
            }
            let norm = m_inner_cols(&vectors, k, k, m).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::EigensolveFailure("degenerate eigenvector".into()));
            }
            vectors.column_mut(k).unscale_mut(norm);
            if group.len() == 1 {
                let lead = vectors.column(k).iamax();
                if vectors[(lead, k)] < 0.0 {
                    vectors.column_mut(k).neg_mut();
                }
            }
        }
    }

    Ok(SpectralDecomposition {
        graph: g.clone(),
        eigenvalues,
        vectors,
        groups,
    })
}

fn m_inner_cols(v: &DMatrix<f64>, i: usize, j: usize, m: &[f64]) -> f64 {
    (0..v.nrows()).map(|x| v[(x, i)] * v[(x, j)] * m[x]).sum()
}

impl SpectralDecomposition {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    /// Eigenvector `i` in the vertex basis.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// Matrix whose columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Index ranges of eigenvalues equal up to [`DEGENERACY_TOL`].
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Absolute tolerance used for eigenvalue grouping and interval
    /// membership.
    pub fn degeneracy_tol(&self) -> f64 {
        DEGENERACY_TOL * (self.lambda_max() + 1.0)
    }

    /// `‖H + 1‖ = λ_max + 1`.
    pub fn op_norm_h_plus_1(&self) -> f64 {
        self.lambda_max() + 1.0
    }

    /// `⟨f, g⟩_m = Σ f(x) conj(g(x)) m(x)`.
    pub fn inner<T: Scalar>(&self, f: &DVector<T>, g: &DVector<T>) -> T {
        let m = self.graph.measures();
        f.iter()
            .zip(g.iter())
            .zip(m)
            .fold(T::zero(), |acc, ((a, b), &w)| acc + (*a * b.conjugate()).scale(w))
    }

    pub fn norm<T: Scalar>(&self, f: &DVector<T>) -> f64 {
        let m = self.graph.measures();
        f.iter()
            .zip(m)
            .map(|(a, &w)| a.modulus_squared() * w)
            .sum::<f64>()
            .sqrt()
    }

    /// `‖f|_D‖_{ℓ²(D, m|_D)}`.
    pub fn restricted_norm<T: Scalar>(&self, f: &DVector<T>, d: &VertexSet) -> f64 {
        d.iter()
            .map(|x| f[x].modulus_squared() * self.graph.measure(x))
            .sum::<f64>()
            .sqrt()
    }

    /// Eigen-coordinates `c_i = ⟨f, v_i⟩_m`.
    pub fn coefficients<T: Scalar>(&self, f: &DVector<T>) -> Result<DVector<T>> {
        check_len(self.dim(), f.len())?;
        let m = self.graph.measures();
        Ok(DVector::from_fn(self.dim(), |i, _| {
            (0..self.dim()).fold(T::zero(), |acc, x| {
                acc + f[x].scale(self.vectors[(x, i)] * m[x])
            })
        }))
    }

    /// `Σ_i c_i v_i`.
    pub fn synthesize<T: Scalar>(&self, c: &DVector<T>) -> DVector<T> {
        DVector::from_fn(self.dim(), |x, _| {
            (0..self.dim()).fold(T::zero(), |acc, i| acc + c[i].scale(self.vectors[(x, i)]))
        })
    }

    /// `S_t f = Σ_i e^{-λ_i t} ⟨f, v_i⟩_m v_i`.
    pub fn semigroup_apply<T: Scalar>(&self, t: f64, f: &DVector<T>) -> Result<DVector<T>> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        let mut c = self.coefficients(f)?;
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = ci.scale((-self.eigenvalues[i] * t).exp());
        }
        Ok(self.synthesize(&c))
    }

    /// Indices of eigenpairs in `I`. Whole degeneracy groups are kept
    /// together: a group is inside `I` when its mean eigenvalue is.
    pub fn indices_in(&self, interval: &EnergyInterval) -> Vec<usize> {
        let tol = self.degeneracy_tol();
        self.groups
            .iter()
            .filter(|r| {
                let mean = self.eigenvalues[(*r).clone()].iter().sum::<f64>() / r.len() as f64;
                interval.contains(mean, tol)
            })
            .flat_map(|r| r.clone())
            .collect()
    }

    /// `P_I(H) f`.
    pub fn spectral_projection<T: Scalar>(
        &self,
        interval: &EnergyInterval,
        f: &DVector<T>,
    ) -> Result<DVector<T>> {
        let c = self.coefficients(f)?;
        let mut kept = DVector::zeros(self.dim());
        for i in self.indices_in(interval) {
            kept[i] = c[i];
        }
        Ok(self.synthesize(&kept))
    }

    /// Rows `x ∈ D` of the eigenvector matrix, scaled by `sqrt(m(x))`, so
    /// that `‖(Σ c_i v_i)|_D‖ = ‖R c‖₂`.
    pub fn restricted_basis(&self, d: &VertexSet) -> DMatrix<f64> {
        DMatrix::from_fn(d.len(), self.dim(), |row, i| {
            let x = d.members()[row];
            self.vectors[(x, i)] * self.graph.measure(x).sqrt()
        })
    }

    /// `⟨v_i, 1_D v_j⟩_m` for all `i, j`.
    pub fn compression(&self, d: &VertexSet) -> DMatrix<f64> {
        let r = self.restricted_basis(d);
        r.transpose() * r
    }

    /// `max_i ‖H v_i - λ_i v_i‖_m`.
    pub fn max_residual(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let v = self.eigenvector(i);
                let hv = apply_laplacian(&self.graph, &v).expect("matching dimension");
                self.norm(&(hv - v * self.eigenvalues[i]))
            })
            .fold(0.0, f64::max)
    }

    /// `max_{ij} |⟨v_i, v_j⟩_m - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.graph.measures();
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m_inner_cols(&self.vectors, i, j, m) - target).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::graph::build_cyclic_cover;
    use approx::assert_abs_diff_eq;
    use nalgebra::Complex;

    #[test]
    fn laplacian_examples() {
        let k2 = families::path(2).unwrap();
        let hf = apply_laplacian(&k2, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(hf.as_slice(), &[1.0, -1.0]);

        let c4 = families::cycle(4).unwrap();
        let phi = DVector::from_vec(vec![0.0, 1.0, 0.0, -1.0]);
        let hphi = apply_laplacian(&c4, &phi).unwrap();
        assert_eq!(hphi, phi.clone() * 2.0);

        let constant = DVector::from_element(4, Complex::new(2.0, -1.0));
        assert!(apply_laplacian(&c4, &constant).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn small_spectra() {
        let k2 = eigendecompose(&families::path(2).unwrap()).unwrap();
        assert_abs_diff_eq!(k2.eigenvalue(0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k2.eigenvalue(1), 2.0, epsilon = 1e-12);

        let c4 = eigendecompose(&families::cycle(4).unwrap()).unwrap();
        // Circulant eigenvalues 2 - 2 cos(2πk/4).
        let mut expected: Vec<f64> = (0..4)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 4.0).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in c4.eigenvalues().iter().zip(&expected) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
        assert_eq!(c4.groups().len(), 3);
        assert!(c4.max_residual() <= 1e-10 * 5.0);
        assert!(c4.orthonormality_defect() <= 1e-10);

        let c8 = build_cyclic_cover(&families::cycle(4).unwrap(), 2).unwrap();
        let sd8 = eigendecompose(c8.cover()).unwrap();
        for target in [0.0, 2.0, 4.0] {
            assert!(sd8.eigenvalues().iter().any(|l| (l - target).abs() < 1e-12));
        }

        let single = eigendecompose(&families::path(1).unwrap()).unwrap();
        assert_eq!(single.op_norm_h_plus_1(), 1.0);
        assert_abs_diff_eq!(k2.op_norm_h_plus_1(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c4.op_norm_h_plus_1(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn semigroup_examples() {
        let k2 = eigendecompose(&families::path(2).unwrap()).unwrap();
        let f = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(k2.semigroup_apply(0.0, &f).unwrap(), f, epsilon = 1e-12);
        for t in [0.1, 1.0, 3.0] {
            let e = (-2.0 * t).exp();
            let s = k2.semigroup_apply(t, &f).unwrap();
            assert_abs_diff_eq!(s[0], (1.0 + e) / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s[1], (1.0 - e) / 2.0, epsilon = 1e-12);
        }
        assert_eq!(k2.semigroup_apply(-1.0, &f), Err(Error::NegativeTime(-1.0)));

        // Long-time limit is the m-weighted mean.
        let g = families::random_connected(7, 0.3, 11).unwrap();
        let sd = eigendecompose(&g).unwrap();
        let f = DVector::from_fn(7, |x, _| x as f64);
        let mean = (0..7).map(|x| x as f64 * g.measure(x)).sum::<f64>() / g.measure_of(&[0, 1, 2, 3, 4, 5, 6]);
        let s = sd.semigroup_apply(400.0, &f).unwrap();
        assert!(s.iter().all(|v| (v - mean).abs() < 1e-9));
    }

    #[test]
    fn projection_examples() {
        let k2 = eigendecompose(&families::path(2).unwrap()).unwrap();
        let f = DVector::from_vec(vec![1.0, 0.0]);
        let p = k2.spectral_projection(&EnergyInterval::at_most(1.0), &f).unwrap();
        assert_abs_diff_eq!(p, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-12);
        let full = k2.spectral_projection(&EnergyInterval::at_most(10.0), &f).unwrap();
        assert_abs_diff_eq!(full, f, epsilon = 1e-12);
        let none = k2
            .spectral_projection(&EnergyInterval::closed(0.5, 1.5).unwrap(), &f)
            .unwrap();
        assert_abs_diff_eq!(none, DVector::zeros(2), epsilon = 1e-15);
    }

    #[test]
    fn interval_serialization() {
        let a: EnergyInterval = serde_json::from_str(r#"{"sup":0.5}"#).unwrap();
        assert_eq!(a, EnergyInterval::at_most(0.5));
        let b: EnergyInterval = serde_json::from_str(r#"{"lo":1,"hi":2}"#).unwrap();
        assert_eq!(b.sup(), 2.0);
        assert!(EnergyInterval::closed(2.0, 1.0).is_err());
    }
}
