//! Time norms of restricted heat trajectories `t ↦ ‖(S_t f)|_D‖`.
//!
//! A batch of initial states is held in eigen-coordinates so that every
//! evaluation time costs one `|D| × n` by `n × N` product; all states share
//! quadrature nodes.

use nalgebra::{DMatrix, DVector};

use super::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::graph::VertexSet;
use crate::quadrature::{adaptive_simpson_masked, golden_max, SIMPSON_REL_TOL};

/// Grid size for the `r = ∞` maximum before local refinement.
pub const SUP_GRID_POINTS: usize = 1025;

#[derive(Debug, Clone)]
pub struct RestrictedTrajectories {
    lambdas: Vec<f64>,
    basis: DMatrix<f64>,
    coeffs: DMatrix<f64>,
    initial_norms: Vec<f64>,
}

impl RestrictedTrajectories {
    pub fn new(sd: &SpectralDecomposition, d: &VertexSet, initial: &[DVector<f64>]) -> Result<Self> {
        let mut coeffs = DMatrix::zeros(sd.dim(), initial.len());
        for (j, f) in initial.iter().enumerate() {
            coeffs.set_column(j, &sd.coefficients(f)?);
        }
        Self::from_coefficients(sd, d, coeffs)
    }

    /// `coeffs` has one column of eigen-coordinates per initial state.
    pub fn from_coefficients(
        sd: &SpectralDecomposition,
        d: &VertexSet,
        coeffs: DMatrix<f64>,
    ) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptySubset);
        }
        if coeffs.nrows() != sd.dim() {
            return Err(Error::DimensionMismatch {
                expected: sd.dim(),
                got: coeffs.nrows(),
            });
        }
        let initial_norms = coeffs.column_iter().map(|c| c.norm()).collect();
        Ok(RestrictedTrajectories {
            lambdas: sd.eigenvalues().to_vec(),
            basis: sd.restricted_basis(d),
            coeffs,
            initial_norms,
        })
    }

    /// From raw parts: eigenvalues, the `sqrt(m)`-scaled restricted basis and
    /// one column of coefficients per state.
    pub fn from_raw(lambdas: Vec<f64>, basis: DMatrix<f64>, coeffs: DMatrix<f64>) -> Self {
        let initial_norms = coeffs.column_iter().map(|c| c.norm()).collect();
        RestrictedTrajectories {
            lambdas,
            basis,
            coeffs,
            initial_norms,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.ncols() == 0
    }

    pub fn initial_norms(&self) -> &[f64] {
        &self.initial_norms
    }

    fn decayed_basis(&self, t: f64) -> DMatrix<f64> {
        let mut w = self.basis.clone();
        for (i, mut col) in w.column_iter_mut().enumerate() {
            col *= (-self.lambdas[i] * t).exp();
        }
        w
    }

    /// `‖(S_t f_j)|_D‖` for every state `j`.
    pub fn norms_at(&self, t: f64, out: &mut [f64]) {
        let y = self.decayed_basis(t) * &self.coeffs;
        for (o, col) in out.iter_mut().zip(y.column_iter()) {
            *o = col.norm();
        }
    }

    /// Like [`Self::norms_at`] but only for the states in `active`.
    pub fn norms_at_subset(&self, t: f64, active: &[usize], out: &mut [f64]) {
        if active.len() == self.len() {
            return self.norms_at(t, out);
        }
        let y = self.decayed_basis(t) * self.coeffs.select_columns(active);
        for (&j, col) in active.iter().zip(y.column_iter()) {
            out[j] = col.norm();
        }
    }

    pub fn norm_at(&self, t: f64, j: usize) -> f64 {
        let decay: Vec<f64> = self.lambdas.iter().map(|l| (-l * t).exp()).collect();
        self.norm_with(&decay, j)
    }

    fn norm_with(&self, decay: &[f64], j: usize) -> f64 {
        let c = self.coeffs.column(j);
        let mut sq = 0.0;
        for row in 0..self.basis.nrows() {
            let mut v = 0.0;
            for (i, e) in decay.iter().enumerate() {
                v += self.basis[(row, i)] * e * c[i];
            }
            sq += v * v;
        }
        sq.sqrt()
    }

    /// `‖t ↦ ‖(S_t f_j)|_D‖‖_{L_r(a, b)}` for every state `j`, `r ∈ [1, ∞]`.
    ///
    /// Finite `r` uses batched adaptive Simpson on `g(t)^r` to relative
    /// tolerance `1e-10`; `r = ∞` takes the maximum over a 1025-point grid and
    /// refines around each grid maximizer by golden-section search.
    pub fn lr_norms(&self, a: f64, b: f64, r: f64) -> Result<Vec<f64>> {
        check_window(a, b)?;
        check_index(r)?;
        if r.is_infinite() {
            return Ok(self.sup_norms(a, b));
        }
        let width = self.len();
        // The integrand never exceeds ‖f_j‖^r, which sets the scale of an
        // absolute floor for trajectories that vanish on D.
        let floor: Vec<f64> = self
            .initial_norms
            .iter()
            .map(|n| 1e-15 * n.powf(r) * (b - a))
            .collect();
        let integral = adaptive_simpson_masked(
            |t, active, out| {
                self.norms_at_subset(t, active, out);
                if r != 1.0 {
                    for &j in active {
                        out[j] = out[j].powf(r);
                    }
                }
            },
            width,
            a,
            b,
            SIMPSON_REL_TOL,
            &floor,
        )?;
        Ok(integral
            .values
            .into_iter()
            .map(|v| v.max(0.0).powf(1.0 / r))
            .collect())
    }

    fn sup_norms(&self, a: f64, b: f64) -> Vec<f64> {
        let n = self.len();
        let step = (b - a) / (SUP_GRID_POINTS - 1) as f64;
        let mut best = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0usize; n];
        let mut row = vec![0.0; n];
        for k in 0..SUP_GRID_POINTS {
            self.norms_at(a + step * k as f64, &mut row);
            for j in 0..n {
                if row[j] > best[j] {
                    best[j] = row[j];
                    arg[j] = k;
                }
            }
        }
        (0..n)
            .map(|j| {
                if best[j] == 0.0 {
                    return 0.0;
                }
                let lo = a + step * arg[j].saturating_sub(1) as f64;
                let hi = (a + step * (arg[j] + 1) as f64).min(b);
                let (_, refined) = golden_max(|t| self.norm_at(t, j), lo, hi, 1e-12 * (b - a));
                best[j].max(refined)
            })
            .collect()
    }
}

fn check_window(a: f64, b: f64) -> Result<()> {
    if !(0.0 <= a && a < b && b.is_finite()) {
        return Err(Error::InvalidParams(format!("time window [{a}, {b}]")));
    }
    Ok(())
}

fn check_index(r: f64) -> Result<()> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidParams(format!("norm index r = {r}")));
    }
    Ok(())
}

/// `‖t ↦ ‖(S_t f0)|_D‖_{ℓ²(D, m|_D)}‖_{L_r((a, b))}`.
pub fn time_lr_norm(
    sd: &SpectralDecomposition,
    f0: &DVector<f64>,
    d: &VertexSet,
    window: (f64, f64),
    r: f64,
) -> Result<f64> {
    let traj = RestrictedTrajectories::new(sd, d, std::slice::from_ref(f0))?;
    Ok(traj.lr_norms(window.0, window.1, r)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::spectral::eigendecompose;

    #[test]
    fn zero_state_has_zero_norm() {
        let sd = eigendecompose(&families::cycle(4).unwrap()).unwrap();
        let d = VertexSet::new(4, [0, 2]);
        for r in [1.0, 2.0, f64::INFINITY] {
            assert_eq!(time_lr_norm(&sd, &DVector::zeros(4), &d, (0.0, 1.0), r).unwrap(), 0.0);
        }
    }

    #[test]
    fn eigenvector_closed_forms() {
        let sd = eigendecompose(&families::path(2).unwrap()).unwrap();
        let d = VertexSet::new(2, [0, 1]);
        let v = sd.eigenvector(1);
        let lambda = sd.eigenvalue(1);
        let (a, b) = (0.3, 1.7);
        // ∫_a^b e^{-2λt} dt ‖v‖², square-rooted.
        let l2 = ((-2.0 * lambda * a).exp() - (-2.0 * lambda * b).exp()) / (2.0 * lambda);
        let got = time_lr_norm(&sd, &v, &d, (a, b), 2.0).unwrap();
        assert!((got - l2.sqrt()).abs() <= 1e-10 * l2.sqrt());
        // Closed form with a = 0 as stated for the window [0, b - a], shifted.
        let shifted = ((1.0 - (-2.0 * lambda * (b - a)).exp()) / (2.0 * lambda)).sqrt()
            * (-lambda * a).exp();
        assert!((got - shifted).abs() <= 1e-10 * shifted);

        let sup = time_lr_norm(&sd, &v, &d, (a, b), f64::INFINITY).unwrap();
        assert!((sup - (-lambda * a).exp()).abs() <= 1e-12);

        let l1 = ((-lambda * a).exp() - (-lambda * b).exp()) / lambda;
        let got1 = time_lr_norm(&sd, &v, &d, (a, b), 1.0).unwrap();
        assert!((got1 - l1).abs() <= 1e-10 * l1);
    }

    #[test]
    fn invalid_inputs() {
        let sd = eigendecompose(&families::path(2).unwrap()).unwrap();
        let f = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(
            time_lr_norm(&sd, &f, &VertexSet::new(2, []), (0.0, 1.0), 2.0),
            Err(Error::EmptySubset)
        );
        assert!(time_lr_norm(&sd, &f, &VertexSet::new(2, [0]), (1.0, 1.0), 2.0).is_err());
        assert!(time_lr_norm(&sd, &f, &VertexSet::new(2, [0]), (0.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn interior_maximum_is_refined() {
        // Heat flowing from vertex 2 into D = {0} peaks at an interior time.
        let sd = eigendecompose(&families::path(3).unwrap()).unwrap();
        let d = VertexSet::new(3, [0]);
        let f = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let sup = time_lr_norm(&sd, &f, &d, (0.0, 10.0), f64::INFINITY).unwrap();
        let dense = (0..200_001)
            .map(|k| {
                let t = 10.0 * k as f64 / 200_000.0;
                sd.semigroup_apply(t, &f).unwrap()[0].abs()
            })
            .fold(0.0, f64::max);
        assert!(sup >= dense - 1e-12 && sup - dense < 1e-9);
    }
}
