//! Dirichlet sine eigenbasis on intervals and rectangles.
//!
//! A field is stored as the coefficients of the unnormalized modes
//! `prod_i sin(k_i pi x_i / L_i)`, `1 <= k_i <= N`, in lexicographic
//! multi-index order. Each mode is an exact eigenfunction of `-Laplacian`
//! with eigenvalue `sum_i (k_i pi / L_i)^2`, so every Sobolev norm below is
//! an exact finite sum.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    lengths: Vec<f64>,
    modes: usize,
    quadrature_size: usize,
    eigenvalues: Vec<f64>,
}

impl Basis {
    /// Basis with `modes` sine modes per axis on the box `prod (0, L_i)`.
    ///
    /// The physical grid used by [`to_physical`] defaults to `ceil(3N/2)`
    /// interior points per axis.
    pub fn new(lengths: &[f64], modes: usize) -> Result<Arc<Basis>> {
        Self::with_quadrature(lengths, modes, (3 * modes).div_ceil(2))
    }

    pub fn with_quadrature(lengths: &[f64], modes: usize, quadrature_size: usize) -> Result<Arc<Basis>> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(invalid("dim", "only 1D intervals and 2D rectangles are supported"));
        }
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(invalid("lengths", "must be positive and finite"));
        }
        if modes == 0 {
            return Err(invalid("modes", "need at least one mode per axis"));
        }
        if quadrature_size < modes {
            return Err(invalid("quadrature_size", "must be at least the number of modes"));
        }
        let axis_eig = |axis: usize, k: usize| {
            let w = k as f64 * PI / lengths[axis];
            w * w
        };
        let eigenvalues = match lengths.len() {
            1 => (1..=modes).map(|k| axis_eig(0, k)).collect(),
            _ => {
                let mut ev = Vec::with_capacity(modes * modes);
                for k0 in 1..=modes {
                    for k1 in 1..=modes {
                        ev.push(axis_eig(0, k0) + axis_eig(1, k1));
                    }
                }
                ev
            }
        };
        Ok(Arc::new(Basis { lengths: lengths.to_vec(), modes, quadrature_size, eigenvalues }))
    }

    /// Unit-less `(0, pi)` interval.
    pub fn interval(modes: usize) -> Arc<Basis> {
        Self::new(&[PI], modes).expect("valid default interval")
    }

    /// `(0, pi)^2`.
    pub fn square(modes: usize) -> Arc<Basis> {
        Self::new(&[PI, PI], modes).expect("valid default square")
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn quadrature_size(&self) -> usize {
        self.quadrature_size
    }

    /// Total number of modes, `N^dim`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `lambda_k` in lexicographic multi-index order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue, `sum_i (pi / L_i)^2`.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `prod_i L_i / 2`: the squared L2 norm of every basis mode.
    pub fn weight(&self) -> f64 {
        self.lengths.iter().map(|l| l / 2.0).product()
    }

    /// Multi-index (1-based per axis) of a flat coefficient index.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim() {
            1 => [flat + 1, 0],
            _ => [flat / self.modes + 1, flat % self.modes + 1],
        }
    }

    /// Largest per-axis wavenumber of a flat index.
    pub fn max_wavenumber(&self, flat: usize) -> usize {
        let [a, b] = self.multi_index(flat);
        a.max(b)
    }

    /// Sine coefficients of the constant function 1, truncated to this basis.
    pub fn constant_one(self: &Arc<Self>) -> SpectralField {
        let axis = |k: usize| if k % 2 == 1 { 4.0 / (PI * k as f64) } else { 0.0 };
        let coeffs = (0..self.len())
            .map(|i| {
                let [a, b] = self.multi_index(i);
                if self.dim() == 1 {
                    axis(a)
                } else {
                    axis(a) * axis(b)
                }
            })
            .collect();
        SpectralField { basis: self.clone(), coeffs }
    }

    pub(crate) fn same(a: &Arc<Basis>, b: &Arc<Basis>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

/// Which norm to take; see [`SpectralField::norm`] and [`State::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
    H2,
    H3,
    /// `(||grad u||^2 + ||ut||^2)^(1/2)`
    E,
    /// `(||grad ut||^2 + ||Lap u||^2)^(1/2)`
    E1,
    /// `(||grad Lap u||^2 + ||Lap ut||^2)^(1/2)`
    E2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        SpectralField { basis: basis.clone(), coeffs: vec![0.0; basis.len()] }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidGrid { expected: basis.len(), got: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { what: "coefficients" });
        }
        Ok(SpectralField { basis: basis.clone(), coeffs })
    }

    /// Field with a single unit mode; `k` is 1-based per axis.
    pub fn mode(basis: &Arc<Basis>, k: &[usize]) -> Self {
        let mut f = Self::zeros(basis);
        let n = basis.modes();
        let flat = match k {
            [a] => a - 1,
            [a, b] => (a - 1) * n + (b - 1),
            _ => panic!("multi-index must have dim entries"),
        };
        f.coeffs[flat] = 1.0;
        f
    }

    pub(crate) fn from_raw(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), basis.len());
        SpectralField { basis: basis.clone(), coeffs }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if Basis::same(&self.basis, &other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// `sum_k lambda_k^s c_k^2 w`
    pub(crate) fn sobolev_sq(&self, s: i32) -> f64 {
        let ev = self.basis.eigenvalues();
        self.coeffs.iter().zip(ev).map(|(c, l)| libm::pow(*l, s as f64) * c * c).sum::<f64>()
            * self.basis.weight()
    }

    pub fn norm(&self, kind: Norm) -> Result<f64> {
        let s = match kind {
            Norm::L2 => 0,
            Norm::H1 => 1,
            Norm::H2 => 2,
            Norm::H3 => 3,
            Norm::E | Norm::E1 | Norm::E2 => return Err(Error::NeedsState),
        };
        Ok(libm::sqrt(self.sobolev_sq(s)))
    }

    /// L2 inner product.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn dot_unchecked(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum::<f64>() * self.basis.weight()
    }

    pub fn laplacian(&self) -> SpectralField {
        let coeffs = self.coeffs.iter().zip(self.basis.eigenvalues()).map(|(c, l)| -l * c).collect();
        SpectralField { basis: self.basis.clone(), coeffs }
    }

    /// Solves `-Lap H = self` with homogeneous Dirichlet data.
    pub fn poisson_solve(&self) -> SpectralField {
        let coeffs = self.coeffs.iter().zip(self.basis.eigenvalues()).map(|(c, l)| c / l).collect();
        SpectralField { basis: self.basis.clone(), coeffs }
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        SpectralField { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| s * c).collect() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        Ok(self.axpy_unchecked(s, other))
    }

    pub(crate) fn axpy_unchecked(&self, s: f64, other: &SpectralField) -> SpectralField {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + s * b).collect();
        SpectralField { basis: self.basis.clone(), coeffs }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(-1.0, other)
    }

    /// Samples at the `M^dim` interior nodes `x_j = j L / (M + 1)`, `M` the
    /// basis quadrature size, in row-major order.
    pub fn to_physical(&self) -> Result<Vec<f64>> {
        if !self.is_finite() {
            return Err(Error::NonFinite { what: "coefficients" });
        }
        Ok(dst::synthesize(&self.basis, &self.coeffs))
    }

    /// Inverse of [`SpectralField::to_physical`] on the first `N` modes per
    /// axis (a type-I discrete sine transform).
    pub fn to_spectral(samples: &[f64], basis: &Arc<Basis>) -> Result<SpectralField> {
        let m = basis.quadrature_size();
        let expected = m.pow(basis.dim() as u32);
        if samples.len() != expected {
            return Err(Error::InvalidGrid { expected, got: samples.len() });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { what: "samples" });
        }
        Ok(SpectralField { basis: basis.clone(), coeffs: dst::analyze(basis, samples) })
    }

    /// Physical coordinates of the interior nodes along `axis`.
    pub fn physical_nodes(basis: &Basis, axis: usize) -> Vec<f64> {
        let m = basis.quadrature_size();
        let l = basis.lengths()[axis];
        (1..=m).map(|j| j as f64 * l / (m as f64 + 1.0)).collect()
    }
}

/// Phase-space point `(u, ut)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: SpectralField,
    pub ut: SpectralField,
}

impl State {
    pub fn new(u: SpectralField, ut: SpectralField) -> Result<Self> {
        u.check_same(&ut)?;
        Ok(State { u, ut })
    }

    pub fn zeros(basis: &Arc<Basis>) -> Self {
        State { u: SpectralField::zeros(basis), ut: SpectralField::zeros(basis) }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.u.basis()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.ut.is_finite()
    }

    pub fn norm(&self, kind: Norm) -> Result<f64> {
        let sq = match kind {
            Norm::E => self.u.sobolev_sq(1) + self.ut.sobolev_sq(0),
            Norm::E1 => self.ut.sobolev_sq(1) + self.u.sobolev_sq(2),
            Norm::E2 => self.u.sobolev_sq(3) + self.ut.sobolev_sq(2),
            _ => return Err(Error::NeedsField),
        };
        Ok(libm::sqrt(sq))
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        Ok(State { u: self.u.sub(&other.u)?, ut: self.ut.sub(&other.ut)? })
    }
}

/// Type-I discrete sine transform on the interior nodes, applied per axis.
mod dst {
    use super::*;

    fn table(n: usize, m: usize) -> Vec<f64> {
        // row j (0..m), column k (0..n)
        let h = PI / (m as f64 + 1.0);
        let mut t = Vec::with_capacity(m * n);
        for j in 1..=m {
            for k in 1..=n {
                t.push(libm::sin(h * (j * k) as f64));
            }
        }
        t
    }

    pub(super) fn synthesize(basis: &Basis, coeffs: &[f64]) -> Vec<f64> {
        let (n, m) = (basis.modes(), basis.quadrature_size());
        let s = table(n, m);
        match basis.dim() {
            1 => (0..m).map(|j| (0..n).map(|k| s[j * n + k] * coeffs[k]).sum()).collect(),
            _ => {
                // t[k0][j1] = sum_k1 c[k0][k1] s[j1][k1]
                let mut t = vec![0.0; n * m];
                for k0 in 0..n {
                    for j1 in 0..m {
                        t[k0 * m + j1] = (0..n).map(|k1| coeffs[k0 * n + k1] * s[j1 * n + k1]).sum();
                    }
                }
                let mut out = vec![0.0; m * m];
                for j0 in 0..m {
                    for j1 in 0..m {
                        out[j0 * m + j1] = (0..n).map(|k0| s[j0 * n + k0] * t[k0 * m + j1]).sum();
                    }
                }
                out
            }
        }
    }

    pub(super) fn analyze(basis: &Basis, samples: &[f64]) -> Vec<f64> {
        let (n, m) = (basis.modes(), basis.quadrature_size());
        let s = table(n, m);
        let scale = 2.0 / (m as f64 + 1.0);
        match basis.dim() {
            1 => (0..n).map(|k| scale * (0..m).map(|j| s[j * n + k] * samples[j]).sum::<f64>()).collect(),
            _ => {
                let mut r = vec![0.0; n * m];
                for k0 in 0..n {
                    for j1 in 0..m {
                        r[k0 * m + j1] =
                            scale * (0..m).map(|j0| s[j0 * n + k0] * samples[j0 * m + j1]).sum::<f64>();
                    }
                }
                let mut out = vec![0.0; n * n];
                for k0 in 0..n {
                    for k1 in 0..n {
                        out[k0 * n + k1] = scale * (0..m).map(|j1| s[j1 * n + k1] * r[k0 * m + j1]).sum::<f64>();
                    }
                }
                out
            }
        }
    }
}
