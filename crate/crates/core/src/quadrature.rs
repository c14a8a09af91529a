//! Alias-free Galerkin projection of polynomial composites.
//!
//! A field with `N` sine modes per axis is a `2L`-periodic trigonometric
//! polynomial of degree `N`; a polynomial composite of total degree `d` in
//! such fields (and their gradients) has degree at most `dN`. Sampling on the
//! full period with `P = 2(M + 1)` points, `M = dN`, recovers its Fourier
//! coefficients exactly. The interior points of the first half-period are
//! the `M`-point sine grid; the second half carries the mirrored values that
//! even composites (`u^2`, `|grad u|^2`, ...) need, since those are cosine
//! series whose sine projection a plain sine transform would alias.
//!
//! From the exact Fourier coefficients, integrals over the half period
//! `(0, L)` against `1` and `sin(k pi x / L)` are closed-form, so both the
//! projection and the domain integral are precomputed as weight tables.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::basis::{Basis, SpectralField};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Axis {
    points: usize,
    /// `sin(k pi x_j / L)`, row-major `[j][k]`.
    sin: Vec<f64>,
    /// `(k pi / L) cos(k pi x_j / L)`, row-major `[j][k]`.
    dcos: Vec<f64>,
    /// Projection weights, row-major `[k][j]`.
    proj: Vec<f64>,
    /// Integration weights over `(0, L)`.
    integ: Vec<f64>,
}

impl Axis {
    fn new(length: f64, modes: usize, m: usize) -> Axis {
        let p = 2 * (m + 1);
        let pf = p as f64;
        let phase = |a: usize, j: usize| 2.0 * PI * ((a * j) % p) as f64 / pf;
        let mut sin = Vec::with_capacity(p * modes);
        let mut dcos = Vec::with_capacity(p * modes);
        for j in 0..p {
            for k in 1..=modes {
                sin.push(libm::sin(phase(k, j)));
                dcos.push(k as f64 * PI / length * libm::cos(phase(k, j)));
            }
        }
        // phi(x) = a_0 + sum_m a_m cos(m pi x/L) + b_m sin(m pi x/L), m < P/2.
        // (2/L) int_0^L cos(m pi x/L) sin(k pi x/L) dx = (2/pi) k (1-(-1)^(k+m)) / (k^2-m^2), m != k.
        let half = p / 2;
        let mut proj = vec![0.0; modes * p];
        for k in 1..=modes {
            let kf = k as f64;
            for j in 0..p {
                let mut w = 2.0 / pf * libm::sin(phase(k, j));
                let mut acc = 0.0;
                for m in 0..half {
                    if (k + m) % 2 == 0 {
                        continue;
                    }
                    let a = if m == 0 { 1.0 / pf } else { 2.0 / pf * libm::cos(phase(m, j)) };
                    let mf = m as f64;
                    acc += a * 2.0 * kf / (kf * kf - mf * mf);
                }
                w += 2.0 / PI * acc;
                proj[(k - 1) * p + j] = w;
            }
        }
        // int_0^L phi = a_0 L + sum_{m odd} b_m 2L / (m pi)
        let integ = (0..p)
            .map(|j| {
                let mut w = length / pf;
                for m in (1..half).step_by(2) {
                    w += 2.0 / pf * libm::sin(phase(m, j)) * 2.0 * length / (m as f64 * PI);
                }
                w
            })
            .collect();
        Axis { points: p, sin, dcos, proj, integ }
    }
}

/// Physical grid on which composites up to a given polynomial degree are
/// projected and integrated without aliasing.
#[derive(Debug, Clone)]
pub struct ExactGrid {
    basis: Arc<Basis>,
    degree: usize,
    axes: Vec<Axis>,
}

impl ExactGrid {
    /// Grid exact for composites of total degree `<= degree` (at least 1).
    pub fn new(basis: &Arc<Basis>, degree: usize) -> ExactGrid {
        let degree = degree.max(1);
        let n = basis.modes();
        let axes = basis.lengths().iter().map(|l| Axis::new(*l, n, degree * n)).collect();
        ExactGrid { basis: basis.clone(), degree, axes }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Largest composite degree projected exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Interior sine-grid size `M = degree * N` per axis.
    pub fn interior_size(&self) -> usize {
        self.degree * self.basis.modes()
    }

    /// Number of samples on the full-period grid.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, field: &SpectralField) -> Result<()> {
        if Basis::same(&self.basis, field.basis()) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// Errors unless a composite of `needed` degree is resolved.
    pub fn require(&self, needed: usize) -> Result<()> {
        if needed > self.degree {
            Err(Error::Aliasing { needed_degree: needed, grid_degree: self.degree })
        } else {
            Ok(())
        }
    }

    /// Samples of `u`.
    pub fn synth(&self, field: &SpectralField) -> Vec<f64> {
        self.synth_with(field.coeffs(), [false, false])
    }

    /// Samples of `du/dx_axis`.
    pub fn synth_partial(&self, field: &SpectralField, axis: usize) -> Vec<f64> {
        let mut d = [false, false];
        d[axis] = true;
        self.synth_with(field.coeffs(), d)
    }

    /// Samples of `|grad u|^2`.
    pub fn grad_sq(&self, field: &SpectralField) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for axis in 0..self.basis.dim() {
            for (o, d) in out.iter_mut().zip(self.synth_partial(field, axis)) {
                *o += d * d;
            }
        }
        out
    }

    fn synth_with(&self, c: &[f64], deriv: [bool; 2]) -> Vec<f64> {
        let n = self.basis.modes();
        let table = |axis: usize| {
            let a = &self.axes[axis];
            if deriv[axis] {
                &a.dcos
            } else {
                &a.sin
            }
        };
        match self.axes.len() {
            1 => {
                let t = table(0);
                t.chunks_exact(n).map(|row| dot(row, c)).collect()
            }
            _ => {
                let (p0, p1) = (self.axes[0].points, self.axes[1].points);
                let (t0, t1) = (table(0), table(1));
                // tmp[k0][j1] = sum_k1 c[k0][k1] t1[j1][k1]
                let mut tmp = vec![0.0; n * p1];
                for k0 in 0..n {
                    let ck = &c[k0 * n..(k0 + 1) * n];
                    for (j1, row) in t1.chunks_exact(n).enumerate() {
                        tmp[k0 * p1 + j1] = dot(row, ck);
                    }
                }
                let mut out = vec![0.0; p0 * p1];
                for (j0, row) in t0.chunks_exact(n).enumerate() {
                    let o = &mut out[j0 * p1..(j0 + 1) * p1];
                    for (k0, s) in row.iter().enumerate() {
                        axpy_slice(o, *s, &tmp[k0 * p1..(k0 + 1) * p1]);
                    }
                }
                out
            }
        }
    }

    /// Galerkin projection of grid samples onto the basis.
    ///
    /// Exact when the samples come from a composite of degree at most
    /// [`ExactGrid::degree`]; use [`ExactGrid::project_checked`] to enforce it.
    pub fn project(&self, values: &[f64]) -> SpectralField {
        assert_eq!(values.len(), self.len(), "sample count does not match grid");
        let n = self.basis.modes();
        let coeffs = match self.axes.len() {
            1 => self.axes[0].proj.chunks_exact(self.axes[0].points).map(|w| dot(w, values)).collect(),
            _ => {
                let (p0, p1) = (self.axes[0].points, self.axes[1].points);
                // r[k0][j1] = sum_j0 W0[k0][j0] phi[j0][j1]
                let mut r = vec![0.0; n * p1];
                for (k0, w) in self.axes[0].proj.chunks_exact(p0).enumerate() {
                    let rk = &mut r[k0 * p1..(k0 + 1) * p1];
                    for (j0, wj) in w.iter().enumerate() {
                        axpy_slice(rk, *wj, &values[j0 * p1..(j0 + 1) * p1]);
                    }
                }
                let mut out = vec![0.0; n * n];
                for k0 in 0..n {
                    let rk = &r[k0 * p1..(k0 + 1) * p1];
                    for (k1, w) in self.axes[1].proj.chunks_exact(p1).enumerate() {
                        out[k0 * n + k1] = dot(w, rk);
                    }
                }
                out
            }
        };
        SpectralField::from_raw(&self.basis, coeffs)
    }

    pub fn project_checked(&self, values: &[f64], degree: usize) -> Result<SpectralField> {
        self.require(degree)?;
        if values.len() != self.len() {
            return Err(Error::InvalidGrid { expected: self.len(), got: values.len() });
        }
        Ok(self.project(values))
    }

    /// `int_Omega phi dx` for grid samples of `phi`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "sample count does not match grid");
        match self.axes.len() {
            1 => dot(&self.axes[0].integ, values),
            _ => {
                let p1 = self.axes[1].points;
                self.axes[0]
                    .integ
                    .iter()
                    .enumerate()
                    .map(|(j0, w)| w * dot(&self.axes[1].integ, &values[j0 * p1..(j0 + 1) * p1]))
                    .sum()
            }
        }
    }

    /// Exact projection of the pointwise product `a * b`.
    pub fn product_project(&self, a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
        self.check(a)?;
        self.check(b)?;
        self.require(2)?;
        let va = self.synth(a);
        let vb = self.synth(b);
        let prod: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x * y).collect();
        Ok(self.project(&prod))
    }

    /// Projection of `phi(u)` for an arbitrary pointwise map.
    ///
    /// Only exact when `phi` is a polynomial of degree `<= self.degree()`;
    /// otherwise this is a dealiased approximation whose quality depends on
    /// the grid.
    pub fn project_map(&self, u: &SpectralField, phi: impl Fn(f64) -> f64) -> Result<SpectralField> {
        self.check(u)?;
        let vals: Vec<f64> = self.synth(u).into_iter().map(phi).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "composite samples" });
        }
        Ok(self.project(&vals))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy_slice(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Composite Simpson rule on (0, pi), independent of the grid tables.
    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = PI / n as f64;
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn sin_squared_projection_matches_quadrature() {
        let b = Basis::interval(8);
        let g = ExactGrid::new(&b, 2);
        let s1 = SpectralField::mode(&b, &[1]);
        let p = g.product_project(&s1, &s1).unwrap();
        for k in 1..=8 {
            let q = 2.0 / PI * simpson(|x| libm::sin(x).powi(2) * libm::sin(k as f64 * x), 4000);
            assert_abs_diff_eq!(p.coeffs()[k - 1], q, epsilon = 1e-12);
        }
    }

    #[test]
    fn product_with_zero_and_one() {
        let b = Basis::interval(6);
        let g = ExactGrid::new(&b, 2);
        let s1 = SpectralField::mode(&b, &[1]);
        let z = SpectralField::zeros(&b);
        assert!(g.product_project(&s1, &z).unwrap().coeffs().iter().all(|c| *c == 0.0));
        let id = g.project_map(&s1, |u| u).unwrap();
        for (a, e) in id.coeffs().iter().zip(s1.coeffs()) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-14);
        }
    }

    #[test]
    fn aliasing_is_reported() {
        let b = Basis::interval(4);
        let g = ExactGrid::new(&b, 3);
        assert!(g.require(3).is_ok());
        assert_eq!(g.require(4), Err(Error::Aliasing { needed_degree: 4, grid_degree: 3 }));
        let vals = vec![0.0; g.len()];
        assert!(g.project_checked(&vals, 5).is_err());
    }

    #[test]
    fn integrates_even_and_odd_composites() {
        let b = Basis::interval(4);
        let g = ExactGrid::new(&b, 4);
        let s1 = SpectralField::mode(&b, &[1]);
        let v = g.synth(&s1);
        // int sin = 2, int sin^2 = pi/2, int sin^3 = 4/3, int sin^4 = 3 pi / 8
        let powers = [(1, 2.0), (2, PI / 2.0), (3, 4.0 / 3.0), (4, 3.0 * PI / 8.0)];
        for (p, exact) in powers {
            let vals: Vec<f64> = v.iter().map(|x| x.powi(p)).collect();
            assert_abs_diff_eq!(g.integrate(&vals), exact, epsilon = 1e-13);
        }
        let gs = g.grad_sq(&s1);
        assert_abs_diff_eq!(g.integrate(&gs), PI / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn two_dimensional_projection_and_integral() {
        let b = Basis::new(&[PI, 2.0], 4).unwrap();
        let g = ExactGrid::new(&b, 2);
        let mut f = SpectralField::mode(&b, &[1, 2]);
        f.coeffs_mut()[5] = 0.3;
        let v = g.synth(&f);
        let back = g.project(&v);
        for (a, e) in back.coeffs().iter().zip(f.coeffs()) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-13);
        }
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        assert_abs_diff_eq!(g.integrate(&sq), f.norm(crate::basis::Norm::L2).unwrap().powi(2), epsilon = 1e-12);
        let gs = g.grad_sq(&f);
        assert_abs_diff_eq!(g.integrate(&gs), f.norm(crate::basis::Norm::H1).unwrap().powi(2), epsilon = 1e-11);
    }
}
