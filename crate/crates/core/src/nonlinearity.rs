//! Polynomial nonlinearities `f` (damping coefficient) and `g` (interaction),
//! their antiderivatives, and the growth hypotheses they must satisfy:
//!
//! ```text
//! -C + alpha |u|^p <= f(u)  <= C (1 + |u|^p)
//! -C + alpha |u|^q <= g'(u) <= C (1 + |u|^q),    p, q >= 0,  p + q > 0
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::SpectralField;
use crate::error::{HypothesisViolation, Result};
use crate::quadrature::ExactGrid;

/// Real polynomial, `coeffs[j]` multiplying `u^j`. Trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: &[f64]) -> Polynomial {
        let mut coeffs = coeffs.to_vec();
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Polynomial {
        Polynomial { coeffs: Vec::new() }
    }

    /// The monomial `u^n` scaled by `c`.
    pub fn monomial(c: f64, n: usize) -> Polynomial {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = c;
        Polynomial::new(&coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs: Vec<f64> = self.coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect();
        Polynomial::new(&coeffs)
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Polynomial {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(self.coeffs.iter().enumerate().map(|(j, c)| c / (j as f64 + 1.0)));
        Polynomial::new(&coeffs)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs: Vec<f64> = (0..n)
            .map(|j| self.coeffs.get(j).copied().unwrap_or(0.0) + other.coeffs.get(j).copied().unwrap_or(0.0))
            .collect();
        Polynomial::new(&coeffs)
    }

    /// Maps every sample in place.
    pub fn eval_slice(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|u| self.eval(*u)).collect()
    }
}

/// Which member of a [`NonlinearPair`] to compose with a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    F,
    /// `F(u) = int_0^u f`.
    BigF,
    G,
    /// `G(u) = int_0^u g`.
    BigG,
    GPrime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearPair {
    f: Polynomial,
    big_f: Polynomial,
    g: Polynomial,
    big_g: Polynomial,
    g_prime: Polynomial,
    p: usize,
    q: usize,
    g_shift: f64,
}

impl NonlinearPair {
    /// Builds the pair, normalizing `g(0) = 0` and checking the growth
    /// hypotheses from the leading terms.
    ///
    /// The removed constant `g(0)` is returned by [`NonlinearPair::g_shift`];
    /// callers absorb it into the forcing (`h - g(0)`).
    pub fn new(f_coeffs: &[f64], g_coeffs: &[f64]) -> core::result::Result<Self, HypothesisViolation> {
        let pair = Self::new_unchecked(f_coeffs, g_coeffs);
        pair.check_hypotheses()?;
        Ok(pair)
    }

    /// Same as [`NonlinearPair::new`] without the hypothesis gate. Solutions
    /// may then blow up in finite time; meant for experiments only.
    pub fn new_unchecked(f_coeffs: &[f64], g_coeffs: &[f64]) -> Self {
        let f = Polynomial::new(f_coeffs);
        let mut g_raw = Polynomial::new(g_coeffs).coeffs().to_vec();
        let g_shift = g_raw.first().copied().unwrap_or(0.0);
        if let Some(c0) = g_raw.first_mut() {
            *c0 = 0.0;
        }
        let g = Polynomial::new(&g_raw);
        let g_prime = g.derivative();
        NonlinearPair {
            big_f: f.antiderivative(),
            big_g: g.antiderivative(),
            p: f.degree(),
            q: g_prime.degree(),
            f,
            g,
            g_prime,
            g_shift,
        }
    }

    fn check_hypotheses(&self) -> core::result::Result<(), HypothesisViolation> {
        if self.p + self.q == 0 {
            return Err(HypothesisViolation::ZeroGrowth);
        }
        if self.p > 0 {
            let lead = self.f.leading();
            if self.p % 2 == 1 {
                let side = if lead > 0.0 { "-inf" } else { "+inf" };
                return Err(HypothesisViolation::DampingLowerBound {
                    detail: format!("f has odd degree {} so f(u) -> -inf as u -> {side}", self.p),
                });
            }
            if lead < 0.0 {
                return Err(HypothesisViolation::DampingLowerBound {
                    detail: format!("leading coefficient of f is negative ({lead})"),
                });
            }
        }
        if self.q > 0 {
            let lead = self.g_prime.leading();
            if self.q % 2 == 1 {
                let side = if lead > 0.0 { "-inf" } else { "+inf" };
                return Err(HypothesisViolation::InteractionLowerBound {
                    detail: format!("g' has odd degree {} so g'(u) -> -inf as u -> {side}", self.q),
                });
            }
            if lead < 0.0 {
                return Err(HypothesisViolation::InteractionLowerBound {
                    detail: format!("leading coefficient of g' is negative ({lead})"),
                });
            }
        }
        Ok(())
    }

    /// Classical Van der Pol damping `f = u^2 - 1` with `g = u`.
    pub fn van_der_pol() -> Self {
        Self::new(&[-1.0, 0.0, 1.0], &[0.0, 1.0]).expect("preset satisfies the hypotheses")
    }

    /// Reduced FitzHugh-Nagumo pair for `phi = u^3 - u`: `psi = u^3`,
    /// `f = 3u^2`, `g = u^3`.
    pub fn fhn_cubic() -> Self {
        Self::new(&[0.0, 0.0, 3.0], &[0.0, 0.0, 0.0, 1.0]).expect("preset satisfies the hypotheses")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "van_der_pol" => Some(Self::van_der_pol()),
            "fhn_cubic" => Some(Self::fhn_cubic()),
            _ => None,
        }
    }

    pub fn f(&self) -> &Polynomial {
        &self.f
    }

    pub fn big_f(&self) -> &Polynomial {
        &self.big_f
    }

    pub fn g(&self) -> &Polynomial {
        &self.g
    }

    pub fn big_g(&self) -> &Polynomial {
        &self.big_g
    }

    pub fn g_prime(&self) -> &Polynomial {
        &self.g_prime
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Constant removed from `g` so that `g(0) = 0`.
    pub fn g_shift(&self) -> f64 {
        self.g_shift
    }

    pub fn component(&self, which: Component) -> &Polynomial {
        match which {
            Component::F => &self.f,
            Component::BigF => &self.big_f,
            Component::G => &self.g,
            Component::BigG => &self.big_g,
            Component::GPrime => &self.g_prime,
        }
    }

    /// Total degree of the stepper forcing `f(u) ut + g(u)`.
    pub fn forcing_degree(&self) -> usize {
        (self.f.degree() + 1).max(self.g.degree())
    }

    /// Degree of the richest composite appearing in the diagnostics.
    pub fn diagnostics_degree(&self) -> usize {
        let (df, dg) = (self.f.degree(), self.g.degree());
        [
            df + 2,                         // (f(u) ut, ut), (f(u) ut, u)
            df.max(self.g_prime.degree()) + 2, // (f + g', |grad u|^2)
            dg + 1,                         // (g(u), u)
            self.big_g.degree(),
            self.big_f.degree(),
        ]
        .into_iter()
        .max()
        .unwrap_or(1)
        .max(2)
    }

    /// Galerkin projection of `which(u)`.
    pub fn eval_composite(&self, which: Component, u: &SpectralField, grid: &ExactGrid) -> Result<SpectralField> {
        let poly = self.component(which);
        grid.require(poly.degree())?;
        grid.project_map(u, |x| poly.eval(x))
    }
}

/// Outcome of one inequality of the growth conditions on a sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Sample points where the inequality fails.
    pub witnesses: Vec<f64>,
    /// Whether the leading-term (|u| -> infinity) behaviour is admissible.
    pub asymptotic_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub c: f64,
    pub alpha: f64,
    pub checks: Vec<InequalityCheck>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed && c.asymptotic_ok)
    }
}

const GROWTH_SAMPLES: usize = 4001;

/// Checks the growth bounds with given constants on `[lo, hi]`.
pub fn check_growth(pair: &NonlinearPair, c: f64, alpha: f64, range: (f64, f64)) -> GrowthReport {
    let (lo, hi) = range;
    let samples: Vec<f64> =
        (0..GROWTH_SAMPLES).map(|i| lo + (hi - lo) * i as f64 / (GROWTH_SAMPLES - 1) as f64).collect();
    let pw = |u: f64, e: usize| libm::pow(libm::fabs(u), e as f64);
    let lower_ok = |poly: &Polynomial, e: usize| e == 0 || (e.is_multiple_of(2) && poly.leading() > 0.0);
    let check = |name: &'static str, ok: &dyn Fn(f64) -> bool, asymptotic_ok: bool| {
        let witnesses: Vec<f64> = samples.iter().copied().filter(|u| !ok(*u)).collect();
        InequalityCheck { name, passed: witnesses.is_empty(), witnesses, asymptotic_ok }
    };
    let (f, gp, p, q) = (pair.f(), pair.g_prime(), pair.p(), pair.q());
    let checks = vec![
        check("-C+alpha|u|^p <= f(u)", &|u| -c + alpha * pw(u, p) <= f.eval(u), lower_ok(f, p)),
        check("f(u) <= C(1+|u|^p)", &|u| f.eval(u) <= c * (1.0 + pw(u, p)), true),
        check("-C+alpha|u|^q <= g'(u)", &|u| -c + alpha * pw(u, q) <= gp.eval(u), lower_ok(gp, q)),
        check("g'(u) <= C(1+|u|^q)", &|u| gp.eval(u) <= c * (1.0 + pw(u, q)), true),
    ];
    GrowthReport { c, alpha, checks }
}

/// Searches admissible `(C, alpha)` on `[lo, hi]`.
///
/// `alpha` is half the smallest relevant leading coefficient; `C` is then the
/// smallest constant making all four sampled inequalities hold.
pub fn find_admissible(pair: &NonlinearPair, range: (f64, f64)) -> Option<GrowthReport> {
    let lead = |poly: &Polynomial, e: usize| if e == 0 { 1.0 } else { poly.leading() };
    let alpha = 0.5 * lead(pair.f(), pair.p()).min(lead(pair.g_prime(), pair.q()));
    if alpha.is_nan() || alpha <= 0.0 {
        return None;
    }
    let (lo, hi) = range;
    let pw = |u: f64, e: usize| libm::pow(libm::fabs(u), e as f64);
    let mut c: f64 = 1e-12;
    for i in 0..GROWTH_SAMPLES {
        let u = lo + (hi - lo) * i as f64 / (GROWTH_SAMPLES - 1) as f64;
        let (fu, gpu) = (pair.f().eval(u), pair.g_prime().eval(u));
        c = c
            .max(alpha * pw(u, pair.p()) - fu)
            .max(fu / (1.0 + pw(u, pair.p())))
            .max(alpha * pw(u, pair.q()) - gpu)
            .max(gpu / (1.0 + pw(u, pair.q())));
    }
    // round up slightly so that boundary samples pass strictly
    let report = check_growth(pair, c * (1.0 + 1e-9) + 1e-12, alpha, range);
    report.passed().then_some(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Basis;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    #[test]
    fn van_der_pol_preset() {
        let vdp = NonlinearPair::van_der_pol();
        assert_eq!(vdp.big_f().coeffs(), &[0.0, -1.0, 0.0, 1.0 / 3.0]);
        assert_eq!(vdp.big_g().coeffs(), &[0.0, 0.0, 0.5]);
        assert_eq!((vdp.p(), vdp.q()), (2, 0));
        assert_abs_diff_eq!(vdp.big_f().eval(2.0), 8.0 / 3.0 - 2.0, epsilon = 1e-15);
        assert_eq!(vdp.g_shift(), 0.0);
    }

    #[test]
    fn fhn_preset() {
        let p = NonlinearPair::fhn_cubic();
        assert_eq!(p.big_f().coeffs(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.big_g().coeffs(), &[0.0, 0.0, 0.0, 0.0, 0.25]);
        assert_eq!((p.p(), p.q()), (2, 2));
    }

    #[test]
    fn hypothesis_gate() {
        assert_eq!(NonlinearPair::new(&[1.0], &[0.0, 1.0]), Err(HypothesisViolation::ZeroGrowth));
        assert_eq!(NonlinearPair::new(&[], &[0.0, 2.0]), Err(HypothesisViolation::ZeroGrowth));
        // odd-degree damping u^3 - u is unbounded below as u -> -inf
        let e = NonlinearPair::new(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0]).unwrap_err();
        assert_eq!(e.inequality(), "-C+alpha|u|^p <= f(u)");
        let e = NonlinearPair::new(&[0.0, 0.0, -1.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(e, HypothesisViolation::DampingLowerBound { .. }));
        let e = NonlinearPair::new(&[1.0], &[0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(e, HypothesisViolation::InteractionLowerBound { .. }));
        let e = NonlinearPair::new(&[1.0], &[0.0, 0.0, 0.0, -1.0]).unwrap_err();
        assert_eq!(e.inequality(), "-C+alpha|u|^q <= g'(u)");
        // f constant with cubic g is fine
        assert!(NonlinearPair::new(&[-3.0], &[0.0, 0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn g_is_normalized() {
        let p = NonlinearPair::new(&[0.0, 0.0, 1.0], &[2.5, 1.0]).unwrap();
        assert_eq!(p.g_shift(), 2.5);
        assert_eq!(p.g().eval(0.0), 0.0);
        assert_eq!(p.big_g().eval(0.0), 0.0);
    }

    #[test]
    fn growth_check_for_presets() {
        let vdp = NonlinearPair::van_der_pol();
        assert!(check_growth(&vdp, 1.0, 0.5, (-10.0, 10.0)).passed());
        assert!(find_admissible(&vdp, (-10.0, 10.0)).is_some());
        assert!(find_admissible(&NonlinearPair::fhn_cubic(), (-10.0, 10.0)).is_some());
        // constant-derivative g: g' = 1 >= -C + alpha
        let lin = NonlinearPair::new(&[0.0, 0.0, 1.0], &[0.0, 1.0]).unwrap();
        let r = check_growth(&lin, 0.5, 1.0, (-3.0, 3.0));
        assert!(r.checks[2].passed);
    }

    #[test]
    fn growth_check_reports_negative_damping() {
        let bad = NonlinearPair::new_unchecked(&[0.0, 0.0, -1.0], &[0.0, 1.0]);
        let r = check_growth(&bad, 1.0, 0.5, (-10.0, 10.0));
        assert!(!r.checks[0].passed && !r.checks[0].asymptotic_ok);
        assert!(r.checks[0].witnesses.iter().any(|u| u.abs() > 1.0));
        assert!(find_admissible(&bad, (-10.0, 10.0)).is_none());
    }

    #[test]
    fn composites_of_sin() {
        let b = Basis::interval(8);
        let vdp = NonlinearPair::van_der_pol();
        let grid = ExactGrid::new(&b, vdp.diagnostics_degree());
        let s1 = SpectralField::mode(&b, &[1]);
        let g = vdp.eval_composite(Component::G, &s1, &grid).unwrap();
        for (a, e) in g.coeffs().iter().zip(s1.coeffs()) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-14);
        }
        // sin^2 x - 1 is a cosine series; its sine projection is checked by Simpson
        let f = vdp.eval_composite(Component::F, &s1, &grid).unwrap();
        let simpson = |k: f64| {
            let n = 6000;
            let h = PI / n as f64;
            let fx = |x: f64| (libm::sin(x).powi(2) - 1.0) * libm::sin(k * x);
            let mut s = fx(0.0) + fx(PI);
            for i in 1..n {
                s += fx(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            2.0 / PI * s * h / 3.0
        };
        for k in 1..=8 {
            assert_abs_diff_eq!(f.coeffs()[k - 1], simpson(k as f64), epsilon = 1e-12);
        }
        let z = SpectralField::zeros(&b);
        for which in [Component::BigF, Component::G, Component::BigG] {
            assert!(vdp.eval_composite(which, &z, &grid).unwrap().coeffs().iter().all(|c| c.abs() < 1e-15));
        }
    }

    #[test]
    fn cubic_composite_matches_identity() {
        // sin^3 x = (3 sin x - sin 3x) / 4
        let b = Basis::interval(6);
        let pair = NonlinearPair::new(&[0.0, 0.0, 1.0], &[0.0, -1.0, 0.0, 1.0]).unwrap();
        let grid = ExactGrid::new(&b, 3);
        let g = pair.eval_composite(Component::G, &SpectralField::mode(&b, &[1]), &grid).unwrap();
        let expected = [0.75 - 1.0, 0.0, -0.25, 0.0, 0.0, 0.0];
        for (a, e) in g.coeffs().iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-14);
        }
        let coarse = ExactGrid::new(&b, 2);
        assert!(pair.eval_composite(Component::BigG, &SpectralField::mode(&b, &[1]), &coarse).is_err());
    }

    proptest! {
        #[test]
        fn antiderivatives_by_finite_differences(
            f in proptest::collection::vec(-3.0f64..3.0, 1..5),
            g in proptest::collection::vec(-3.0f64..3.0, 1..5),
            u in -2.0f64..2.0,
        ) {
            let pair = NonlinearPair::new_unchecked(&f, &g);
            let h = 1e-5;
            let d_big_f = (pair.big_f().eval(u + h) - pair.big_f().eval(u - h)) / (2.0 * h);
            let d_big_g = (pair.big_g().eval(u + h) - pair.big_g().eval(u - h)) / (2.0 * h);
            prop_assert!((d_big_f - pair.f().eval(u)).abs() <= 1e-8 * (1.0 + pair.f().eval(u).abs()));
            prop_assert!((d_big_g - pair.g().eval(u)).abs() <= 1e-8 * (1.0 + pair.g().eval(u).abs()));
            for (a, b) in [(pair.big_f().derivative(), pair.f()), (pair.big_g().derivative(), pair.g())] {
                prop_assert_eq!(a.coeffs().len(), b.coeffs().len());
                for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                    prop_assert!((x - y).abs() <= 1e-15 * y.abs());
                }
            }
        }
    }
}
