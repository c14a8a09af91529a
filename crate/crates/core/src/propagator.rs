//! Closed-form exponentials of real 2x2 matrices.
//!
//! With `s = tr(A)/2` and `d = s^2 - det(A)`, `(A - sI)^2 = d I`, so
//! `exp(tA) = C I + D (A - sI)` where `(C, D)` are
//! `e^{st}(cosh wt, sinh(wt)/w)`, `e^{st}(cos wt, sin(wt)/w)` or
//! `e^{st}(1, t)` for `d > 0`, `d < 0`, `d = 0`.

pub type Mat2 = [[f64; 2]; 2];

/// Branch of the characteristic roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Roots {
    RealDistinct,
    Complex,
    Double,
}

/// `exp(t A)`; `double_root` forces the confluent branch.
pub fn expm2(a: Mat2, t: f64, double_root: bool) -> Mat2 {
    let s = 0.5 * (a[0][0] + a[1][1]);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = s * s - det;
    let (c, d) = if double_root {
        let e = libm::exp(s * t);
        (e, t * e)
    } else if disc < 0.0 {
        let w = libm::sqrt(-disc);
        let e = libm::exp(s * t);
        (e * libm::cos(w * t), e * libm::sin(w * t) / w)
    } else if disc == 0.0 {
        let e = libm::exp(s * t);
        (e, t * e)
    } else {
        let w = libm::sqrt(disc);
        // r_plus * r_minus = det; pick the root without cancellation first
        let (rp, rm) = if s < 0.0 {
            let rm = s - w;
            (det / rm, rm)
        } else if s > 0.0 {
            let rp = s + w;
            (rp, det / rp)
        } else {
            (w, -w)
        };
        let (ep, em) = (libm::exp(rp * t), libm::exp(rm * t));
        let dd = if w * t < 0.5 { em * libm::expm1(2.0 * w * t) / (2.0 * w) } else { (ep - em) / (2.0 * w) };
        (0.5 * (ep + em), dd)
    };
    [[c + d * (a[0][0] - s), d * a[0][1]], [d * a[1][0], c + d * (a[1][1] - s)]]
}

/// Classifies `mu^2 + gamma lambda mu + lambda = 0`; the double-root branch
/// is taken when `|gamma^2 lambda - 4| < 1e-9`.
pub fn wave_roots(lambda: f64, gamma: f64) -> Roots {
    let crit = gamma * gamma * lambda - 4.0;
    if libm::fabs(crit) < 1e-9 {
        Roots::Double
    } else if crit > 0.0 {
        Roots::RealDistinct
    } else {
        Roots::Complex
    }
}

/// Exact flow over `dt` of `u'' + gamma lambda u' + lambda u = 0` acting on
/// `(u, u')`.
pub fn linear_mode_propagator(lambda: f64, gamma: f64, dt: f64) -> Mat2 {
    let a = [[0.0, 1.0], [-lambda, -gamma * lambda]];
    expm2(a, dt, wave_roots(lambda, gamma) == Roots::Double)
}

/// Slowest decay rate `min |Re mu|` of the roots of
/// `mu^2 + gamma lambda mu + lambda = 0`.
pub fn mode_decay_rate(lambda: f64, gamma: f64) -> f64 {
    let s = 0.5 * gamma * lambda;
    match wave_roots(lambda, gamma) {
        Roots::Complex | Roots::Double => s,
        Roots::RealDistinct => {
            let w = libm::sqrt(s * s - lambda);
            // slower root -s + w = lambda / (s + w)
            lambda / (s + w)
        }
    }
}

pub fn apply(m: &Mat2, x: f64, y: f64) -> (f64, f64) {
    (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y)
}
