use std::sync::Arc;

use sdwave_core::attractor::{
    absorbing_set_estimate, attractor_sample, decompose, linear_decay_fit, AbsorbingOutcome,
};
use sdwave_core::diagnostics::{dissipativity_probe, identity_residuals};
use sdwave_core::dynamics::{simulate, Problem};
use sdwave_core::ensemble::{generate, EnsembleSpec, Load};
use sdwave_core::fhn::{compare, FhnState};
use sdwave_core::nonlinearity::{NonlinearPair, Polynomial};
use sdwave_core::propagator::{apply, linear_mode_propagator};
use sdwave_core::{Basis, Norm, SpectralField, State};

fn smooth(b: &Arc<Basis>) -> State {
    let mut s = State::zeros(b);
    for i in 0..b.len() {
        let k = (i + 1) as f64;
        s.u.coeffs_mut()[i] = 1.5 * if i % 2 == 0 { 1.0 } else { -1.0 } / k.powi(4);
        s.ut.coeffs_mut()[i] = 1.0 / k.powi(4);
    }
    s
}

fn presets(b: &Arc<Basis>) -> Vec<(&'static str, Problem)> {
    let h = SpectralField::mode(b, &[1]);
    vec![
        ("van_der_pol", Problem::new(NonlinearPair::van_der_pol(), 1.0, h.clone()).unwrap()),
        ("fhn_cubic", Problem::new(NonlinearPair::fhn_cubic(), 1.0, h.clone()).unwrap()),
        ("monotone", Problem::new(NonlinearPair::new(&[0.0, 0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5, h).unwrap()),
    ]
}

#[test]
fn second_order_on_every_preset() {
    let b = Basis::interval(24);
    let s0 = smooth(&b);
    for (name, p) in presets(&b) {
        let reference = simulate(&p, &s0, 1.0, 1e-3 / 8.0, usize::MAX).unwrap();
        let mut errors = Vec::new();
        let mut residuals = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let tr = simulate(&p, &s0, 1.0, dt, 1).unwrap();
            errors.push(tr.last().sub(reference.last()).unwrap().norm(Norm::E1).unwrap());
            let r = identity_residuals(&p, &tr).unwrap();
            residuals.push([r.energy.signed.abs(), r.multiplier.signed.abs(), r.identity_1_8.signed.abs()]);
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.2..=4.8).contains(&ratio), "{name}: error ratio {ratio}");
        }
        for which in 0..3 {
            for w in residuals.windows(2) {
                let ratio = w[0][which] / w[1][which];
                assert!((3.2..=4.8).contains(&ratio), "{name}: residual {which} ratio {ratio}");
            }
        }
    }
}

#[test]
fn linear_problem_matches_propagator_composition() {
    let b = Basis::interval(6);
    let gamma = 0.7;
    let p = Problem::unforced(&b, NonlinearPair::new_unchecked(&[], &[]), gamma).unwrap();
    let s0 = smooth(&b);
    let (dt, n) = (1e-2, 150);
    let tr = simulate(&p, &s0, dt * n as f64, dt, n).unwrap();
    for i in 0..b.len() {
        let m = linear_mode_propagator(b.eigenvalues()[i], gamma, dt);
        let (mut x, mut y) = (s0.u.coeffs()[i], s0.ut.coeffs()[i]);
        for _ in 0..n {
            (x, y) = apply(&m, x, y);
        }
        assert!((tr.last().u.coeffs()[i] - x).abs() < 1e-12);
        assert!((tr.last().ut.coeffs()[i] - y).abs() < 1e-12);
    }
}

#[test]
fn reconstruction_on_every_preset() {
    let b = Basis::interval(16);
    for (name, p) in presets(&b) {
        let tr = simulate(&p, &smooth(&b), 2.0, 1e-3, 1).unwrap();
        let err = decompose(&p, &tr).unwrap().max_reconstruction_error();
        assert!(err < 1e-11, "{name}: {err}");
    }
}

#[test]
fn pure_linear_decay_rate() {
    // Above gamma = sqrt(2) the slowest rate approaches 1/gamma through the
    // highest modes, which smooth data barely excites.
    let b = Basis::interval(16);
    for gamma in [0.5, 1.0, 1.3] {
        let p = Problem::new(NonlinearPair::new_unchecked(&[], &[]), gamma, SpectralField::mode(&b, &[2])).unwrap();
        let fit = linear_decay_fit(&p, &smooth(&b), 40.0, 1e-2).unwrap();
        let rate = fit.rate.unwrap();
        assert!((rate - fit.predicted_rate).abs() < 0.05 * fit.predicted_rate, "gamma {gamma}: {fit:?}");
    }
}

#[test]
fn fhn_compare_converges_in_dt() {
    let phi = Polynomial::new(&[0.0, -1.0, 0.0, 1.0]);
    let b = Basis::interval(16);
    let mut ic = FhnState::zeros(&b);
    ic.u.coeffs_mut()[0] = 0.5;
    let a = compare(&phi, &ic, 1.0, 4e-3, 5).unwrap().sup_error;
    let c = compare(&phi, &ic, 1.0, 2e-3, 5).unwrap().sup_error;
    assert!((3.2..=4.8).contains(&(a / c)), "{}", a / c);
}

#[test]
fn larger_data_enters_later_or_stays_inside() {
    let b = Basis::interval(16);
    let p = Problem::new(NonlinearPair::van_der_pol(), 1.0, SpectralField::mode(&b, &[1])).unwrap();
    let base = generate(
        &b,
        &EnsembleSpec { seed: 5, exponent: 3.0, scales: vec![1.0], per_scale: 3, load: Load::Velocity, normalize_e1: true },
    )
    .unwrap();
    let mut ics = base.clone();
    for s in &base {
        ics.push(State { u: s.u.scaled(20.0), ut: s.ut.scaled(20.0) });
    }
    let rep = dissipativity_probe(&p, &ics, 30.0, 2e-3, 50).unwrap();
    assert!(!rep.any_blow_up);
    let ball = 2.0 * rep.r_inf;
    for i in 0..base.len() {
        let (small, large) = (&rep.members[i], &rep.members[i + base.len()]);
        let later = large.entry_time.unwrap() >= small.entry_time.unwrap();
        assert!(later || large.tail_max <= ball, "member {i}");
    }
}

#[test]
fn attractor_samples_lie_in_the_absorbing_ball() {
    let b = Basis::interval(16);
    let p = Problem::new(NonlinearPair::van_der_pol(), 1.0, SpectralField::mode(&b, &[1])).unwrap();
    let ics = generate(
        &b,
        &EnsembleSpec { seed: 9, exponent: 3.0, scales: vec![1.0, 10.0], per_scale: 3, load: Load::Velocity, normalize_e1: true },
    )
    .unwrap();
    let (t_end, dt) = (30.0, 2e-3);
    let AbsorbingOutcome::Estimate(est) = absorbing_set_estimate(&p, &ics, t_end, dt, 50).unwrap() else {
        panic!("blow-up");
    };
    assert!(est.ensemble_ok);
    let sample = attractor_sample(&p, &ics, t_end, 10.0, dt, 100).unwrap();
    assert!(!sample.snapshots.is_empty());
    for s in &sample.snapshots {
        assert!(s.e1 <= est.radius * (1.0 + 1e-3), "ic {} t {}: {} > {}", s.ic, s.t, s.e1, est.radius);
    }
}
