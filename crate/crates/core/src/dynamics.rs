//! Time integration of the Galerkin truncation of
//!
//! ```text
//! utt + f(u) ut - gamma Lap ut - Lap u + g(u) = h,   u = 0 on the boundary
//! ```
//!
//! One step is a Strang splitting: half a step of the exact linear flow
//! (per mode, with the constant forcing absorbed through the shift
//! `u -> u - h_k / lambda_k`), one explicit-midpoint step of
//! `(u, ut)' = (0, -f(u) ut - g(u))`, and another linear half step.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::basis::{Basis, Norm, SpectralField, State};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::NonlinearPair;
use crate::propagator::{apply, linear_mode_propagator, Mat2};
use crate::quadrature::ExactGrid;

/// Galerkin problem data.
#[derive(Debug, Clone)]
pub struct Problem {
    basis: Arc<Basis>,
    pair: NonlinearPair,
    gamma: f64,
    h: SpectralField,
}

impl Problem {
    /// `h` is the physical forcing; the constant removed from `g` during
    /// normalization is subtracted from it here.
    pub fn new(pair: NonlinearPair, gamma: f64, h: SpectralField) -> Result<Problem> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !h.is_finite() {
            return Err(Error::NonFinite { what: "forcing" });
        }
        let basis = h.basis().clone();
        let h = if pair.g_shift() != 0.0 {
            h.axpy_unchecked(-pair.g_shift(), &basis.constant_one())
        } else {
            h
        };
        Ok(Problem { basis, pair, gamma, h })
    }

    /// Unforced problem.
    pub fn unforced(basis: &Arc<Basis>, pair: NonlinearPair, gamma: f64) -> Result<Problem> {
        Problem::new(pair, gamma, SpectralField::zeros(basis))
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn pair(&self) -> &NonlinearPair {
        &self.pair
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Effective forcing (after absorbing `g(0)`).
    pub fn forcing(&self) -> &SpectralField {
        &self.h
    }

    /// Same data with `f = g = 0`: the linear part alone.
    pub fn linear_part(&self) -> Problem {
        Problem {
            basis: self.basis.clone(),
            pair: NonlinearPair::new_unchecked(&[], &[]),
            gamma: self.gamma,
            h: self.h.clone(),
        }
    }

    /// Same operator with a different forcing.
    pub fn with_forcing(&self, h: SpectralField) -> Problem {
        Problem { basis: self.basis.clone(), pair: self.pair.clone(), gamma: self.gamma, h }
    }

    pub(crate) fn is_linear(&self) -> bool {
        self.pair.f().is_zero() && self.pair.g().is_zero()
    }

    fn check_state(&self, s: &State) -> Result<()> {
        if Basis::same(&self.basis, s.basis()) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }
}

/// Precomputed one-step map for a fixed `dt`.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    problem: &'a Problem,
    dt: f64,
    half: Vec<Mat2>,
    shift: Vec<f64>,
    grid: Option<ExactGrid>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, dt: f64) -> Result<Stepper<'a>> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let ev = problem.basis.eigenvalues();
        let half = ev.iter().map(|l| linear_mode_propagator(*l, problem.gamma, 0.5 * dt)).collect();
        let shift = problem.h.coeffs().iter().zip(ev).map(|(h, l)| h / l).collect();
        let grid =
            (!problem.is_linear()).then(|| ExactGrid::new(&problem.basis, problem.pair.forcing_degree()));
        Ok(Stepper { problem, dt, half, shift, grid })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    fn linear_half(&self, u: &mut [f64], ut: &mut [f64]) {
        for (((uk, vk), m), hk) in u.iter_mut().zip(ut.iter_mut()).zip(&self.half).zip(&self.shift) {
            let (a, b) = apply(m, *uk - hk, *vk);
            *uk = a + hk;
            *vk = b;
        }
    }

    /// Velocity increment of the nonlinear substep: the change of `ut` after
    /// the first linear half step, with `u` frozen there. Zero for linear
    /// problems.
    pub fn kick(&self, state: &State) -> Result<SpectralField> {
        self.problem.check_state(state)?;
        let Some(grid) = &self.grid else {
            return Ok(SpectralField::zeros(&self.problem.basis));
        };
        let mut u = state.u.clone();
        let mut ut = state.ut.clone();
        self.linear_half(u.coeffs_mut(), ut.coeffs_mut());
        let pair = &self.problem.pair;
        let ug = grid.synth(&u);
        let fu = pair.f().eval_slice(&ug);
        let gu = pair.g().eval_slice(&ug);
        let rhs = |w: &SpectralField| {
            let wg = grid.synth(w);
            let vals: Vec<f64> = fu.iter().zip(&wg).zip(&gu).map(|((f, w), g)| -(f * w) - g).collect();
            grid.project(&vals)
        };
        let k1 = rhs(&ut);
        let mid = ut.axpy_unchecked(0.5 * self.dt, &k1);
        Ok(rhs(&mid).scaled(self.dt))
    }

    /// Linear half step, `ut += kick`, linear half step.
    pub fn step_kicked(&self, state: &State, kick: &SpectralField) -> Result<State> {
        self.problem.check_state(state)?;
        if !Basis::same(&self.problem.basis, kick.basis()) {
            return Err(Error::BasisMismatch);
        }
        let mut u = state.u.clone();
        let mut ut = state.ut.clone();
        self.linear_half(u.coeffs_mut(), ut.coeffs_mut());
        for (a, k) in ut.coeffs_mut().iter_mut().zip(kick.coeffs()) {
            *a += k;
        }
        self.linear_half(u.coeffs_mut(), ut.coeffs_mut());
        let next = State { u, ut };
        if next.is_finite() {
            Ok(next)
        } else {
            Err(Error::NonFinite { what: "state" })
        }
    }

    /// Advances `state` by one step. A non-finite result is an error; the
    /// input state is untouched.
    pub fn step(&self, state: &State) -> Result<State> {
        let kick = self.kick(state)?;
        self.step_kicked(state, &kick)
    }
}

/// One step of size `dt`.
pub fn step(problem: &Problem, state: &State, dt: f64) -> Result<State> {
    Stepper::new(problem, dt)?.step(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowUp {
    /// Time of the last finite state.
    pub time: f64,
    pub last_state: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Global step index of every record.
    pub steps: Vec<usize>,
    pub dt: f64,
    pub blow_up: Option<BlowUp>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    /// Whether consecutive records are single steps apart.
    pub fn is_step_granular(&self) -> bool {
        self.steps.windows(2).all(|w| w[1] == w[0] + 1)
    }

    pub fn norms(&self, kind: Norm) -> Result<Vec<f64>> {
        self.states.iter().map(|s| s.norm(kind)).collect()
    }
}

/// Number of steps covering `[0, t_end]`: `t_end / dt` rounded when within
/// `1e-9` relative of an integer, else rounded up.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    let r = t_end / dt;
    let n = libm::round(r);
    if libm::fabs(r - n) <= 1e-9 * r.max(1.0) {
        n as usize
    } else {
        libm::ceil(r) as usize
    }
}

/// Integrates from `state0` over `[0, t_end]`, calling `visit(step, t, state)`
/// on the initial state, every `record_every`-th step and the final step.
/// Returns the final state, or the blow-up record.
pub fn simulate_with(
    problem: &Problem,
    state0: &State,
    t_end: f64,
    dt: f64,
    record_every: usize,
    mut visit: impl FnMut(usize, f64, &State),
) -> Result<core::result::Result<State, BlowUp>> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid("T", "must be positive"));
    }
    if record_every == 0 {
        return Err(invalid("record_every", "must be at least 1"));
    }
    problem.check_state(state0)?;
    if !state0.is_finite() {
        return Err(Error::NonFinite { what: "initial state" });
    }
    let stepper = Stepper::new(problem, dt)?;
    let n = step_count(t_end, dt);
    let mut state = state0.clone();
    visit(0, 0.0, &state);
    for i in 1..=n {
        match stepper.step(&state) {
            Ok(next) => state = next,
            Err(Error::NonFinite { .. }) => {
                return Ok(Err(BlowUp { time: (i - 1) as f64 * dt, last_state: state }));
            }
            Err(e) => return Err(e),
        }
        if i % record_every == 0 || i == n {
            visit(i, i as f64 * dt, &state);
        }
    }
    Ok(Ok(state))
}

/// Trajectory over `[0, t_end]` recorded every `record_every` steps. On
/// blow-up the trajectory is truncated and flagged.
pub fn simulate(problem: &Problem, state0: &State, t_end: f64, dt: f64, record_every: usize) -> Result<Trajectory> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), steps: Vec::new(), dt, blow_up: None };
    let end = simulate_with(problem, state0, t_end, dt, record_every, |i, t, s| {
        traj.steps.push(i);
        traj.times.push(t);
        traj.states.push(s.clone());
    })?;
    traj.blow_up = end.err();
    Ok(traj)
}

/// Residual `-Lap u + P g(u) - h` of the truncated stationary problem.
fn stationary_residual(problem: &Problem, grid: &ExactGrid, u: &SpectralField) -> SpectralField {
    let g = grid.project(&problem.pair.g().eval_slice(&grid.synth(u)));
    let lap = u.laplacian();
    let coeffs = lap.coeffs().iter().zip(g.coeffs()).zip(problem.h.coeffs()).map(|((l, g), h)| -l + g - h).collect();
    SpectralField::from_raw(&problem.basis, coeffs)
}

/// Equilibrium `-Lap u + g(u) = h` of the truncated system by damped Newton
/// iteration from `(-Lap)^{-1} h`; converged when the L2 residual is below
/// `1e-10`.
pub fn stationary_solve(problem: &Problem) -> Result<SpectralField> {
    const TOL: f64 = 1e-10;
    const MAX_ITER: usize = 60;
    let basis = &problem.basis;
    let n = basis.len();
    let grid = ExactGrid::new(basis, problem.pair.g().degree().max(1));
    let mut u = problem.h.poisson_solve();
    let mut r = stationary_residual(problem, &grid, &u);
    let mut rn = r.norm(Norm::L2)?;
    let unit_cols: Vec<Vec<f64>> = (0..n)
        .map(|l| {
            let mut c = alloc::vec![0.0; n];
            c[l] = 1.0;
            grid.synth(&SpectralField::from_raw(basis, c))
        })
        .collect();
    for iter in 0..MAX_ITER {
        if rn < TOL {
            return Ok(u);
        }
        let gp = problem.pair.g_prime().eval_slice(&grid.synth(&u));
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for (l, col) in unit_cols.iter().enumerate() {
            let vals: Vec<f64> = gp.iter().zip(col).map(|(a, b)| a * b).collect();
            let pc = grid.project(&vals);
            for (k, v) in pc.coeffs().iter().enumerate() {
                jac[(k, l)] = *v;
            }
            jac[(l, l)] += basis.eigenvalues()[l];
        }
        let rhs = DVector::from_column_slice(r.coeffs());
        let delta = jac.lu().solve(&rhs).ok_or(Error::NoConvergence { iterations: iter, residual: rn })?;
        let delta = SpectralField::from_raw(basis, delta.iter().copied().collect());
        let mut damping = 1.0;
        loop {
            let trial = u.axpy_unchecked(-damping, &delta);
            let tr = stationary_residual(problem, &grid, &trial);
            let tn = tr.norm(Norm::L2)?;
            if tn < rn || damping < 1e-4 {
                u = trial;
                r = tr;
                rn = tn;
                break;
            }
            damping *= 0.5;
        }
    }
    if rn < TOL {
        Ok(u)
    } else {
        Err(Error::NoConvergence { iterations: MAX_ITER, residual: rn })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Basis;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn sine_forcing(b: &Arc<Basis>) -> SpectralField {
        SpectralField::mode(b, &[1])
    }

    #[test]
    fn linear_step_matches_propagator() {
        let b = Basis::interval(4);
        let p = Problem::unforced(&b, NonlinearPair::new_unchecked(&[], &[]), 1.0).unwrap();
        let mut s = State::zeros(&b);
        s.u.coeffs_mut()[1] = 0.7;
        s.ut.coeffs_mut()[1] = -0.2;
        let next = step(&p, &s, 0.05).unwrap();
        let m = linear_mode_propagator(4.0, 1.0, 0.05);
        let (a, v) = apply(&m, 0.7, -0.2);
        assert_abs_diff_eq!(next.u.coeffs()[1], a, epsilon = 1e-14);
        assert_abs_diff_eq!(next.ut.coeffs()[1], v, epsilon = 1e-14);
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let b = Basis::interval(8);
        let p = Problem::unforced(&b, NonlinearPair::van_der_pol(), 1.0).unwrap();
        let traj = simulate(&p, &State::zeros(&b), 1.0, 0.01, 10).unwrap();
        assert!(traj.states.iter().all(|s| s.u.coeffs().iter().chain(s.ut.coeffs()).all(|c| *c == 0.0)));
        assert_eq!(traj.times.len(), 11);
        assert!(traj.blow_up.is_none());
    }

    #[test]
    fn restart_is_bitwise_identical() {
        let b = Basis::interval(8);
        let p = Problem::new(NonlinearPair::van_der_pol(), 1.0, sine_forcing(&b)).unwrap();
        let mut s0 = State::zeros(&b);
        s0.u.coeffs_mut()[0] = 0.3;
        s0.ut.coeffs_mut()[2] = 0.4;
        let full = simulate(&p, &s0, 0.2, 0.01, 1).unwrap();
        let first = simulate(&p, &s0, 0.1, 0.01, 1).unwrap();
        let second = simulate(&p, first.last(), 0.1, 0.01, 1).unwrap();
        assert_eq!(full.last(), second.last());
        assert_eq!(full.states[10], *first.last());
    }

    #[test]
    fn linear_single_mode_closed_form() {
        let b = Basis::interval(4);
        let p = Problem::unforced(&b, NonlinearPair::new_unchecked(&[], &[]), 1.0).unwrap();
        let mut s0 = State::zeros(&b);
        s0.u.coeffs_mut()[0] = 1.0;
        let traj = simulate(&p, &s0, 1.0, 1e-3, 1).unwrap();
        let r3 = 3f64.sqrt();
        let sup = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(t, s)| {
                let exact = (-t / 2.0).exp() * ((r3 / 2.0 * t).cos() + (r3 / 2.0 * t).sin() / r3);
                (s.u.coeffs()[0] - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(sup < 1e-12, "sup error {sup}");
    }

    #[test]
    fn forced_linear_flow_relaxes_to_poisson_solution() {
        let b = Basis::interval(4);
        let h = sine_forcing(&b).scaled(2.0);
        let p = Problem::new(NonlinearPair::new_unchecked(&[], &[]), 1.0, h.clone()).unwrap();
        let traj = simulate(&p, &State::zeros(&b), 60.0, 0.05, 1200).unwrap();
        let hh = h.poisson_solve();
        assert!(traj.last().u.sub(&hh).unwrap().norm(Norm::H2).unwrap() < 1e-10);
    }

    #[test]
    fn g_shift_moves_into_forcing() {
        let b = Basis::interval(4);
        let pair = NonlinearPair::new(&[0.0, 0.0, 1.0], &[1.5, 1.0]).unwrap();
        let p = Problem::unforced(&b, pair, 1.0).unwrap();
        assert_abs_diff_eq!(p.forcing().coeffs()[0], -1.5 * 4.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        let b = Basis::interval(4);
        assert!(Problem::unforced(&b, NonlinearPair::van_der_pol(), 0.0).is_err());
        let p = Problem::unforced(&b, NonlinearPair::van_der_pol(), 1.0).unwrap();
        assert!(step(&p, &State::zeros(&b), 0.0).is_err());
        assert!(simulate(&p, &State::zeros(&b), 1.0, 0.1, 0).is_err());
        assert_eq!(step(&p, &State::zeros(&Basis::interval(3)), 0.1), Err(Error::BasisMismatch));
    }

    #[test]
    fn blow_up_is_flagged() {
        // f = u^3 - u violates the damping hypothesis; strongly negative u runs away
        let b = Basis::interval(8);
        let pair = NonlinearPair::new_unchecked(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0]);
        let p = Problem::unforced(&b, pair, 1.0).unwrap();
        let mut s0 = State::zeros(&b);
        s0.ut.coeffs_mut()[0] = -60.0;
        let traj = simulate(&p, &s0, 5.0, 1e-3, 100).unwrap();
        let bu = traj.blow_up.expect("runaway solution");
        assert!(bu.last_state.is_finite());
        assert!(bu.time < 5.0);
    }

    #[test]
    fn stationary_linear_cases() {
        let b = Basis::interval(6);
        let h = sine_forcing(&b);
        let p = Problem::new(NonlinearPair::new_unchecked(&[1.0], &[]), 1.0, h.clone()).unwrap();
        assert_eq!(stationary_solve(&p).unwrap(), h.poisson_solve());
        let p = Problem::new(NonlinearPair::van_der_pol(), 1.0, h).unwrap();
        let u = stationary_solve(&p).unwrap();
        assert_abs_diff_eq!(u.coeffs()[0], 0.5, epsilon = 1e-14);
        assert!(u.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
        let p = Problem::unforced(&b, NonlinearPair::fhn_cubic(), 1.0).unwrap();
        assert!(stationary_solve(&p).unwrap().coeffs().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn stationary_cubic_is_nearly_fixed_by_step() {
        // the splitting does not preserve equilibria exactly; the one-step
        // defect is third order in dt
        let b = Basis::interval(12);
        let h = sine_forcing(&b).scaled(3.0);
        let p = Problem::new(NonlinearPair::fhn_cubic(), 1.0, h).unwrap();
        let u = stationary_solve(&p).unwrap();
        let s = State { u: u.clone(), ut: SpectralField::zeros(&b) };
        let moved = |dt: f64| step(&p, &s, dt).unwrap().sub(&s).unwrap().norm(Norm::E).unwrap();
        let (a, c) = (moved(2e-3), moved(1e-3));
        assert!(c < 1e-7, "moved {c}");
        let order = (a / c).log2();
        assert!((order - 3.0).abs() < 0.2, "order {order}");
    }
}
