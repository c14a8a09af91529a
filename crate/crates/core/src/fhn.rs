//! FitzHugh-Nagumo system `ut = Lap u - phi(u) - v`, `vt = u - v` and its
//! reduction to the damped wave equation with `psi(u) = u + phi(u)`:
//! `utt - Lap ut + psi'(u) ut - Lap u + psi(u) = 0`.
//!
//! The simulator here shares only the 2x2 exponential with the wave solver.

use alloc::vec::Vec;

use crate::basis::{Basis, Norm, SpectralField, State};
use crate::dynamics::{simulate, step_count, Problem};
use crate::error::{Error, HypothesisViolation, Result};
use crate::nonlinearity::{NonlinearPair, Polynomial};
use crate::propagator::{apply, expm2, Mat2};
use crate::quadrature::ExactGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct FhnState {
    pub u: SpectralField,
    pub v: SpectralField,
}

impl FhnState {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<FhnState> {
        if !Basis::same(u.basis(), v.basis()) {
            return Err(Error::BasisMismatch);
        }
        Ok(FhnState { u, v })
    }

    pub fn zeros(basis: &alloc::sync::Arc<Basis>) -> FhnState {
        FhnState { u: SpectralField::zeros(basis), v: SpectralField::zeros(basis) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FhnTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<FhnState>,
    /// Time of the last finite state, if the run blew up.
    pub blow_up: Option<f64>,
}

/// Strang splitting: exact flow of the linear part (including the linear
/// coefficient of `phi`) per mode, explicit midpoint for the rest of
/// `-phi(u)` with `v` frozen.
#[derive(Debug, Clone)]
pub struct FhnStepper {
    half: Vec<Mat2>,
    reaction: Polynomial,
    grid: Option<ExactGrid>,
    dt: f64,
}

impl FhnStepper {
    pub fn new(phi: &Polynomial, basis: &alloc::sync::Arc<Basis>, dt: f64) -> Result<FhnStepper> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(crate::error::invalid("dt", "must be positive"));
        }
        let lin = phi.coeffs().get(1).copied().unwrap_or(0.0);
        let mut rest = phi.coeffs().to_vec();
        if rest.len() > 1 {
            rest[1] = 0.0;
        }
        let reaction = Polynomial::new(&rest);
        let half = basis
            .eigenvalues()
            .iter()
            .map(|l| expm2([[-l - lin, -1.0], [1.0, -1.0]], 0.5 * dt, false))
            .collect();
        let grid = (!reaction.is_zero()).then(|| ExactGrid::new(basis, reaction.degree().max(1)));
        Ok(FhnStepper { half, reaction, grid, dt })
    }

    fn linear_half(&self, s: &mut FhnState) {
        for ((a, b), m) in s.u.coeffs_mut().iter_mut().zip(s.v.coeffs_mut().iter_mut()).zip(&self.half) {
            (*a, *b) = apply(m, *a, *b);
        }
    }

    pub fn step(&self, state: &FhnState) -> Result<FhnState> {
        let mut s = state.clone();
        self.linear_half(&mut s);
        if let Some(grid) = &self.grid {
            let rhs = |u: &SpectralField| grid.project(&self.reaction.eval_slice(&grid.synth(u))).scaled(-1.0);
            let k1 = rhs(&s.u);
            let mid = s.u.axpy(0.5 * self.dt, &k1)?;
            s.u = s.u.axpy(self.dt, &rhs(&mid))?;
        }
        self.linear_half(&mut s);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::NonFinite { what: "fhn state" })
        }
    }
}

pub fn simulate_fhn(phi: &Polynomial, state0: &FhnState, t_end: f64, dt: f64, record_every: usize) -> Result<FhnTrajectory> {
    if record_every == 0 {
        return Err(crate::error::invalid("record_every", "must be at least 1"));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(crate::error::invalid("T", "must be positive"));
    }
    let stepper = FhnStepper::new(phi, state0.u.basis(), dt)?;
    let n = step_count(t_end, dt);
    let mut traj = FhnTrajectory { times: alloc::vec![0.0], states: alloc::vec![state0.clone()], blow_up: None };
    let mut s = state0.clone();
    for i in 1..=n {
        match stepper.step(&s) {
            Ok(next) => s = next,
            Err(Error::NonFinite { .. }) => {
                traj.blow_up = Some((i - 1) as f64 * dt);
                return Ok(traj);
            }
            Err(e) => return Err(e),
        }
        if i % record_every == 0 || i == n {
            traj.times.push(i as f64 * dt);
            traj.states.push(s.clone());
        }
    }
    Ok(traj)
}

/// `psi = u + phi` as `(f, g) = (psi', psi)`, checked against the growth
/// hypotheses.
pub fn reduced_pair(phi: &Polynomial) -> core::result::Result<NonlinearPair, HypothesisViolation> {
    let psi = phi.add(&Polynomial::monomial(1.0, 1));
    NonlinearPair::new(psi.derivative().coeffs(), psi.coeffs())
}

/// The damped wave problem (gamma = 1, h = 0) equivalent to the system.
pub fn reduce_to_wave(phi: &Polynomial, basis: &alloc::sync::Arc<Basis>) -> Result<Problem> {
    Problem::unforced(basis, reduced_pair(phi)?, 1.0)
}

/// `ut` of the FHN system: `Lap u - P phi(u) - v`.
pub fn fhn_velocity(phi: &Polynomial, state: &FhnState) -> Result<SpectralField> {
    let grid = ExactGrid::new(state.u.basis(), phi.degree().max(1));
    let p = grid.project(&phi.eval_slice(&grid.synth(&state.u)));
    state.u.laplacian().sub(&p)?.sub(&state.v)
}

/// Wave initial data `(u0, Lap u0 - phi(u0) - v0)`.
pub fn wave_initial(phi: &Polynomial, state: &FhnState) -> Result<State> {
    State::new(state.u.clone(), fhn_velocity(phi, state)?)
}

/// L2 norm of the difference between `utt` obtained by differentiating the
/// FHN system and `utt` of the reduced wave equation, at one state.
pub fn reduction_defect(phi: &Polynomial, state: &FhnState) -> Result<f64> {
    let basis = state.u.basis();
    let psi = phi.add(&Polynomial::monomial(1.0, 1));
    let dphi = phi.derivative();
    let dpsi = psi.derivative();
    let deg = (dphi.degree() + 1).max(psi.degree()).max(1);
    let grid = ExactGrid::new(basis, deg);
    let ug = grid.synth(&state.u);
    let ut = fhn_velocity(phi, state)?;
    let utg = grid.synth(&ut);
    let prod = |p: &Polynomial| {
        let vals: Vec<f64> = p.eval_slice(&ug).iter().zip(&utg).map(|(a, b)| a * b).collect();
        grid.project(&vals)
    };
    // d/dt of the first equation, with vt = u - v
    let fhn_utt = ut.laplacian().sub(&prod(&dphi))?.sub(&state.u.sub(&state.v)?)?;
    let wave_utt =
        ut.laplacian().axpy(1.0, &state.u.laplacian())?.sub(&prod(&dpsi))?.sub(&grid.project(&psi.eval_slice(&ug)))?;
    fhn_utt.sub(&wave_utt)?.norm(Norm::L2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub sup_error: f64,
    pub per_record_errors: Vec<f64>,
    /// Sup of `|ut_wave - (Lap u - phi(u) - v)_fhn|_L2`.
    pub velocity_consistency: f64,
    pub times: Vec<f64>,
    pub dt: f64,
    pub modes: usize,
}

/// Runs both formulations from matching data and compares `u`.
pub fn compare(phi: &Polynomial, ic: &FhnState, t_end: f64, dt: f64, record_every: usize) -> Result<CompareReport> {
    let basis = ic.u.basis().clone();
    let problem = reduce_to_wave(phi, &basis)?;
    let wave0 = wave_initial(phi, ic)?;
    let fhn = simulate_fhn(phi, ic, t_end, dt, record_every)?;
    let wave = simulate(&problem, &wave0, t_end, dt, record_every)?;
    if let Some(t) = fhn.blow_up {
        return Err(Error::BlowUp { time: t });
    }
    if let Some(b) = wave.blow_up {
        return Err(Error::BlowUp { time: b.time });
    }
    let mut per_record_errors = Vec::with_capacity(fhn.states.len());
    let mut velocity_consistency: f64 = 0.0;
    for (f, w) in fhn.states.iter().zip(&wave.states) {
        per_record_errors.push(f.u.sub(&w.u)?.norm(Norm::L2)?);
        velocity_consistency = velocity_consistency.max(w.ut.sub(&fhn_velocity(phi, f)?)?.norm(Norm::L2)?);
    }
    Ok(CompareReport {
        sup_error: per_record_errors.iter().copied().fold(0.0, f64::max),
        per_record_errors,
        velocity_consistency,
        times: fhn.times,
        dt,
        modes: basis.modes(),
    })
}
