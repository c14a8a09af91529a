//! Splitting `u = v + w` into the linear response `v` (driven by `h`, same
//! initial data) and the remainder `w` (driven by the nonlinear terms, zero
//! initial data), decay of `v` to the steady state, smoothing of `w`, and
//! sampling of the long-time set.

use alloc::vec::Vec;

use crate::basis::{Norm, SpectralField, State};
use crate::diagnostics::{envelope_member, EnvelopeMember};
use crate::dynamics::{simulate, simulate_with, step_count, Problem, Stepper, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::fit::line_fit;
use crate::propagator::mode_decay_rate;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub v: Trajectory,
    pub w: Trajectory,
    /// Steady state `(-Lap)^{-1} h` of the linear part.
    pub steady: SpectralField,
    /// `|u - (v + w)|_E` per record.
    pub reconstruction_error: Vec<f64>,
}

impl Decomposition {
    pub fn max_reconstruction_error(&self) -> f64 {
        self.reconstruction_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Decomposes a step-granular trajectory of `problem`.
///
/// `v` is advanced by the exact linear flow. `w` solves
/// `wtt - gamma Lap wt - Lap w = -P(f(u) ut + g(u))` by the same splitting
/// as `u`, with the forcing sampled at the splitting's intermediate state
/// recomputed from the stored `u`.
pub fn decompose(problem: &Problem, traj: &Trajectory) -> Result<Decomposition> {
    if traj.is_empty() || !traj.is_step_granular() {
        return Err(Error::NotContiguous);
    }
    let dt = traj.dt;
    let full = Stepper::new(problem, dt)?;
    let linear = problem.linear_part();
    let lin = Stepper::new(&linear, dt)?;
    let homogeneous = linear.with_forcing(SpectralField::zeros(problem.basis()));
    let hom = Stepper::new(&homogeneous, dt)?;

    let n = traj.len();
    let mut v_states = Vec::with_capacity(n);
    let mut w_states = Vec::with_capacity(n);
    v_states.push(traj.states[0].clone());
    w_states.push(State::zeros(problem.basis()));
    for i in 1..n {
        v_states.push(lin.step(&v_states[i - 1])?);
        let kick = full.kick(&traj.states[i - 1])?;
        w_states.push(hom.step_kicked(&w_states[i - 1], &kick)?);
    }
    let reconstruction_error = traj
        .states
        .iter()
        .zip(v_states.iter().zip(&w_states))
        .map(|(u, (v, w))| {
            let gap = State { u: u.u.sub(&v.u)?.sub(&w.u)?, ut: u.ut.sub(&v.ut)?.sub(&w.ut)? };
            gap.norm(Norm::E)
        })
        .collect::<Result<Vec<_>>>()?;
    let shell = |states| Trajectory {
        times: traj.times.clone(),
        states,
        steps: traj.steps.clone(),
        dt,
        blow_up: None,
    };
    Ok(Decomposition {
        v: shell(v_states),
        w: shell(w_states),
        steady: problem.forcing().poisson_solve(),
        reconstruction_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Fitted exponential rate; `None` when the norm vanishes or too few
    /// samples lie above the floor.
    pub rate: Option<f64>,
    pub predicted_rate: f64,
    pub window: (f64, f64),
    pub r2: f64,
    pub samples: usize,
    /// Fewer than two decades of decay over the record.
    pub insufficient_decay: bool,
}

/// Smallest decay rate over the modes of the linear operator.
pub fn predicted_decay_rate(problem: &Problem) -> f64 {
    problem.basis().eigenvalues().iter().map(|l| mode_decay_rate(*l, problem.gamma())).fold(f64::INFINITY, f64::min)
}

const DECAY_FLOOR: f64 = 1e-13;
const MIN_FIT_SAMPLES: usize = 10;

/// Fits the decay of `|xi_v(t) - (H, 0)|_E1` for the linear part of
/// `problem` from `xi0`, by least squares on the log-norm over the trailing
/// half of the samples above `1e-13`.
pub fn linear_decay_fit(problem: &Problem, xi0: &State, t_end: f64, dt: f64) -> Result<DecayFit> {
    let linear = problem.linear_part();
    let n = step_count(t_end, dt);
    let record_every = (n / 2000).max(1);
    let steady = State { u: problem.forcing().poisson_solve(), ut: SpectralField::zeros(problem.basis()) };
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let mut err = None;
    simulate_with(&linear, xi0, t_end, dt, record_every, |_, t, s| match s.sub(&steady).and_then(|d| d.norm(Norm::E1)) {
        Ok(v) => {
            times.push(t);
            norms.push(v);
        }
        Err(e) => err = Some(e),
    })?
    .map_err(|b| Error::BlowUp { time: b.time })?;
    if let Some(e) = err {
        return Err(e);
    }
    let predicted_rate = predicted_decay_rate(problem);
    let last_valid = norms.iter().rposition(|v| *v > DECAY_FLOOR);
    let empty = DecayFit { rate: None, predicted_rate, window: (0.0, 0.0), r2: 0.0, samples: 0, insufficient_decay: true };
    let Some(last) = last_valid else {
        return Ok(empty);
    };
    let t_last = times[last];
    let start = 0.5 * t_last;
    let (x, y): (Vec<f64>, Vec<f64>) = times[..=last]
        .iter()
        .zip(&norms[..=last])
        .filter(|(t, v)| **t >= start && **v > DECAY_FLOOR)
        .map(|(t, v)| (*t, libm::log(*v)))
        .unzip();
    let decades = libm::log10(norms[0] / norms[last].max(DECAY_FLOOR));
    let insufficient_decay = decades.is_nan() || decades < 2.0;
    if x.len() < MIN_FIT_SAMPLES {
        return Ok(DecayFit { window: (start, t_last), samples: x.len(), ..empty });
    }
    let fit = line_fit(&x, &y).ok_or(invalid("T", "decay window is degenerate"))?;
    Ok(DecayFit {
        rate: Some(-fit.slope),
        predicted_rate,
        window: (start, t_last),
        r2: fit.r2,
        samples: x.len(),
        insufficient_decay,
    })
}

/// Decay exponent `s` of `|c_k| ~ k^{-s}`, fitted over the nonzero
/// coefficients of `u` against their largest wavenumber.
pub fn spectral_tail_index(field: &SpectralField) -> Option<f64> {
    let b = field.basis();
    let (x, y): (Vec<f64>, Vec<f64>) = field
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| libm::fabs(**c) > 1e-300)
        .map(|(i, c)| (libm::log(b.max_wavenumber(i) as f64), libm::log(libm::fabs(*c))))
        .unzip();
    line_fit(&x, &y).map(|f| -f.slope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityRecord {
    pub t: f64,
    pub e2_w: f64,
    pub e2_u: f64,
    pub tail_index_w: Option<f64>,
    pub tail_index_u: Option<f64>,
}

/// E2 norms and spectral tail indices of `w` and `u` per record.
pub fn w_regularity_track(source: &Trajectory, dec: &Decomposition) -> Result<Vec<RegularityRecord>> {
    source
        .times
        .iter()
        .zip(source.states.iter().zip(&dec.w.states))
        .map(|(t, (u, w))| {
            Ok(RegularityRecord {
                t: *t,
                e2_w: w.norm(Norm::E2)?,
                e2_u: u.norm(Norm::E2)?,
                tail_index_w: spectral_tail_index(&w.u),
                tail_index_u: spectral_tail_index(&u.u),
            })
        })
        .collect()
}

/// Max of `e2_w` over the last quarter of the record.
pub fn tail_max_e2_w(track: &[RegularityRecord]) -> f64 {
    let Some(last) = track.last() else { return 0.0 };
    let start = track[0].t + 0.75 * (last.t - track[0].t);
    track.iter().filter(|r| r.t >= start).map(|r| r.e2_w).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingEstimate {
    /// Max over members of the tail E1 norm.
    pub radius: f64,
    /// Time after which each member stays inside the radius.
    pub entry_times: Vec<f64>,
    pub members: Vec<EnvelopeMember>,
    /// At least five members spanning a decade of initial E1 norms.
    pub ensemble_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbsorbingOutcome {
    Estimate(AbsorbingEstimate),
    BlowUp { ic: usize, time: f64 },
}

pub fn assemble_absorbing(members: Vec<EnvelopeMember>) -> AbsorbingOutcome {
    if let Some((ic, m)) = members.iter().enumerate().find(|(_, m)| m.blow_up.is_some()) {
        return AbsorbingOutcome::BlowUp { ic, time: m.blow_up.unwrap_or(0.0) };
    }
    let radius = members.iter().map(|m| m.tail_max).fold(0.0, f64::max);
    let entry_times = members
        .iter()
        .map(|m| match m.e1.iter().rposition(|v| *v > radius) {
            None => 0.0,
            Some(j) => m.times[(j + 1).min(m.times.len() - 1)],
        })
        .collect();
    let lo = members.iter().map(|m| m.initial_norm).fold(f64::INFINITY, f64::min);
    let hi = members.iter().map(|m| m.initial_norm).fold(0.0, f64::max);
    AbsorbingOutcome::Estimate(AbsorbingEstimate {
        radius,
        entry_times,
        ensemble_ok: members.len() >= 5 && hi >= 10.0 * lo,
        members,
    })
}

pub fn absorbing_set_estimate(
    problem: &Problem,
    ics: &[State],
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<AbsorbingOutcome> {
    let members =
        ics.iter().map(|ic| envelope_member(problem, ic, t_end, dt, record_every)).collect::<Result<Vec<_>>>()?;
    Ok(assemble_absorbing(members))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub ic: usize,
    pub t: f64,
    pub state: State,
    pub e1: f64,
    pub e2: f64,
}

/// Strided post-transient snapshots of one member, undeduplicated, and
/// whether its E1 norm was still shrinking by more than 10% per unit time
/// (shrinkage below the deduplication tolerance is ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMember {
    pub snapshots: Vec<Snapshot>,
    pub still_shrinking: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSample {
    pub snapshots: Vec<Snapshot>,
    pub transient_short: bool,
    /// Largest pairwise E1 distance.
    pub diameter: f64,
}

pub const DEDUP_TOL: f64 = 1e-6;

fn e1_distance(a: &State, b: &State) -> f64 {
    a.sub(b).and_then(|d| d.norm(Norm::E1)).unwrap_or(f64::INFINITY)
}

pub fn sample_member(
    problem: &Problem,
    ic_index: usize,
    ic: &State,
    t_transient: f64,
    t_sample: f64,
    dt: f64,
    stride: usize,
) -> Result<SampleMember> {
    if t_sample.is_nan() || t_sample <= 0.0 {
        return Err(invalid("T_sample", "must be positive"));
    }
    if stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    let start = if t_transient > 0.0 {
        let tr = simulate(problem, ic, t_transient, dt, step_count(t_transient, dt))?;
        if let Some(b) = tr.blow_up {
            return Err(Error::BlowUp { time: b.time });
        }
        tr.last().clone()
    } else {
        ic.clone()
    };
    let t0 = step_count(t_transient, dt) as f64 * dt;
    let mut snapshots = Vec::new();
    let mut norm_track = Vec::new();
    let mut err = None;
    let end = simulate_with(problem, &start, t_sample, dt, stride, |_, t, s| {
        match (s.norm(Norm::E1), s.norm(Norm::E2)) {
            (Ok(e1), Ok(e2)) => {
                norm_track.push((t, e1));
                snapshots.push(Snapshot { ic: ic_index, t: t0 + t, state: s.clone(), e1, e2 });
            }
            (Err(e), _) | (_, Err(e)) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    if let Err(b) = end {
        return Err(Error::BlowUp { time: t0 + b.time });
    }
    let window_max = |lo: f64, hi: f64| {
        norm_track.iter().filter(|(t, _)| *t >= lo && *t <= hi).map(|(_, v)| *v).fold(0.0, f64::max)
    };
    let still_shrinking = if t_sample >= 2.0 {
        let first = window_max(0.0, 1.0);
        let last = window_max(t_sample - 1.0, t_sample);
        let rate = (libm::log(first) - libm::log(last)) / (t_sample - 1.0);
        first - last > DEDUP_TOL && last > 0.0 && rate > -libm::log(0.9)
    } else {
        false
    };
    Ok(SampleMember { snapshots, still_shrinking })
}

/// Deduplicates the pooled snapshots (in member order, then time) at
/// [`DEDUP_TOL`] in E1.
pub fn assemble_sample(members: Vec<SampleMember>) -> AttractorSample {
    let transient_short = members.iter().any(|m| m.still_shrinking);
    let mut kept: Vec<Snapshot> = Vec::new();
    for snap in members.into_iter().flat_map(|m| m.snapshots) {
        if kept.iter().all(|k| e1_distance(&k.state, &snap.state) > DEDUP_TOL) {
            kept.push(snap);
        }
    }
    let mut diameter: f64 = 0.0;
    for (i, a) in kept.iter().enumerate() {
        for b in &kept[i + 1..] {
            diameter = diameter.max(e1_distance(&a.state, &b.state));
        }
    }
    AttractorSample { snapshots: kept, transient_short, diameter }
}

pub fn attractor_sample(
    problem: &Problem,
    ics: &[State],
    t_transient: f64,
    t_sample: f64,
    dt: f64,
    stride: usize,
) -> Result<AttractorSample> {
    let members = ics
        .iter()
        .enumerate()
        .map(|(i, ic)| sample_member(problem, i, ic, t_transient, t_sample, dt, stride))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_sample(members))
}

/// Hausdorff distance in E1 between two snapshot sets.
pub fn hausdorff_e1(a: &[Snapshot], b: &[Snapshot]) -> f64 {
    let directed = |x: &[Snapshot], y: &[Snapshot]| {
        x.iter()
            .map(|p| y.iter().map(|q| e1_distance(&p.state, &q.state)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Basis;
    use crate::nonlinearity::NonlinearPair;
    use alloc::sync::Arc;
    use approx::assert_abs_diff_eq;

    fn linear(b: &Arc<Basis>) -> Problem {
        Problem::unforced(b, NonlinearPair::new_unchecked(&[], &[]), 1.0).unwrap()
    }

    fn smooth(b: &Arc<Basis>) -> State {
        let mut s = State::zeros(b);
        for k in 0..b.len() {
            let kf = (k + 1) as f64;
            s.u.coeffs_mut()[k] = 0.8 / (kf * kf * kf);
            s.ut.coeffs_mut()[k] = -0.3 / (kf * kf * kf * kf);
        }
        s
    }

    #[test]
    fn linear_problem_has_no_remainder() {
        let b = Basis::interval(8);
        let p = linear(&b);
        let traj = simulate(&p, &smooth(&b), 0.5, 1e-2, 1).unwrap();
        let d = decompose(&p, &traj).unwrap();
        assert!(d.w.states.iter().all(|w| w.u.coeffs().iter().chain(w.ut.coeffs()).all(|c| *c == 0.0)));
        assert_eq!(d.v.states, traj.states);
        let track = w_regularity_track(&traj, &d).unwrap();
        assert!(track.iter().all(|r| r.e2_w == 0.0 && r.tail_index_w.is_none()));
    }

    #[test]
    fn zero_everything() {
        let b = Basis::interval(8);
        let p = Problem::unforced(&b, NonlinearPair::van_der_pol(), 1.0).unwrap();
        let traj = simulate(&p, &State::zeros(&b), 0.2, 1e-2, 1).unwrap();
        let d = decompose(&p, &traj).unwrap();
        assert_eq!(d.max_reconstruction_error(), 0.0);
        assert!(d.v.states.iter().all(|v| v.norm(Norm::E1).unwrap() == 0.0));
    }

    #[test]
    fn initial_data_of_the_parts() {
        let b = Basis::interval(8);
        let p = Problem::new(NonlinearPair::van_der_pol(), 1.0, SpectralField::mode(&b, &[1])).unwrap();
        let traj = simulate(&p, &smooth(&b), 0.3, 1e-3, 1).unwrap();
        let d = decompose(&p, &traj).unwrap();
        assert_eq!(d.v.states[0], traj.states[0]);
        assert_eq!(d.w.states[0], State::zeros(&b));
        assert!(d.max_reconstruction_error() < 1e-13);
        assert_eq!(decompose(&p, &simulate(&p, &smooth(&b), 0.3, 1e-3, 3).unwrap()), Err(Error::NotContiguous));
    }

    #[test]
    fn predicted_rates() {
        let b = Basis::interval(8);
        assert_abs_diff_eq!(predicted_decay_rate(&linear(&b)), 0.5, epsilon = 1e-15);
        // only the lambda = 4 mode: double root -2
        let b2 = Basis::new(&[core::f64::consts::PI / 2.0], 1).unwrap();
        assert_abs_diff_eq!(b2.eigenvalues()[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(predicted_decay_rate(&linear(&b2)), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn decay_fit_of_equilibrium_is_skipped() {
        let b = Basis::interval(8);
        let f = linear_decay_fit(&linear(&b), &State::zeros(&b), 5.0, 1e-2).unwrap();
        assert!(f.rate.is_none() && f.insufficient_decay);
    }

    #[test]
    fn tail_index_of_power_law() {
        let b = Basis::interval(16);
        let c = (1..=16).map(|k| 3.0 * (k as f64).powf(-2.6)).collect();
        let f = SpectralField::from_coeffs(&b, c).unwrap();
        assert_abs_diff_eq!(spectral_tail_index(&f).unwrap(), 2.6, epsilon = 1e-12);
    }

    #[test]
    fn single_equilibrium_radius() {
        let b = Basis::interval(8);
        let p = Problem::new(NonlinearPair::van_der_pol(), 1.0, SpectralField::mode(&b, &[1])).unwrap();
        let u = crate::dynamics::stationary_solve(&p).unwrap();
        let s = State { u, ut: SpectralField::zeros(&b) };
        let n0 = s.norm(Norm::E1).unwrap();
        let AbsorbingOutcome::Estimate(est) = absorbing_set_estimate(&p, &[s], 1.0, 1e-3, 100).unwrap() else {
            panic!("no blow-up expected")
        };
        assert!((est.radius - n0).abs() < 1e-6, "{} vs {n0}", est.radius);
        assert!(!est.ensemble_ok);
    }

    #[test]
    fn decaying_problem_samples_zero() {
        let b = Basis::interval(8);
        let p = Problem::unforced(&b, NonlinearPair::fhn_cubic(), 1.0).unwrap();
        let s = attractor_sample(&p, &[smooth(&b)], 40.0, 2.0, 1e-2, 20).unwrap();
        assert_eq!(s.snapshots.len(), 1);
        assert!(s.snapshots[0].e1 < 1e-6);
        assert!(!s.transient_short);
    }
}
