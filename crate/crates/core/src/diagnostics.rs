//! Energy-type functionals and exact identities evaluated along discrete
//! trajectories.
//!
//! Identities are checked as residuals `Phi(t) - Phi(t0) + int D dt`, with
//! the time integral taken at step granularity by the trapezoid rule with
//! Gregory end corrections. For
//! the Galerkin system every identity below holds exactly, so residuals are
//! pure time-discretization error.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::basis::{Norm, SpectralField, State};
use crate::dynamics::{simulate_with, step_count, Problem, Stepper, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::fit::line_fit;
use crate::quadrature::ExactGrid;

/// Constants of the modified energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagParams {
    pub kappa: f64,
    pub l: f64,
}

impl Default for DiagParams {
    fn default() -> Self {
        DiagParams { kappa: 0.1, l: 1.0 }
    }
}

impl DiagParams {
    pub fn new(kappa: f64, l: f64) -> Result<DiagParams> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid("kappa", "must be positive"));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(invalid("L", "must be positive"));
        }
        Ok(DiagParams { kappa, l })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateNorms {
    pub l2_u: f64,
    pub h1_u: f64,
    pub h2_u: f64,
    pub l2_ut: f64,
    pub h1_ut: f64,
    pub e: f64,
    pub e1: f64,
}

impl StateNorms {
    pub fn of(state: &State) -> StateNorms {
        let (u, ut) = (&state.u, &state.ut);
        let (h1u, h2u, h1ut) = (u.sobolev_sq(1), u.sobolev_sq(2), ut.sobolev_sq(1));
        let l2ut = ut.sobolev_sq(0);
        StateNorms {
            l2_u: libm::sqrt(u.sobolev_sq(0)),
            h1_u: libm::sqrt(h1u),
            h2_u: libm::sqrt(h2u),
            l2_ut: libm::sqrt(l2ut),
            h1_ut: libm::sqrt(h1ut),
            e: libm::sqrt(h1u + l2ut),
            e1: libm::sqrt(h2u + h1ut),
        }
    }
}

/// Per-record diagnostics. Residuals are cumulative from the first record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub energy: f64,
    pub v_norm2: f64,
    pub modified_energy: f64,
    pub norms: StateNorms,
    pub residual_energy_eq: f64,
    pub residual_mult: f64,
    pub residual_1_8: f64,
}

impl EnergyReport {
    pub const CSV_COLUMNS: [&'static str; 13] = [
        "t", "E", "v2", "Eu", "l2_u", "h1_u", "h2_u", "l2_ut", "h1_ut", "e1", "res_energy", "res_mult", "res_18",
    ];

    pub fn csv_row(&self) -> [f64; 13] {
        let n = &self.norms;
        [
            self.t,
            self.energy,
            self.v_norm2,
            self.modified_energy,
            n.l2_u,
            n.h1_u,
            n.h2_u,
            n.l2_ut,
            n.h1_ut,
            n.e1,
            self.residual_energy_eq,
            self.residual_mult,
            self.residual_1_8,
        ]
    }
}

/// The five terms of the modified energy, in display order:
/// `|v|^2`, `(1 + k/2 - L k gamma/2)|grad u|^2`, `(2 + k)(G(u),1)`,
/// `-L k (u, ut)`, `(k/2)|ut|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedEnergy {
    pub terms: [f64; 5],
}

impl ModifiedEnergy {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Everything the identities need from one state.
#[derive(Debug, Clone, Copy)]
struct Snapshot {
    energy: f64,
    diss_energy: f64,
    phi_mult: f64,
    diss_mult: f64,
    phi_18: f64,
    diss_18: f64,
    v2: f64,
    modified: ModifiedEnergy,
    /// `(|G(u)|, 1)`, only approximate when G changes sign.
    abs_g: f64,
}

/// Evaluates functionals on states with quadrature exact for every
/// polynomial composite involved.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    problem: &'a Problem,
    grid: ExactGrid,
    params: DiagParams,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a Problem, params: DiagParams) -> Evaluator<'a> {
        let grid = ExactGrid::new(problem.basis(), problem.pair().diagnostics_degree());
        Evaluator { problem, grid, params }
    }

    pub fn grid(&self) -> &ExactGrid {
        &self.grid
    }

    fn check(&self, state: &State) -> Result<()> {
        if Arc::ptr_eq(state.basis(), self.problem.basis()) || state.basis() == self.problem.basis() {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    fn product_integral(&self, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let vals: Vec<f64> = a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).collect();
        self.grid.integrate(&vals)
    }

    fn multiplier(&self, state: &State, big_f: &[f64]) -> SpectralField {
        let pf = self.grid.project(big_f);
        let gamma = self.problem.gamma();
        state.ut.axpy_unchecked(-gamma, &state.u.laplacian()).axpy_unchecked(1.0, &pf)
    }

    fn snapshot(&self, state: &State) -> Snapshot {
        let pair = self.problem.pair();
        let gamma = self.problem.gamma();
        let h = self.problem.forcing();
        let (u, ut) = (&state.u, &state.ut);
        let grid = &self.grid;

        let ug = grid.synth(u);
        let utg = grid.synth(ut);
        let grad2 = grid.grad_sq(u);
        let fu = pair.f().eval_slice(&ug);
        let gu = pair.g().eval_slice(&ug);
        let big_f = pair.big_f().eval_slice(&ug);
        let big_g = pair.big_g().eval_slice(&ug);
        let gpu = pair.g_prime().eval_slice(&ug);

        let int_g = grid.integrate(&big_g);
        let abs_g = grid.integrate(&big_g.iter().map(|v| libm::fabs(*v)).collect::<Vec<_>>());
        let ones = alloc::vec![1.0; ug.len()];
        let f_ut_ut = self.product_integral(&fu, &utg, &utg);
        let f_ut_u = self.product_integral(&fu, &utg, &ug);
        let g_u = self.product_integral(&gu, &ug, &ones);
        let damp_w: Vec<f64> = fu.iter().zip(&gpu).map(|(f, g)| f + gamma * g).collect();
        let grad_term = self.product_integral(&damp_w, &grad2, &ones);
        let pf_pg = grid.project(&big_f).dot_unchecked(&grid.project(&gu));

        let grad_u2 = u.sobolev_sq(1);
        let lap_u2 = u.sobolev_sq(2);
        let ut2 = ut.sobolev_sq(0);
        let grad_ut2 = ut.sobolev_sq(1);
        let u_ut = u.dot_unchecked(ut);
        let h_u = h.dot_unchecked(u);
        let v = self.multiplier(state, &big_f);
        let v2 = v.sobolev_sq(0);
        let h_v = h.dot_unchecked(&v);

        let DiagParams { kappa, l } = self.params;
        let modified = ModifiedEnergy {
            terms: [
                v2,
                (1.0 + 0.5 * kappa - 0.5 * l * kappa * gamma) * grad_u2,
                (2.0 + kappa) * int_g,
                -l * kappa * u_ut,
                0.5 * kappa * ut2,
            ],
        };
        Snapshot {
            energy: 0.5 * ut2 + 0.5 * grad_u2 + int_g - h_u,
            diss_energy: gamma * grad_ut2 + f_ut_ut,
            phi_mult: 0.5 * v2 + 0.5 * grad_u2 + int_g,
            diss_mult: gamma * lap_u2 + grad_term + pf_pg - h_v,
            phi_18: u_ut + 0.5 * gamma * grad_u2,
            diss_18: grad_u2 + g_u + f_ut_u - h_u - ut2,
            v2,
            modified,
            abs_g,
        }
    }

    /// `1/2|ut|^2 + 1/2|grad u|^2 + (G(u),1) - (h,u)`.
    pub fn energy_total(&self, state: &State) -> Result<f64> {
        self.check(state)?;
        Ok(self.snapshot(state).energy)
    }

    /// `v = ut - gamma Lap u + P F(u)`.
    pub fn multiplier_v(&self, state: &State) -> Result<SpectralField> {
        self.check(state)?;
        let big_f = self.problem.pair().big_f().eval_slice(&self.grid.synth(&state.u));
        Ok(self.multiplier(state, &big_f))
    }

    pub fn modified_energy(&self, state: &State) -> Result<ModifiedEnergy> {
        self.check(state)?;
        Ok(self.snapshot(state).modified)
    }
}

pub fn energy_total(problem: &Problem, state: &State) -> Result<f64> {
    Evaluator::new(problem, DiagParams::default()).energy_total(state)
}

pub fn multiplier_v(problem: &Problem, state: &State) -> Result<SpectralField> {
    Evaluator::new(problem, DiagParams::default()).multiplier_v(state)
}

pub fn modified_energy(problem: &Problem, state: &State, params: DiagParams) -> Result<ModifiedEnergy> {
    Evaluator::new(problem, params).modified_energy(state)
}

/// Running time integral of uniformly spaced samples: trapezoid sum plus
/// Gregory end corrections through second differences, so the quadrature
/// error is fourth order and never masks the second-order integrator error.
#[derive(Debug, Clone, Default)]
struct Gregory {
    head: Vec<f64>,
    tail: [f64; 3],
    count: usize,
    trapezoid: f64,
}

impl Gregory {
    fn push(&mut self, h: f64, f: f64) {
        if self.count > 0 {
            self.trapezoid += 0.5 * h * (self.tail[2] + f);
        }
        if self.head.len() < 3 {
            self.head.push(f);
        }
        self.tail = [self.tail[1], self.tail[2], f];
        self.count += 1;
    }

    fn value(&self, h: f64) -> f64 {
        if self.count < 5 {
            return self.trapezoid;
        }
        let [a, b, c] = [self.head[0], self.head[1], self.head[2]];
        let [x, y, z] = self.tail;
        let d1 = (z - y) - (b - a);
        let d2 = (z - 2.0 * y + x) + (c - 2.0 * b + a);
        self.trapezoid - h / 12.0 * d1 - h / 24.0 * d2
    }
}

/// Accumulates identity residuals over states fed one step apart.
#[derive(Debug, Clone)]
pub struct Monitor<'a> {
    eval: Evaluator<'a>,
    dt: f64,
    first: Option<Snapshot>,
    integrals: [Gregory; 3],
}

impl<'a> Monitor<'a> {
    pub fn new(problem: &'a Problem, params: DiagParams, dt: f64) -> Monitor<'a> {
        Monitor { eval: Evaluator::new(problem, params), dt, first: None, integrals: Default::default() }
    }

    /// Feeds the next state; must be called once per step.
    pub fn observe(&mut self, t: f64, state: &State) -> EnergyReport {
        let s = self.eval.snapshot(state);
        let h = self.dt;
        self.integrals[0].push(h, s.diss_energy);
        self.integrals[1].push(h, s.diss_mult);
        self.integrals[2].push(h, s.diss_18);
        let f = *self.first.get_or_insert(s);
        EnergyReport {
            t,
            energy: s.energy,
            v_norm2: s.v2,
            modified_energy: s.modified.total(),
            norms: StateNorms::of(state),
            residual_energy_eq: s.energy - f.energy + self.integrals[0].value(h),
            residual_mult: s.phi_mult - f.phi_mult + self.integrals[1].value(h),
            residual_1_8: s.phi_18 - f.phi_18 + self.integrals[2].value(h),
        }
    }
}

/// Signed residual over a segment and its magnitude per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub signed: f64,
    pub per_time: f64,
}

/// The three identity residuals over a whole step-granular trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    pub energy: IdentityResidual,
    pub multiplier: IdentityResidual,
    pub identity_1_8: IdentityResidual,
}

pub fn identity_residuals(problem: &Problem, segment: &Trajectory) -> Result<IdentityResiduals> {
    if segment.len() < 2 || !segment.is_step_granular() {
        return Err(Error::NotContiguous);
    }
    let mut mon = Monitor::new(problem, DiagParams::default(), segment.dt);
    let mut last = None;
    for (t, s) in segment.times.iter().zip(&segment.states) {
        last = Some(mon.observe(*t, s));
    }
    let last = last.expect("non-empty segment");
    let span = segment.times[segment.len() - 1] - segment.times[0];
    let wrap = |r: f64| IdentityResidual { signed: r, per_time: libm::fabs(r) / span };
    Ok(IdentityResiduals {
        energy: wrap(last.residual_energy_eq),
        multiplier: wrap(last.residual_mult),
        identity_1_8: wrap(last.residual_1_8),
    })
}

/// Residual of the energy equality
/// `E(t1) - E(t0) + int gamma |grad ut|^2 + (f(u) ut, ut) dt`.
pub fn energy_equality_residual(problem: &Problem, segment: &Trajectory) -> Result<IdentityResidual> {
    Ok(identity_residuals(problem, segment)?.energy)
}

/// Residual of the identity obtained by pairing with `v`:
/// `d/dt(1/2|v|^2 + 1/2|grad u|^2 + (G(u),1)) + gamma|Lap u|^2
///  + (f(u) + gamma g'(u), |grad u|^2) + (P F(u), P g(u)) - (h, v) = 0`.
pub fn multiplier_identity_residual(problem: &Problem, segment: &Trajectory) -> Result<IdentityResidual> {
    Ok(identity_residuals(problem, segment)?.multiplier)
}

/// Residual of the identity obtained by pairing with `u`:
/// `|ut|^2 = d/dt((u,ut) + gamma/2 |grad u|^2) + |grad u|^2 + (g(u),u)
///  + (f(u) ut, u) - (h,u)`.
pub fn identity_1_8_residual(problem: &Problem, segment: &Trajectory) -> Result<IdentityResidual> {
    Ok(identity_residuals(problem, segment)?.identity_1_8)
}

/// Simulates and evaluates diagnostics at every step, reporting every
/// `record_every` steps and at the end.
pub fn simulate_diagnosed(
    problem: &Problem,
    state0: &State,
    t_end: f64,
    dt: f64,
    record_every: usize,
    params: DiagParams,
) -> Result<(Trajectory, Vec<EnergyReport>)> {
    if record_every == 0 {
        return Err(invalid("record_every", "must be at least 1"));
    }
    let n = step_count(t_end, dt);
    let mut mon = Monitor::new(problem, params, dt);
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), steps: Vec::new(), dt, blow_up: None };
    let mut reports = Vec::new();
    let end = simulate_with(problem, state0, t_end, dt, 1, |i, t, s| {
        let rep = mon.observe(t, s);
        if i % record_every == 0 || i == n {
            traj.steps.push(i);
            traj.times.push(t);
            traj.states.push(s.clone());
            reports.push(rep);
        }
    })?;
    traj.blow_up = end.err();
    Ok((traj, reports))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// Largest `alpha` with `alpha B <= E_u` along the trajectory, where
    /// `B = |v|^2 + |ut|^2 + |grad u|^2 + (|G(u)|, 1)`.
    pub alpha: f64,
    /// Smallest `C` with `E_u <= C (1 + B)`.
    pub c: f64,
    pub worst_lower_time: f64,
    pub worst_upper_time: f64,
    /// Whether `alpha > 0`.
    pub admissible: bool,
}

/// Fits the two-sided comparison of the modified energy with the base
/// quantity `B`. The lower bound is fitted with zero additive constant.
pub fn equivalence_check(problem: &Problem, traj: &Trajectory, params: DiagParams) -> Result<EquivalenceReport> {
    let eval = Evaluator::new(problem, params);
    let mut rep = EquivalenceReport {
        alpha: f64::INFINITY,
        c: 0.0,
        worst_lower_time: f64::NAN,
        worst_upper_time: f64::NAN,
        admissible: true,
    };
    for (t, state) in traj.times.iter().zip(&traj.states) {
        eval.check(state)?;
        let s = eval.snapshot(state);
        let b = s.v2 + state.ut.sobolev_sq(0) + state.u.sobolev_sq(1) + s.abs_g;
        let eu = s.modified.total();
        if b > 0.0 && eu / b < rep.alpha {
            rep.alpha = eu / b;
            rep.worst_lower_time = *t;
        }
        let c = eu / (1.0 + b);
        if c > rep.c {
            rep.c = c;
            rep.worst_upper_time = *t;
        }
    }
    rep.admissible = rep.alpha > 0.0;
    Ok(rep)
}

/// One member of a dissipativity ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeMember {
    pub times: Vec<f64>,
    pub e1: Vec<f64>,
    /// `int_t^{t+1} |grad ut|^2 ds` at record times with `t + 1 <= T`.
    pub window_integral: Vec<f64>,
    pub initial_norm: f64,
    /// Max of the E1 norm over the last quarter of `[0, T]`.
    pub tail_max: f64,
    /// Blow-up time, if any.
    pub blow_up: Option<f64>,
    /// Filled by [`assemble_envelope`].
    pub entry_time: Option<f64>,
    pub flagged: bool,
}

pub fn envelope_member(problem: &Problem, ic: &State, t_end: f64, dt: f64, record_every: usize) -> Result<EnvelopeMember> {
    let n = step_count(t_end, dt);
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    let mut last_d: Option<f64> = None;
    let mut times = Vec::new();
    let mut e1 = Vec::new();
    let mut rec_steps = Vec::new();
    let end = simulate_with(problem, ic, t_end, dt, 1, |i, t, s| {
        let d = s.ut.sobolev_sq(1);
        if let Some(p) = last_d {
            acc += 0.5 * dt * (p + d);
        }
        last_d = Some(d);
        prefix.push(acc);
        if i % record_every == 0 || i == n {
            times.push(t);
            e1.push(StateNorms::of(s).e1);
            rec_steps.push(i);
        }
    })?;
    let window = libm::round(1.0 / dt) as usize;
    let window_integral =
        rec_steps.iter().filter(|i| **i + window < prefix.len()).map(|i| prefix[*i + window] - prefix[*i]).collect();
    let t_final = *times.last().unwrap_or(&0.0);
    let tail_start = 0.75 * t_end;
    let tail_max = times.iter().zip(&e1).filter(|(t, _)| **t >= tail_start).map(|(_, v)| *v).fold(0.0, f64::max);
    Ok(EnvelopeMember {
        initial_norm: e1.first().copied().unwrap_or(0.0),
        times,
        e1,
        window_integral,
        tail_max,
        blow_up: end.err().map(|_| t_final),
        entry_time: None,
        flagged: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    pub members: Vec<EnvelopeMember>,
    /// Max over members of the tail max.
    pub r_inf: f64,
    /// `T` shorter than four times the largest entry time.
    pub insufficient_horizon: bool,
    pub any_blow_up: bool,
}

/// Entry time into the ball of radius `2 R_inf` (the time after which the
/// member stays inside) and the envelope flag: a member is flagged when its
/// tail exceeds both its initial norm and twice the largest tail of the
/// other members.
pub fn assemble_envelope(mut members: Vec<EnvelopeMember>, t_end: f64) -> DissipativityReport {
    let r_inf = members.iter().filter(|m| m.blow_up.is_none()).map(|m| m.tail_max).fold(0.0, f64::max);
    let tails: Vec<f64> = members.iter().map(|m| m.tail_max).collect();
    let radius = 2.0 * r_inf;
    for (idx, m) in members.iter_mut().enumerate() {
        if m.blow_up.is_some() {
            continue;
        }
        let last_out = m.e1.iter().rposition(|v| *v > radius);
        m.entry_time = match last_out {
            None => Some(0.0),
            Some(j) if j + 1 < m.times.len() => Some(m.times[j + 1]),
            Some(_) => None,
        };
        let others = tails.iter().enumerate().filter(|(j, _)| *j != idx).map(|(_, v)| *v).fold(f64::NAN, f64::max);
        m.flagged = !others.is_nan() && m.tail_max > m.initial_norm && m.tail_max > 2.0 * others;
    }
    let max_entry = members.iter().filter_map(|m| m.entry_time).fold(0.0, f64::max);
    DissipativityReport {
        any_blow_up: members.iter().any(|m| m.blow_up.is_some()),
        insufficient_horizon: t_end < 4.0 * max_entry,
        members,
        r_inf,
    }
}

/// Sequential ensemble probe.
pub fn dissipativity_probe(
    problem: &Problem,
    ics: &[State],
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<DissipativityReport> {
    let members = ics.iter().map(|ic| envelope_member(problem, ic, t_end, dt, record_every)).collect::<Result<_>>()?;
    Ok(assemble_envelope(members, t_end))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub delta0: f64,
    pub times: Vec<f64>,
    /// Separation in the E norm.
    pub separation: Vec<f64>,
    /// Log-linear growth rate fitted to the separation, if it is nonzero.
    pub growth_rate: Option<f64>,
    /// Separation exceeded unity.
    pub left_first_order: bool,
}

/// Perturbation of `u` along mode 1 with E-norm `delta0`.
pub fn mode_one_perturbation(state: &State, delta0: f64) -> State {
    let b = state.basis();
    let mut p = state.clone();
    let amp = delta0 / libm::sqrt(b.lambda1() * b.weight());
    p.u.coeffs_mut()[0] += amp;
    p
}

/// Runs the base and perturbed solutions in lockstep.
pub fn lipschitz_probe(
    problem: &Problem,
    state0: &State,
    delta0: f64,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<LipschitzReport> {
    if !(delta0.is_finite() && delta0 >= 0.0) {
        return Err(invalid("delta0", "must be non-negative"));
    }
    if record_every == 0 {
        return Err(invalid("record_every", "must be at least 1"));
    }
    let stepper = Stepper::new(problem, dt)?;
    let n = step_count(t_end, dt);
    let mut a = state0.clone();
    let mut b = mode_one_perturbation(state0, delta0);
    let sep = |a: &State, b: &State| -> Result<f64> { a.sub(b)?.norm(Norm::E) };
    let mut times = alloc::vec![0.0];
    let mut separation = alloc::vec![sep(&a, &b)?];
    for i in 1..=n {
        a = stepper.step(&a).map_err(|_| Error::BlowUp { time: (i - 1) as f64 * dt })?;
        b = stepper.step(&b).map_err(|_| Error::BlowUp { time: (i - 1) as f64 * dt })?;
        if i % record_every == 0 || i == n {
            times.push(i as f64 * dt);
            separation.push(sep(&a, &b)?);
        }
    }
    let (x, y): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&separation).filter(|(_, s)| **s > 0.0).map(|(t, s)| (*t, libm::log(*s))).unzip();
    Ok(LipschitzReport {
        delta0,
        growth_rate: line_fit(&x, &y).map(|f| f.slope),
        left_first_order: separation.iter().any(|s| *s > 1.0),
        times,
        separation,
    })
}

/// Largest relative disagreement between `sep/delta0` of two probes.
pub fn separation_ratio_spread(a: &LipschitzReport, b: &LipschitzReport) -> f64 {
    a.separation
        .iter()
        .zip(&b.separation)
        .map(|(x, y)| {
            let (rx, ry) = (x / a.delta0, y / b.delta0);
            libm::fabs(rx - ry) / libm::fabs(rx).max(libm::fabs(ry)).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}
