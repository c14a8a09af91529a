//! Subcommand implementations. Each writes its files and returns the
//! one-line summary.

use std::path::PathBuf;

use serde_json::{json, Map, Value};

use sdwave_core::attractor::{
    assemble_absorbing, assemble_sample, decompose, linear_decay_fit, sample_member, tail_max_e2_w,
    w_regularity_track, AbsorbingOutcome,
};
use sdwave_core::diagnostics::{
    assemble_envelope, envelope_member, equivalence_check, simulate_diagnosed, EnergyReport, StateNorms,
};
use sdwave_core::dynamics::{simulate, Trajectory};
use sdwave_core::fhn;
use sdwave_core::{Norm, State};

use crate::config::{fhn_data, Format, Setup};
use crate::error::CliError;
use crate::io::{self, num, CsvTable};
use crate::parallel::map_ordered;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: usize,
}

/// `SDWAVE_OUT`, then `--out`, then `output.directory`, then `.`.
pub fn output_dir(setup: &Setup, opts: &RunOptions) -> PathBuf {
    if let Some(env) = std::env::var_os("SDWAVE_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    opts.out.clone().or_else(|| setup.config.output.directory.clone()).unwrap_or_else(|| PathBuf::from("."))
}

struct Out<'a> {
    setup: &'a Setup,
    dir: PathBuf,
    multi: bool,
}

impl Out<'_> {
    fn new<'a>(setup: &'a Setup, opts: &RunOptions) -> Result<Out<'a>, CliError> {
        let dir = output_dir(setup, opts);
        io::ensure_dir(&dir)?;
        Ok(Out { multi: setup.initial.len() > 1, setup, dir })
    }

    fn csv(&self, member: Option<usize>, kind: &str, table: &CsvTable) -> Result<(), CliError> {
        if self.setup.wants(Format::Csv) {
            let m = member.filter(|_| self.multi);
            io::write_csv(&io::output_path(&self.dir, &self.setup.run_id, m, kind, "csv"), &self.setup.hash, table)?;
        }
        Ok(())
    }

    fn json(&self, member: Option<usize>, kind: &str, body: Map<String, Value>) -> Result<(), CliError> {
        if self.setup.wants(Format::Json) {
            let m = member.filter(|_| self.multi);
            io::write_json(&io::output_path(&self.dir, &self.setup.run_id, m, kind, "json"), &self.setup.hash, body)?;
        }
        Ok(())
    }
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("object literal"),
    }
}

fn report_table(reports: &[EnergyReport]) -> CsvTable {
    let mut t = CsvTable::new(&EnergyReport::CSV_COLUMNS);
    for r in reports {
        t.push(r.csv_row().to_vec());
    }
    t
}

fn max_abs(reports: &[EnergyReport], f: impl Fn(&EnergyReport) -> f64) -> f64 {
    reports.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
}

type Diagnosed = Result<(Trajectory, Vec<EnergyReport>), sdwave_core::Error>;

fn run_members(setup: &Setup, opts: &RunOptions) -> Result<Vec<(Trajectory, Vec<EnergyReport>)>, CliError> {
    let t = &setup.config.time;
    let runs: Vec<Diagnosed> = map_ordered(&setup.initial, opts.threads, |_, ic| {
        simulate_diagnosed(&setup.problem, ic, t.t_end, t.dt, t.record_every, setup.params)
    });
    runs.into_iter().map(|r| r.map_err(|e| CliError::from_core(&setup.path, e))).collect()
}

fn blow_up_error(setup: &Setup, runs: &[(Trajectory, Vec<EnergyReport>)]) -> Option<CliError> {
    runs.iter().enumerate().find_map(|(i, (tr, _))| {
        tr.blow_up.as_ref().map(|b| CliError::BlowUp {
            path: setup.path.clone(),
            message: format!("member {i}: non-finite state after t = {}", b.time),
        })
    })
}

fn residual_summary(runs: &[(Trajectory, Vec<EnergyReport>)]) -> String {
    let all: Vec<EnergyReport> = runs.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    let final_e1 = runs.iter().map(|(tr, _)| StateNorms::of(tr.last()).e1).fold(0.0, f64::max);
    format!(
        "final_e1={} max|res_energy|={:.3e} max|res_mult|={:.3e} max|res_18|={:.3e}",
        io::fmt_f64(final_e1),
        max_abs(&all, |r| r.residual_energy_eq),
        max_abs(&all, |r| r.residual_mult),
        max_abs(&all, |r| r.residual_1_8),
    )
}

pub fn simulate_cmd(setup: &Setup, opts: &RunOptions) -> Result<String, CliError> {
    let out = Out::new(setup, opts)?;
    let runs = run_members(setup, opts)?;
    for (i, (tr, reports)) in runs.iter().enumerate() {
        out.csv(Some(i), "trajectory", &report_table(reports))?;
        let body = json!({
            "t": num(*tr.times.last().unwrap_or(&0.0)),
            "final_state": io::state_json(tr.last()),
            "blow_up": tr.blow_up.as_ref().map(|b| num(b.time)),
        });
        out.json(Some(i), "final_state", obj(body))?;
    }
    if let Some(e) = blow_up_error(setup, &runs) {
        return Err(e);
    }
    Ok(format!("simulate {}: members={} {}", setup.run_id, runs.len(), residual_summary(&runs)))
}

pub fn diagnose_cmd(setup: &Setup, opts: &RunOptions) -> Result<String, CliError> {
    let out = Out::new(setup, opts)?;
    let runs = run_members(setup, opts)?;
    for (i, (tr, reports)) in runs.iter().enumerate() {
        out.csv(Some(i), "diagnostics", &report_table(reports))?;
        let eq = equivalence_check(&setup.problem, tr, setup.params).map_err(|e| CliError::from_core(&setup.path, e))?;
        let last = reports.last().copied();
        let max_energy_increase =
            reports.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
        let body = json!({
            "final_residuals": last.map(|r| json!({
                "energy": num(r.residual_energy_eq),
                "multiplier": num(r.residual_mult),
                "identity_1_8": num(r.residual_1_8),
            })),
            "max_abs_residuals": {
                "energy": num(max_abs(reports, |r| r.residual_energy_eq)),
                "multiplier": num(max_abs(reports, |r| r.residual_mult)),
                "identity_1_8": num(max_abs(reports, |r| r.residual_1_8)),
            },
            "max_energy_increase_between_records": num(max_energy_increase),
            "equivalence": {
                "kappa": num(setup.params.kappa),
                "L": num(setup.params.l),
                "alpha": num(eq.alpha),
                "C": num(eq.c),
                "worst_lower_time": num(eq.worst_lower_time),
                "worst_upper_time": num(eq.worst_upper_time),
                "admissible": eq.admissible,
            },
            "blow_up": tr.blow_up.as_ref().map(|b| num(b.time)),
        });
        out.json(Some(i), "diagnostics", obj(body))?;
    }
    if let Some(e) = blow_up_error(setup, &runs) {
        return Err(e);
    }
    Ok(format!("diagnose {}: members={} {}", setup.run_id, runs.len(), residual_summary(&runs)))
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn decompose_cmd(setup: &Setup, opts: &RunOptions) -> Result<String, CliError> {
    let out = Out::new(setup, opts)?;
    let t = &setup.config.time;
    let p = &setup.problem;
    let core = |e| CliError::from_core(&setup.path, e);
    let results = map_ordered(&setup.initial, opts.threads, |_, ic| -> Result<_, CliError> {
        let tr = simulate(p, ic, t.t_end, t.dt, 1).map_err(core)?;
        if let Some(b) = &tr.blow_up {
            return Err(CliError::BlowUp {
                path: setup.path.clone(),
                message: format!("non-finite state after t = {}", b.time),
            });
        }
        let dec = decompose(p, &tr).map_err(core)?;
        let track = w_regularity_track(&tr, &dec).map_err(core)?;
        let fit = linear_decay_fit(p, ic, t.t_end, t.dt).map_err(core)?;
        Ok((tr, dec, track, fit))
    });
    let mut worst_recon: f64 = 0.0;
    let mut rates = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (tr, dec, track, fit) = r?;
        let steady = State { u: dec.steady.clone(), ut: sdwave_core::SpectralField::zeros(setup.basis()) };
        let mut table = CsvTable::new(&[
            "t",
            "recon_err",
            "e1_v_minus_steady",
            "e_w",
            "e2_w",
            "e2_u",
            "tail_index_w",
            "tail_index_u",
        ]);
        for (j, rec) in track.iter().enumerate() {
            if tr.steps[j] % t.record_every != 0 && j + 1 != track.len() {
                continue;
            }
            let v_gap = dec.v.states[j].sub(&steady).and_then(|s| s.norm(Norm::E1)).map_err(core)?;
            let e_w = dec.w.states[j].norm(Norm::E).map_err(core)?;
            table.push(vec![
                rec.t,
                dec.reconstruction_error[j],
                v_gap,
                e_w,
                rec.e2_w,
                rec.e2_u,
                opt(rec.tail_index_w),
                opt(rec.tail_index_u),
            ]);
        }
        out.csv(Some(i), "decomposition", &table)?;
        worst_recon = worst_recon.max(dec.max_reconstruction_error());
        rates.push(fit.rate);
        let body = json!({
            "decay_fit": {
                "rate": fit.rate.map(num),
                "predicted_rate": num(fit.predicted_rate),
                "window": [num(fit.window.0), num(fit.window.1)],
                "r2": num(fit.r2),
                "samples": fit.samples,
                "insufficient_decay": fit.insufficient_decay,
            },
            "max_reconstruction_error": num(dec.max_reconstruction_error()),
            "tail_max_e2_w": num(tail_max_e2_w(&track)),
            "e2_u_initial": num(track.first().map(|r| r.e2_u).unwrap_or(0.0)),
        });
        out.json(Some(i), "decay", obj(body))?;
    }
    let rates: Vec<String> = rates.iter().map(|r| r.map_or("none".into(), |v| format!("{v:.6}"))).collect();
    Ok(format!(
        "decompose {}: max_reconstruction_error={:.3e} fitted_rates=[{}]",
        setup.run_id,
        worst_recon,
        rates.join(",")
    ))
}

pub fn fhn_cmd(setup: &Setup, opts: &RunOptions) -> Result<String, CliError> {
    let out = Out::new(setup, opts)?;
    let (phi, ic) = fhn_data(setup)?;
    fhn::reduced_pair(&phi).map_err(|v| CliError::hypothesis(&setup.path, "fhn.phi", v))?;
    let t = &setup.config.time;
    let rep = fhn::compare(&phi, &ic, t.t_end, t.dt, t.record_every).map_err(|e| CliError::from_core(&setup.path, e))?;
    let mut table = CsvTable::new(&["t", "l2_error"]);
    for (ti, e) in rep.times.iter().zip(&rep.per_record_errors) {
        table.push(vec![*ti, *e]);
    }
    out.csv(None, "fhn", &table)?;
    let body = json!({
        "sup_error": num(rep.sup_error),
        "per_record_errors": rep.per_record_errors.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "velocity_consistency": num(rep.velocity_consistency),
        "dt": num(rep.dt),
        "N": rep.modes,
    });
    out.json(None, "fhn", obj(body))?;
    Ok(format!(
        "fhn {}: sup_error={:.3e} velocity_consistency={:.3e}",
        setup.run_id, rep.sup_error, rep.velocity_consistency
    ))
}

pub fn attractor_cmd(setup: &Setup, opts: &RunOptions) -> Result<String, CliError> {
    let out = Out::new(setup, opts)?;
    let t = &setup.config.time;
    let p = &setup.problem;
    let core = |e| CliError::from_core(&setup.path, e);
    let members = map_ordered(&setup.initial, opts.threads, |_, ic| envelope_member(p, ic, t.t_end, t.dt, t.record_every))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(core)?;

    let mut env_table = CsvTable::new(&["ic", "t", "e1"]);
    for (i, m) in members.iter().enumerate() {
        for (ti, v) in m.times.iter().zip(&m.e1) {
            env_table.push(vec![i as f64, *ti, *v]);
        }
    }
    out.csv(None, "envelope", &env_table)?;

    let diss = assemble_envelope(members.clone(), t.t_end);
    let est = match assemble_absorbing(members) {
        AbsorbingOutcome::Estimate(e) => e,
        AbsorbingOutcome::BlowUp { ic, time } => {
            return Err(CliError::BlowUp {
                path: setup.path.clone(),
                message: format!("ensemble member {ic}: non-finite state after t = {time}"),
            })
        }
    };

    let (t_tr, t_sa, stride) = match &setup.config.attractor {
        Some(a) => (a.t_transient, a.t_sample, a.stride),
        None => (t.t_end, 0.25 * t.t_end, t.record_every),
    };
    let samples = map_ordered(&setup.initial, opts.threads, |i, ic| sample_member(p, i, ic, t_tr, t_sa, t.dt, stride))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(core)?;
    let sample = assemble_sample(samples);

    let body = json!({
        "absorbing_radius": num(est.radius),
        "entry_times": est.entry_times.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "ensemble_ok": est.ensemble_ok,
        "r_inf": num(diss.r_inf),
        "insufficient_horizon": diss.insufficient_horizon,
        "flagged_members": diss.members.iter().enumerate().filter(|(_, m)| m.flagged).map(|(i, _)| i).collect::<Vec<_>>(),
        "transient_short": sample.transient_short,
        "diameter": num(sample.diameter),
        "snapshots": sample.snapshots.iter().map(|s| json!({
            "ic": s.ic,
            "t": num(s.t),
            "e1": num(s.e1),
            "e2": num(s.e2),
            "state": io::state_json(&s.state),
        })).collect::<Vec<_>>(),
    });
    out.json(None, "attractor", obj(body))?;
    Ok(format!(
        "attractor {}: radius={:.6} snapshots={} diameter={:.3e} transient_short={}",
        setup.run_id,
        est.radius,
        sample.snapshots.len(),
        sample.diameter,
        sample.transient_short
    ))
}
