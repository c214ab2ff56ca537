//! End-to-end commands: single run, sweep, jump cost at a time, audit and
//! plot of a run directory.

use std::path::Path;

use super::audit::{audit_trajectory, TrajectoryAudit};
use super::certify::{certify_jump, JumpCertificate};
use super::classify::{classify_solution, Classification};
use super::config::RunConfig;
use super::io;
use super::plot::{line_plot, Series};
use super::problem::{build_problem, classify_settings, initial_state, scheme_config, transition_settings};
use super::sweep::{run_sweep, Certificate, ConvergenceReport, RunResult, SweepPlan};
use crate::diagnostics::ledger::LEDGER_TOL;
use crate::diagnostics::StepLedger;
use crate::error::{Error, Result};
use crate::jumps::JumpRecord;
use crate::stepper::Problem;

pub struct RunOutcome {
    pub config: RunConfig,
    pub problem: Problem,
    pub result: RunResult,
    pub classification: Option<Classification>,
}

pub struct SweepOutcome {
    pub config: RunConfig,
    pub plan: SweepPlan,
    pub report: ConvergenceReport,
    /// Verdict on the finest completed run.
    pub classification: Option<Classification>,
}

fn classify(c: &RunConfig, p: &Problem, r: &RunResult, keep_paths: bool) -> Result<Option<Classification>> {
    match (&r.trajectory, r.ok()) {
        (Some(tr), true) => {
            let mut s = classify_settings(c);
            s.keep_paths = keep_paths;
            classify_solution(tr, p, &r.jumps, &s).map(Some)
        }
        _ => Ok(None),
    }
}

/// One run at (scheme.tau, scheme.eps).
pub fn execute_run(c: &RunConfig) -> Result<RunOutcome> {
    let mut plan = SweepPlan::from_config(c)?;
    let problem = plan.problem.clone();
    let u0 = plan.schemes[0].u0.clone();
    plan.schemes = vec![scheme_config(c, &u0, c.scheme.tau, c.scheme.eps)?];
    let report = run_sweep(&plan)?;
    let result = report.runs.into_iter().next().expect("one run");
    let classification = classify(c, &problem, &result, true)?;
    Ok(RunOutcome {
        config: c.clone(),
        problem,
        result,
        classification,
    })
}

pub fn execute_sweep(c: &RunConfig) -> Result<SweepOutcome> {
    let plan = SweepPlan::from_config(c)?;
    let report = run_sweep(&plan)?;
    let classification = match report.finest() {
        Some(r) => classify(c, &plan.problem, r, true)?,
        None => None,
    };
    Ok(SweepOutcome {
        config: c.clone(),
        plan,
        report,
        classification,
    })
}

/// Transition from the run's state at the last node t^k ≤ t, frozen at t.
pub fn execute_jumpcost(c: &RunConfig, t: f64) -> Result<(RunOutcome, JumpCertificate)> {
    if !(t >= 0.0 && t <= c.scheme.horizon) {
        return Err(Error::config(None, format!("--t {t} lies outside [0, {}]", c.scheme.horizon)));
    }
    let mut run = execute_run(c)?;
    run.classification = None;
    let tr = run
        .result
        .trajectory
        .as_ref()
        .filter(|_| run.result.ok())
        .ok_or_else(|| Error::Audit(run.result.error.clone().unwrap_or_default()))?;
    let k = ((t / tr.tau()).floor() as usize).min(tr.last());
    let u = tr.u(k).to_vec();
    let jump = JumpRecord::from_states(&run.problem, t, (tr.t(k), tr.t(k)), (k, k), u.clone(), u)?;
    let bound = run.result.bounds.as_ref().map(|b| b.z_variation).unwrap_or(0.0);
    let cert = certify_jump(&run.problem, &jump, &transition_settings(c), c.jump.tol_rel, bound, true)?;
    Ok((run, cert))
}

fn derived_common(c: &RunConfig) -> toml::Table {
    let mut d = toml::Table::new();
    d.insert("ledger_tol".into(), toml::Value::Float(LEDGER_TOL));
    d.insert("el_tol".into(), toml::Value::Float(1e-8));
    let s = classify_settings(c);
    d.insert("classify_tol".into(), toml::Value::Float(s.tol));
    d.insert("classify_windows".into(), toml::Value::Integer(s.windows as i64));
    d.insert("classify_random_probes".into(), toml::Value::Integer(s.random_probes as i64));
    d.insert("detection_max_windows".into(), toml::Value::Integer(crate::jumps::DetectionSettings::default().max_windows as i64));
    d
}

fn record_certificates(d: &mut toml::Table, certs: &[JumpCertificate]) {
    let arr = |f: &dyn Fn(&JumpCertificate) -> f64| toml::Value::Array(certs.iter().map(|c| toml::Value::Float(f(c))).collect());
    d.insert("jump_sigma".into(), arr(&|c| c.cost.sigma));
    d.insert("jump_sigma_used".into(), arr(&|c| c.cost.sigma_used));
    d.insert("jump_tau_prime".into(), arr(&|c| c.cost.tau_prime));
}

fn save_trajectory(c: &RunConfig, r: &RunResult) -> bool {
    let size = r.trajectory.as_ref().map(|t| t.len() * t.dim()).unwrap_or(0);
    c.io.save_trajectory.unwrap_or(size <= io::TRAJECTORY_AUTO_LIMIT) && r.trajectory.is_some()
}

fn write_common(dir: &Path, c: &RunConfig, runs: &[RunResult], stored: Option<&RunResult>, certs: &[JumpCertificate], extra: toml::Table) -> Result<()> {
    io::ensure_dir(dir)?;
    let mut d = derived_common(c);
    d.extend(extra);
    record_certificates(&mut d, certs);
    if let Some(r) = stored {
        if let Some(l) = &r.ledger {
            io::write_ledger_csv(dir, &io::ledger_rows(l)?)?;
        }
        if save_trajectory(c, r) {
            io::write_trajectory_csv(&dir.join(io::TRAJECTORY), r.trajectory.as_ref().unwrap())?;
            d.insert("trajectory_tau".into(), toml::Value::Float(r.tau));
            d.insert("trajectory_eps".into(), toml::Value::Float(r.eps));
        }
    }
    io::write_bounds_csv(dir, runs)?;
    let mm: Vec<_> = runs.iter().filter_map(|r| r.mismatch.as_ref()).collect();
    io::write_mismatch_csv(dir, &mm)?;
    io::write_jumps_csv(dir, certs)?;
    for (i, cert) in certs.iter().enumerate() {
        if let Some(path) = &cert.path {
            io::write_transition_csv(&dir.join(format!("transition_{i}.csv")), path)?;
        }
    }
    io::write_manifest(dir, c, &d)
}

fn certs_of(cl: &Option<Classification>) -> &[JumpCertificate] {
    cl.as_ref().map(|c| c.certificates.as_slice()).unwrap_or(&[])
}

fn class_entry(d: &mut toml::Table, cl: &Option<Classification>) {
    if let Some(c) = cl {
        d.insert("class".into(), toml::Value::String(c.class.to_string()));
    }
}

pub fn write_run_outputs(dir: &Path, o: &RunOutcome) -> Result<()> {
    let mut extra = toml::Table::new();
    class_entry(&mut extra, &o.classification);
    write_common(dir, &o.config, std::slice::from_ref(&o.result), Some(&o.result), certs_of(&o.classification), extra)
}

pub fn write_sweep_outputs(dir: &Path, o: &SweepOutcome) -> Result<()> {
    let mut extra = toml::Table::new();
    class_entry(&mut extra, &o.classification);
    let cert = match &o.report.certificate {
        Certificate::Contracting { worst_ratio } => format!("contracting (worst ratio {worst_ratio:.3})"),
        Certificate::NoCertificate { reason } => format!("no convergence certificate: {reason}"),
    };
    extra.insert("convergence".into(), toml::Value::String(cert));
    write_common(dir, &o.config, &o.report.runs, o.report.finest(), certs_of(&o.classification), extra)?;
    io::write_distances_csv(dir, &o.report.distances)
}

pub fn write_jumpcost_outputs(dir: &Path, run: &RunOutcome, cert: &JumpCertificate) -> Result<()> {
    let mut extra = toml::Table::new();
    extra.insert("jumpcost_t".into(), toml::Value::Float(cert.landed.t_star));
    write_common(dir, &run.config, std::slice::from_ref(&run.result), Some(&run.result), std::slice::from_ref(cert), extra)
}

/// Reloads a run directory's problem and stored trajectory.
pub fn load_run_dir(dir: &Path) -> Result<(RunConfig, Problem, crate::stepper::DiscreteTrajectory)> {
    let (c, d) = io::read_manifest(dir)?;
    let get = |k: &str| {
        d.get(k)
            .and_then(|v| v.as_float())
            .ok_or_else(|| Error::Audit(format!("manifest has no derived.{k}; was the trajectory saved?")))
    };
    let (tau, eps) = (get("trajectory_tau")?, get("trajectory_eps")?);
    let p = build_problem(&c.model, c.scheme.horizon)?;
    let cfg = scheme_config(&c, &initial_state(&c, &p)?, tau, eps)?;
    let tr = io::read_trajectory_csv(&dir.join(io::TRAJECTORY), &p, cfg)?;
    Ok((c, p, tr))
}

pub fn audit_run_dir(dir: &Path) -> Result<TrajectoryAudit> {
    let (_, p, tr) = load_run_dir(dir)?;
    audit_trajectory(&tr, &p)
}

/// Writes u.svg, ledger.svg and transition_<i>.svg next to the CSVs.
pub fn plot_run_dir(dir: &Path) -> Result<Vec<String>> {
    let (_, p, tr) = load_run_dir(dir)?;
    let mut written = Vec::new();
    let t: Vec<f64> = (0..tr.len()).map(|k| tr.t(k)).collect();
    let n = tr.dim();
    let mut series = Vec::new();
    if n <= 4 {
        for i in 0..n {
            series.push(Series::new(format!("u{i}"), t.clone(), (0..tr.len()).map(|k| tr.u(k)[i]).collect()));
        }
    } else {
        series.push(Series::new("mean u", t.clone(), (0..tr.len()).map(|k| tr.u(k).iter().sum::<f64>() / n as f64).collect()));
        series.push(Series::new(format!("u{}", n / 2), t.clone(), (0..tr.len()).map(|k| tr.u(k)[n / 2]).collect()));
    }
    let title = format!("trajectory (tau = {:e}, eps = {:e})", tr.tau(), tr.eps());
    std::fs::write(dir.join("u.svg"), line_plot(&title, "t", "u", &series))?;
    written.push("u.svg".to_string());

    let l = StepLedger::build(&tr, &p)?;
    let cum = |x: &[f64]| {
        let mut acc = 0.0;
        x.iter().map(|v| {
            acc += v;
            acc
        })
        .collect::<Vec<f64>>()
    };
    let ledger = [
        Series::new("energy", t.clone(), l.energy.clone()),
        Series::new("kinetic", t.clone(), l.kinetic.clone()),
        Series::new("dissipation", t.clone(), cum(&l.dissipation)),
        Series::new("work", t.clone(), cum(&l.work)),
        Series::new("slack", t.clone(), cum(&l.step_slack)),
    ];
    std::fs::write(dir.join("ledger.svg"), line_plot("energy ledger", "t", "value", &ledger))?;
    written.push("ledger.svg".to_string());

    for i in 0.. {
        let f = dir.join(format!("transition_{i}.csv"));
        if !f.exists() {
            break;
        }
        let (head, cols) = io::read_columns(&f)?;
        let mut s = Vec::new();
        for (j, h) in head.iter().enumerate().skip(2).take(4) {
            s.push(Series::new(h.clone(), cols[1].clone(), cols[j].clone()));
        }
        let name = format!("transition_{i}.svg");
        std::fs::write(dir.join(&name), line_plot(&format!("jump transition {i}"), "s", "state", &s))?;
        written.push(name);
    }
    Ok(written)
}
