//! Sweeps over (τ, ε) pairs and Cauchy-style convergence metrics.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ModelKind, RunConfig};
use super::oracle::play_oracle;
use super::problem::{build_problem, detection_settings, initial_state, load_schedule, scheme_config};
use crate::diagnostics::{mismatch_report, uniform_bounds_report, InterpolantView, MismatchReport, StepLedger, UniformBounds};
use crate::energy::Schedule;
use crate::error::{Error, Result};
use crate::jumps::{detect_jumps, DetectionSettings, JumpRecord};
use crate::stepper::{run_trajectory, DiscreteTrajectory, Problem, RegimeCheck, SchemeConfig};

pub const WORKERS_ENV: &str = "IBV_WORKERS";

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Play-operator reference for the 1-DOF quadratic model.
#[derive(Debug, Clone)]
pub struct PlayReference {
    pub rho: f64,
    pub load: Schedule,
    pub u0: f64,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub problem: Problem,
    pub schemes: Vec<SchemeConfig>,
    pub grid_points: usize,
    pub contraction: f64,
    pub detection: DetectionSettings,
    pub play: Option<PlayReference>,
    pub workers: Option<usize>,
}

impl SweepPlan {
    pub fn new(problem: Problem, schemes: Vec<SchemeConfig>) -> Result<Self> {
        if schemes.is_empty() {
            return Err(Error::InvalidParameter("sweep plan needs at least one pair".into()));
        }
        for w in schemes.windows(2) {
            let (a, b) = (w[0].tau / w[0].eps, w[1].tau / w[1].eps);
            if b >= a {
                return Err(Error::InvalidParameter(format!("regime violation: tau/eps must strictly decrease ({a:e} then {b:e})")));
            }
            if w[0].horizon != w[1].horizon {
                return Err(Error::InvalidParameter("all sweep runs must share the horizon".into()));
            }
        }
        Ok(Self {
            problem,
            schemes,
            grid_points: 1025,
            contraction: 0.7,
            detection: DetectionSettings::default(),
            play: None,
            workers: None,
        })
    }

    pub fn from_config(c: &RunConfig) -> Result<Self> {
        let problem = build_problem(&c.model, c.scheme.horizon)?;
        let u0 = initial_state(c, &problem)?;
        let schemes = c
            .sweep
            .pairs
            .iter()
            .map(|&(tau, eps)| scheme_config(c, &u0, tau, eps))
            .collect::<Result<Vec<_>>>()?;
        let mut plan = Self::new(problem, schemes)?;
        plan.grid_points = c.sweep.grid_points;
        plan.contraction = c.sweep.contraction;
        plan.detection = detection_settings(c);
        plan.play = play_reference(c)?;
        plan.workers = workers_from_env();
        Ok(plan)
    }

    /// Regime flags per pair, in plan order.
    pub fn regimes(&self) -> Vec<RegimeCheck> {
        self.schemes.iter().map(|s| self.problem.regime(s.tau, s.eps)).collect()
    }
}

/// The oracle applies to the unit-stiffness play model with a monotone load.
pub fn play_reference(c: &RunConfig) -> Result<Option<PlayReference>> {
    if c.model.kind != ModelKind::Play {
        return Ok(None);
    }
    let load = load_schedule(&c.model)?;
    // the scalar problem starts from rest, so u0 must be stable at t = 0
    let gap = (c.model.stiffness * c.model.u0 - load.value(0.0)).abs();
    if gap > c.model.rho * (1.0 + 1e-12) {
        return Err(Error::UnstableInitialState { gap, rho: c.model.rho });
    }
    if c.model.stiffness != 1.0 {
        return Ok(None);
    }
    let monotone = match &c.model.load_knots {
        Some(k) => k.windows(2).all(|w| w[1][1] >= w[0][1]),
        None => c.model.load_slope >= 0.0,
    };
    Ok(monotone.then_some(PlayReference {
        rho: c.model.rho,
        load,
        u0: c.model.u0,
    }))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub tau: f64,
    pub eps: f64,
    pub regime: RegimeCheck,
    /// Complete or, after a step failure, partial trajectory.
    pub trajectory: Option<DiscreteTrajectory>,
    pub ledger: Option<StepLedger>,
    pub bounds: Option<UniformBounds>,
    pub mismatch: Option<MismatchReport>,
    pub jumps: Vec<JumpRecord>,
    /// max_k |u^k − u_play(t^k)|.
    pub oracle_error: Option<f64>,
    pub error: Option<String>,
}

impl RunResult {
    /// (m, n, slack) of the worst node pair and the tolerance it is held to.
    pub fn ledger_summary(&self) -> Option<((usize, usize, f64), f64)> {
        self.ledger.as_ref().map(|l| (l.min_pair_slack(), l.tolerance()))
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PairDistance {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub sup_w: f64,
    pub l1_z: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum Certificate {
    /// Every distance is at most `factor` times its predecessor.
    Contracting { worst_ratio: f64 },
    NoCertificate { reason: String },
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub runs: Vec<RunResult>,
    pub distances: Vec<PairDistance>,
    pub grid: Vec<f64>,
    pub certificate: Certificate,
}

impl ConvergenceReport {
    /// The run with the smallest τ/ε, i.e. the limit candidate.
    pub fn finest(&self) -> Option<&RunResult> {
        self.runs.iter().filter(|r| r.ok()).min_by(|a, b| (a.tau / a.eps).total_cmp(&(b.tau / b.eps)))
    }
}

fn run_one(plan: &SweepPlan, cfg: &SchemeConfig) -> RunResult {
    let p = &plan.problem;
    let mut out = RunResult {
        tau: cfg.tau,
        eps: cfg.eps,
        regime: p.regime(cfg.tau, cfg.eps),
        trajectory: None,
        ledger: None,
        bounds: None,
        mismatch: None,
        jumps: Vec::new(),
        oracle_error: None,
        error: None,
    };
    let tr = match run_trajectory(p, cfg, |_, _, _| {}) {
        Ok(tr) => tr,
        Err(Error::Truncated { partial, source, step }) => {
            out.trajectory = Some(*partial);
            out.error = Some(format!("step {step}: {source}"));
            return out;
        }
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let mut analyse = || -> Result<()> {
        out.ledger = Some(StepLedger::build(&tr, p)?);
        out.bounds = Some(uniform_bounds_report(&tr, p)?);
        out.mismatch = Some(mismatch_report(&tr, p)?);
        out.jumps = detect_jumps(&tr, p, &plan.detection)?;
        if let Some(r) = &plan.play {
            let mut worst = 0.0f64;
            for k in 0..tr.len() {
                let exact = play_oracle(r.rho, |t| r.load.value(t), r.u0, tr.t(k))?;
                worst = worst.max((tr.u(k)[0] - exact).abs());
            }
            out.oracle_error = Some(worst);
        }
        Ok(())
    };
    if let Err(e) = analyse() {
        out.error = Some(e.to_string());
    }
    out.trajectory = Some(tr);
    out
}

/// sup-W and L¹-Z (trapezoid) distances of û between two runs on `grid`.
pub fn hat_distance(p: &Problem, a: &DiscreteTrajectory, b: &DiscreteTrajectory, grid: &[f64]) -> (f64, f64) {
    let (ia, ib) = (InterpolantView::new(a), InterpolantView::new(b));
    let d: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| {
            let diff: Vec<f64> = ia.u_hat(t).iter().zip(ib.u_hat(t)).map(|(x, y)| x - y).collect();
            (p.norms.norm_w(&diff), p.norms.norm_z(&diff))
        })
        .collect();
    let sup = d.iter().map(|x| x.0).fold(0.0, f64::max);
    let l1 = grid.windows(2).zip(d.windows(2)).map(|(t, z)| 0.5 * (t[1] - t[0]) * (z[0].1 + z[1].1)).sum();
    (sup, l1)
}

fn certify(distances: &[PairDistance], factor: f64) -> Certificate {
    if distances.len() < 2 {
        return Certificate::NoCertificate {
            reason: format!("{} pairwise distance(s); contraction needs two", distances.len()),
        };
    }
    let mut worst = 0.0f64;
    for w in distances.windows(2) {
        for (prev, next) in [(w[0].sup_w, w[1].sup_w), (w[0].l1_z, w[1].l1_z)] {
            let ratio = if prev > 0.0 {
                next / prev
            } else if next == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
    }
    if worst <= factor {
        Certificate::Contracting { worst_ratio: worst }
    } else {
        Certificate::NoCertificate {
            reason: format!("successive distance ratio {worst:.3} exceeds {factor}"),
        }
    }
}

/// Runs every pair (in parallel when a pool size is set), then measures
/// successive distances among the completed runs ordered by decreasing τ/ε.
pub fn run_sweep(plan: &SweepPlan) -> Result<ConvergenceReport> {
    let work = || plan.schemes.par_iter().map(|c| run_one(plan, c)).collect::<Vec<_>>();
    let mut runs = match plan.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    runs.sort_by(|a, b| (a.tau, a.eps).partial_cmp(&(b.tau, b.eps)).expect("finite parameters"));

    let mut ordered: Vec<&RunResult> = runs.iter().filter(|r| r.ok()).collect();
    ordered.sort_by(|a, b| (b.tau / b.eps).total_cmp(&(a.tau / a.eps)));
    let horizon = plan.schemes[0].horizon;
    let g = plan.grid_points.max(2);
    let grid: Vec<f64> = (0..g).map(|i| horizon * i as f64 / (g - 1) as f64).collect();
    let distances: Vec<PairDistance> = ordered
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].trajectory.as_ref().unwrap(), w[1].trajectory.as_ref().unwrap());
            let (sup_w, l1_z) = hat_distance(&plan.problem, a, b, &grid);
            PairDistance {
                from: (w[0].tau, w[0].eps),
                to: (w[1].tau, w[1].eps),
                sup_w,
                l1_z,
            }
        })
        .collect();
    let certificate = certify(&distances, plan.contraction);
    Ok(ConvergenceReport {
        runs,
        distances,
        grid,
        certificate,
    })
}
