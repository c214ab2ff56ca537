//! Independent re-checks of stored trajectories.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::StepLedger;
use crate::error::Result;
use crate::stepper::{DiscreteTrajectory, Problem};
use crate::vecops::{dot, norm_inf};

/// Euler–Lagrange certificate with η rebuilt from (u, v) and a fresh ∇E.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ElCertificate {
    /// max_k max_i (|η_i| − w_i)₊ / scale_k.
    pub max_dual_residual: f64,
    /// max_k |⟨η, v⟩ − R(v)| / R(v).
    pub max_pairing_gap: f64,
    /// Largest difference between the stored and rebuilt η.
    pub max_eta_drift: f64,
    pub worst_step: usize,
    pub tol: f64,
    pub pass: bool,
}

pub fn certify_euler_lagrange(tr: &DiscreteTrajectory, p: &Problem, tol: f64) -> Result<ElCertificate> {
    let (tau, eps) = (tr.tau(), tr.eps());
    let w = p.pot.weights();
    let rows = (1..tr.len())
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, f64)> {
            let (v, vp) = (tr.v(k), tr.v(k - 1));
            let xi = crate::energy::eval_grad(p.model.as_ref(), tr.t(k), tr.u(k))?;
            let dv: Vec<f64> = v.iter().zip(vp).map(|(a, b)| a - b).collect();
            let inertia: Vec<f64> = p.norms.mass.apply(&dv)?.iter().map(|x| eps * eps * x / tau).collect();
            let viscous: Vec<f64> = p.norms.visc.apply(v)?.iter().map(|x| eps * x).collect();
            let eta: Vec<f64> = (0..v.len()).map(|i| -inertia[i] - viscous[i] - xi[i]).collect();
            let scale = 1.0 + p.pot.w_max() + norm_inf(&xi) + norm_inf(&inertia) + norm_inf(&viscous);
            let dual = eta.iter().zip(w).map(|(e, wi)| (e.abs() - wi).max(0.0)).fold(0.0, f64::max) / scale;
            let r = p.pot.eval_r(v)?;
            let gap = (dot(&eta, v) - r).abs();
            let rel = if gap == 0.0 { 0.0 } else { gap / r.max(f64::MIN_POSITIVE) };
            let drift = eta.iter().zip(tr.eta(k)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            Ok((dual, rel, drift))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ElCertificate {
        max_dual_residual: 0.0,
        max_pairing_gap: 0.0,
        max_eta_drift: 0.0,
        worst_step: 0,
        tol,
        pass: true,
    };
    for (i, (d, g, e)) in rows.into_iter().enumerate() {
        if d.max(g) > out.max_dual_residual.max(out.max_pairing_gap) {
            out.worst_step = i + 1;
        }
        out.max_dual_residual = out.max_dual_residual.max(d);
        out.max_pairing_gap = out.max_pairing_gap.max(g);
        out.max_eta_drift = out.max_eta_drift.max(e);
    }
    out.pass = out.max_dual_residual <= tol && out.max_pairing_gap <= tol && out.max_eta_drift <= tol;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryAudit {
    pub el: ElCertificate,
    pub ledger_min: (usize, usize, f64),
    pub ledger_tol: f64,
    pub ledger_pass: bool,
    pub complete: bool,
    pub pass: bool,
}

/// EL certificate plus the all-pairs energy inequality.
pub fn audit_trajectory(tr: &DiscreteTrajectory, p: &Problem) -> Result<TrajectoryAudit> {
    let el = certify_euler_lagrange(tr, p, 1e-8)?;
    let ledger = StepLedger::build(tr, p)?;
    let ledger_min = ledger.min_pair_slack();
    let ledger_tol = ledger.tolerance();
    let ledger_pass = ledger.check_all_pairs().is_ok();
    let complete = tr.is_complete();
    Ok(TrajectoryAudit {
        pass: el.pass && ledger_pass && complete,
        el,
        ledger_min,
        ledger_tol,
        ledger_pass,
        complete,
    })
}
