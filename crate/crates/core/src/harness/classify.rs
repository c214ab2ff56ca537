//! Solution-class verdicts for a limit candidate.
//!
//! The classes are tried in order: classic, energetic, IBV. A trajectory
//! that fails all three gets `None` together with the margins that failed.

use serde::Serialize;

use super::certify::{certify_jump, JumpCertificate};
use crate::diagnostics::{build_defect_ledger, uniform_bounds_report, DefectLedger};
use crate::energy::{default_probes, stability_audit_with_lambda};
use crate::error::Result;
use crate::jumps::{JumpRecord, TransitionSettings};
use crate::stepper::{DiscreteTrajectory, Problem};
use crate::vecops::norm_inf;

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SolutionClass {
    Classic,
    Energetic,
    #[serde(rename = "IBV")]
    Ibv,
    None,
}

impl std::fmt::Display for SolutionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolutionClass::Classic => "classic",
            SolutionClass::Energetic => "energetic",
            SolutionClass::Ibv => "IBV",
            SolutionClass::None => "none",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifySettings {
    /// Absolute tolerance for memberships and stability; balances use
    /// tol·(1 + max|E|).
    pub tol: f64,
    pub transition: TransitionSettings,
    /// Relative tolerance of cost reconciliation.
    pub tol_rel: f64,
    pub random_probes: usize,
    pub seed: u64,
    /// Windows for cell averages and continuity nodes.
    pub windows: usize,
    /// Keep transition paths in the certificates (for dumps and plots).
    pub keep_paths: bool,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            tol: 0.05,
            transition: TransitionSettings::default(),
            tol_rel: 0.05,
            random_probes: 16,
            seed: 0,
            windows: 256,
            keep_paths: false,
        }
    }
}

/// Each margin is "allowed − measured": nonnegative means the test passed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ClassMargins {
    /// Worst window average of −ξ against ∂R(v̄).
    pub membership: Option<f64>,
    /// Smallest global-stability margin (λ = 0) at continuity nodes.
    pub global_stability: Option<f64>,
    /// tol·scale − |μ(0,T) − V_R(0,T)|.
    pub energetic_balance: Option<f64>,
    /// Smallest λ-stability or first-order margin at continuity nodes.
    pub local_stability: Option<f64>,
    /// tol·scale − |μ(0,T) − V_R(diffuse) − Σ cost|.
    pub ibv_balance: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub class: SolutionClass,
    pub jumps: usize,
    pub margins: ClassMargins,
    pub certificates: Vec<JumpCertificate>,
    pub defect: Option<DefectLedger>,
    pub reason: String,
}

fn edges(cells: usize, windows: usize) -> Vec<usize> {
    let nw = windows.min(cells).max(1);
    (0..=nw).map(|i| (i * cells + nw / 2) / nw).collect()
}

fn membership_margin(tr: &DiscreteTrajectory, p: &Problem, edges: &[usize], tol: f64) -> f64 {
    let w = p.pot.weights();
    let n = tr.dim();
    let mut worst = f64::INFINITY;
    for e in edges.windows(2) {
        let (a, b) = (e[0], e[1]);
        if b == a {
            continue;
        }
        let dt = tr.t(b) - tr.t(a);
        let vbar: Vec<f64> = (0..n).map(|i| (tr.u(b)[i] - tr.u(a)[i]) / dt).collect();
        let mut xbar = vec![0.0; n];
        for k in a + 1..=b {
            for (x, y) in xbar.iter_mut().zip(tr.xi(k)) {
                *x -= y / (b - a) as f64;
            }
        }
        // box part and the equality ⟨−ξ̄, v̄⟩ = R(v̄), both relative to the weights
        let box_excess = xbar.iter().zip(w).map(|(x, wi)| x.abs() - wi).fold(f64::NEG_INFINITY, f64::max);
        let r = p.pot.eval_r(&vbar).unwrap_or(0.0);
        let pairing: f64 = xbar.iter().zip(&vbar).map(|(x, v)| x * v).sum();
        let eq_gap = (r - pairing) / (1.0 + norm_inf(&vbar));
        worst = worst.min(tol - box_excess.max(eq_gap));
    }
    worst
}

/// Window-edge nodes at least one window away from every jump window.
fn continuity_nodes(edges: &[usize], jumps: &[JumpRecord]) -> Vec<usize> {
    let gap = edges.get(1).copied().unwrap_or(1).max(1);
    edges
        .iter()
        .copied()
        .filter(|&k| {
            jumps
                .iter()
                .all(|j| k + gap < j.window_nodes.0 || k > j.window_nodes.1 + gap)
        })
        .collect()
}

fn stability_margin(tr: &DiscreteTrajectory, p: &Problem, nodes: &[usize], lambda: f64, s: &ClassifySettings, first_order: bool) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for &k in nodes {
        let u = tr.u(k);
        let scale = 1.0 + norm_inf(u);
        let probes = default_probes(u, scale, s.random_probes, s.seed.wrapping_add(k as u64));
        let rep = stability_audit_with_lambda(p.model.as_ref(), &p.pot, tr.t(k), u, &probes, s.tol, lambda)?;
        worst = worst.min(rep.min_margin + s.tol);
        if first_order {
            worst = worst.min(s.tol - rep.first_order_excess);
        }
    }
    Ok(worst)
}

/// `jumps` are the detected jumps of `tr`; certification runs only when the
/// IBV test is reached.
pub fn classify_solution(tr: &DiscreteTrajectory, p: &Problem, jumps: &[JumpRecord], s: &ClassifySettings) -> Result<Classification> {
    let edges = edges(tr.last(), s.windows);
    let mut margins = ClassMargins::default();
    let e_scale = 1.0
        + (0..tr.len())
            .map(|k| crate::energy::eval_energy(p.model.as_ref(), tr.t(k), tr.u(k)).map(f64::abs))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
    let bal_tol = s.tol * e_scale;
    let done = |class, margins, certificates, defect, reason: String| Classification {
        class,
        jumps: jumps.len(),
        margins,
        certificates,
        defect,
        reason,
    };

    let m = membership_margin(tr, p, &edges, s.tol);
    margins.membership = Some(m);
    if jumps.is_empty() && m >= 0.0 {
        return Ok(done(SolutionClass::Classic, margins, Vec::new(), None, "no jumps; flow rule holds on cell averages".into()));
    }

    let nodes = continuity_nodes(&edges, jumps);
    let defect = build_defect_ledger(tr, p, jumps, bal_tol)?;
    let total_mass = defect.total_mass;
    let v_r: f64 = defect.diffuse.iter().map(|d| d.r_variation).sum::<f64>() + defect.atoms.iter().map(|a| a.r_jump).sum::<f64>();
    let gs = stability_margin(tr, p, &nodes, 0.0, s, false)?;
    let eb = bal_tol - (total_mass - v_r).abs();
    margins.global_stability = Some(gs);
    margins.energetic_balance = Some(eb);
    if gs >= 0.0 && eb >= 0.0 {
        return Ok(done(
            SolutionClass::Energetic,
            margins,
            Vec::new(),
            Some(defect),
            "global stability and the R-variation balance hold".into(),
        ));
    }

    let ls = stability_margin(tr, p, &nodes, p.model.lambda(), s, true)?;
    margins.local_stability = Some(ls);
    let bound = uniform_bounds_report(tr, p)?.z_variation;
    let certificates = jumps
        .iter()
        .map(|j| certify_jump(p, j, &s.transition, s.tol_rel, bound, s.keep_paths))
        .collect::<Result<Vec<_>>>()?;
    let all_certified = certificates.iter().all(JumpCertificate::certified);
    let diffuse_r: f64 = defect.diffuse.iter().map(|d| d.r_variation).sum();
    let costs: f64 = certificates.iter().map(|c| c.cost.value).sum();
    let ib = bal_tol - (total_mass - diffuse_r - costs).abs();
    margins.ibv_balance = Some(ib);
    if ls >= 0.0 && ib >= 0.0 && all_certified {
        return Ok(done(
            SolutionClass::Ibv,
            margins,
            certificates,
            Some(defect),
            format!("local stability holds and the balance closes with {} certified transition(s)", jumps.len()),
        ));
    }
    let reason = if !all_certified {
        "a jump transition failed certification".to_string()
    } else if ls < 0.0 {
        format!("local stability fails by {:.3e}", -ls)
    } else {
        format!("viscoinertial balance misses by {:.3e}", -ib)
    };
    Ok(done(SolutionClass::None, margins, certificates, Some(defect), reason))
}
