//! Defect measure μ of the limit energy inequality, split into atoms at the
//! detected jumps and a diffuse part compared with the R-variation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jumps::JumpRecord;
use crate::stepper::{DiscreteTrajectory, Problem};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DefectAtom {
    pub t: f64,
    pub window: (f64, f64),
    pub mass: f64,
    /// R(u⁺ − u⁻), the Coulomb floor of the atom.
    pub r_jump: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DiffuseInterval {
    pub m: usize,
    pub n: usize,
    pub mass: f64,
    pub r_variation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectLedger {
    pub atoms: Vec<DefectAtom>,
    pub diffuse: Vec<DiffuseInterval>,
    /// Smallest μ over all node windows.
    pub min_interval_mass: f64,
    pub total_mass: f64,
    pub tol: f64,
}

impl DefectLedger {
    /// Largest |μ − V_R| over the diffuse intervals.
    pub fn diffuse_gap(&self) -> f64 {
        self.diffuse.iter().map(|d| (d.mass - d.r_variation).abs()).fold(0.0, f64::max)
    }

    pub fn atoms_above_floor(&self) -> bool {
        self.atoms.iter().all(|a| a.mass >= a.r_jump - self.tol)
    }

    pub fn nonnegative(&self) -> bool {
        self.min_interval_mass >= -self.tol
    }

    pub fn diffuse_matches(&self) -> bool {
        self.diffuse_gap() <= self.tol
    }
}

/// μ on node windows is E(t^m,u^m) − E(t^n,u^n) + Σ_{k=m+1..n} ∫∂_tE(r,u^{k−1})dr.
/// `tol` is the absolute tolerance inherited from the sweep.
pub fn build_defect_ledger(tr: &DiscreteTrajectory, p: &Problem, jumps: &[JumpRecord], tol: f64) -> Result<DefectLedger> {
    let energy = (0..tr.len())
        .map(|k| crate::energy::eval_energy(p.model.as_ref(), tr.t(k), tr.u(k)))
        .collect::<Result<Vec<_>>>()?;
    let mut step = vec![0.0];
    let mut rvar = vec![0.0];
    for k in 1..tr.len() {
        let w = p.model.work(tr.t(k - 1), tr.t(k), tr.u(k - 1))?;
        step.push(energy[k - 1] - energy[k] + w);
        rvar.push(p.pot.eval_r(&crate::vecops::sub(tr.u(k), tr.u(k - 1)))?);
    }
    let mut cum = vec![0.0; step.len()];
    let mut rcum = vec![0.0; step.len()];
    for k in 1..step.len() {
        cum[k] = cum[k - 1] + step[k];
        rcum[k] = rcum[k - 1] + rvar[k];
    }
    let mu = |m: usize, n: usize| cum[n] - cum[m];

    let mut sorted: Vec<&JumpRecord> = jumps.iter().collect();
    sorted.sort_by(|a, b| a.t_star.total_cmp(&b.t_star));
    let mut atoms = Vec::new();
    let mut diffuse = Vec::new();
    let mut cursor = 0;
    for j in &sorted {
        let (a, b) = j.window_nodes;
        if a > b || b > tr.last() || a < cursor {
            return Err(Error::InvalidParameter(format!("jump window ({a}, {b}) is not ordered inside the trajectory")));
        }
        if a > cursor {
            diffuse.push(DiffuseInterval {
                m: cursor,
                n: a,
                mass: mu(cursor, a),
                r_variation: rcum[a] - rcum[cursor],
            });
        }
        let mass = mu(a, b);
        if mass < -tol {
            return Err(Error::NegativeAtom { t: j.t_star, value: mass });
        }
        atoms.push(DefectAtom {
            t: j.t_star,
            window: j.window,
            mass,
            r_jump: j.r_floor,
        });
        cursor = b;
    }
    if cursor < tr.last() {
        diffuse.push(DiffuseInterval {
            m: cursor,
            n: tr.last(),
            mass: mu(cursor, tr.last()),
            r_variation: rcum[tr.last()] - rcum[cursor],
        });
    }
    // min-subarray over the per-step masses
    let (mut run, mut min_mass) = (0.0f64, 0.0f64);
    for s in &step[1..] {
        run = s + run.min(0.0);
        min_mass = min_mass.min(run);
    }
    Ok(DefectLedger {
        atoms,
        diffuse,
        min_interval_mass: min_mass,
        total_mass: cum[tr.last()],
        tol,
    })
}
