//! Discrete energy-dissipation inequality, audited per node pair.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stepper::{DiscreteTrajectory, Problem};

/// Per-step terms of the discrete inequality. Index 0 holds the initial
/// kinetic and potential energy; the step quantities at index 0 are zero.
#[derive(Debug, Clone)]
pub struct StepLedger {
    pub kinetic: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub work: Vec<f64>,
    pub lambda_term: Vec<f64>,
    /// s_k = kin_{k−1} + E_{k−1} + work_k + lam_k − (kin_k + E_k + diss_k).
    pub step_slack: Vec<f64>,
    /// Tolerance scale 1 + max|E| + max kin + Σ diss + Σ|work|.
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnergyLedgerRow {
    pub m: usize,
    pub n: usize,
    pub kinetic_n: f64,
    pub kinetic_m: f64,
    pub energy_n: f64,
    pub energy_m: f64,
    pub dissipation: f64,
    pub work: f64,
    pub lambda_term: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Relative tolerance of the audit.
pub const LEDGER_TOL: f64 = 1e-9;

impl StepLedger {
    pub fn build(tr: &DiscreteTrajectory, p: &Problem) -> Result<Self> {
        let (tau, eps) = (tr.tau(), tr.eps());
        let lambda = p.model.lambda();
        let kinetic = (0..tr.len())
            .into_par_iter()
            .map(|k| Ok(0.5 * eps * eps * p.norms.mass.quad(tr.v(k))?))
            .collect::<Result<Vec<f64>>>()?;
        let energy = (0..tr.len())
            .into_par_iter()
            .map(|k| crate::energy::eval_energy(p.model.as_ref(), tr.t(k), tr.u(k)))
            .collect::<Result<Vec<f64>>>()?;
        let steps: Vec<(f64, f64, f64)> = (1..tr.len())
            .into_par_iter()
            .map(|k| {
                let (v, v_prev) = (tr.v(k), tr.v(k - 1));
                let dv: Vec<f64> = v.iter().zip(v_prev).map(|(a, b)| a - b).collect();
                let mdv = p.norms.mass.apply(&dv)?;
                let zeta: Vec<f64> = mdv
                    .iter()
                    .zip(tr.xi(k))
                    .map(|(m, x)| -eps * eps * m / tau - x)
                    .collect();
                let diss = tau
                    * (p.pot.eval_r_eps(&p.norms.visc, eps, v)?
                        + p.pot.eval_r_eps_star(&p.norms.visc, eps, &zeta)?);
                let work = p.model.work(tr.t(k - 1), tr.t(k), tr.u(k - 1))?;
                let w = p.norms.norm_w(v);
                Ok((diss, work, 0.5 * lambda * tau * tau * w * w))
            })
            .collect::<Result<_>>()?;
        let mut dissipation = vec![0.0];
        let mut work = vec![0.0];
        let mut lambda_term = vec![0.0];
        let mut step_slack = vec![0.0];
        for (i, (d, w, l)) in steps.into_iter().enumerate() {
            let k = i + 1;
            let s = kinetic[k - 1] + energy[k - 1] + w + l - (kinetic[k] + energy[k] + d);
            dissipation.push(d);
            work.push(w);
            lambda_term.push(l);
            step_slack.push(s);
        }
        let max_abs = |x: &[f64]| x.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        let scale = 1.0
            + max_abs(&energy)
            + max_abs(&kinetic)
            + dissipation.iter().sum::<f64>()
            + work.iter().map(|w| w.abs()).sum::<f64>();
        Ok(Self {
            kinetic,
            energy,
            dissipation,
            work,
            lambda_term,
            step_slack,
            scale,
        })
    }

    pub fn last(&self) -> usize {
        self.energy.len() - 1
    }

    pub fn row(&self, m: usize, n: usize) -> Result<EnergyLedgerRow> {
        if m > n || n > self.last() {
            return Err(Error::InvalidParameter(format!(
                "ledger pair ({m}, {n}) outside 0..={}",
                self.last()
            )));
        }
        let sum = |x: &[f64]| x[m + 1..=n].iter().sum::<f64>();
        let (dissipation, work, lambda_term) = if m == n {
            (0.0, 0.0, 0.0)
        } else {
            (sum(&self.dissipation), sum(&self.work), sum(&self.lambda_term))
        };
        let lhs = self.kinetic[n] + self.energy[n] + dissipation;
        let rhs = self.kinetic[m] + self.energy[m] + work + lambda_term;
        let slack = if m == n { 0.0 } else { sum(&self.step_slack) };
        Ok(EnergyLedgerRow {
            m,
            n,
            kinetic_n: self.kinetic[n],
            kinetic_m: self.kinetic[m],
            energy_n: self.energy[n],
            energy_m: self.energy[m],
            dissipation,
            work,
            lambda_term,
            lhs,
            rhs,
            slack,
        })
    }

    /// Minimum slack over all pairs m < n, as (m, n, slack). Empty-sum pairs
    /// contribute 0.
    pub fn min_pair_slack(&self) -> (usize, usize, f64) {
        // min-subarray scan over s_1..s_K
        let mut best = (0, 0, 0.0);
        let mut run = 0.0;
        let mut start = 0;
        for k in 1..=self.last() {
            if run > 0.0 {
                run = 0.0;
                start = k - 1;
            }
            run += self.step_slack[k];
            if run < best.2 {
                best = (start, k, run);
            }
        }
        best
    }

    pub fn tolerance(&self) -> f64 {
        LEDGER_TOL * self.scale
    }

    /// Fails with the offending range when some pair falls below −tol.
    pub fn check_all_pairs(&self) -> Result<()> {
        let (m, n, slack) = self.min_pair_slack();
        if slack < -self.tolerance() {
            return Err(Error::LedgerViolation {
                m,
                n,
                slack,
                bound: -self.tolerance(),
            });
        }
        Ok(())
    }
}

/// Rows for the requested node pairs; errors on the first pair whose slack is
/// below −1e−9·scale.
pub fn audit_energy_inequality(tr: &DiscreteTrajectory, p: &Problem, pairs: &[(usize, usize)]) -> Result<Vec<EnergyLedgerRow>> {
    let ledger = StepLedger::build(tr, p)?;
    let tol = ledger.tolerance();
    let mut rows = Vec::with_capacity(pairs.len());
    for &(m, n) in pairs {
        let row = ledger.row(m, n)?;
        if row.slack < -tol {
            return Err(Error::LedgerViolation {
                m,
                n,
                slack: row.slack,
                bound: -tol,
            });
        }
        rows.push(row);
    }
    Ok(rows)
}
