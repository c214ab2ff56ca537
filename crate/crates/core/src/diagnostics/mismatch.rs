//! Distances between the interpolants, computed exactly cell by cell.
//!
//! On cell k with σ = (t − t^{k−1})/τ ∈ [0, 1]:
//! ū − u̲ = τv^k, û − ū = −(1−σ)τv^k,
//! ũ − û = τ[α(σ)v^{k−1} + β(σ)v^k] with α = −(1−σ)²/2, β = σ²/2 − σ,
//! ũ̇ − û̇ = (1−σ)(v^{k−1} − v^k).

use rayon::prelude::*;
use serde::Serialize;

use super::poly;
use crate::error::Result;
use crate::spaces::MetricOperator;
use crate::stepper::{DiscreteTrajectory, Problem};
use crate::vecops::dot;

/// Pair order in the three-slot arrays: [ū − u̲, û − ū, ũ − û].
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct MismatchReport {
    pub tau: f64,
    pub eps: f64,
    /// sup_t ‖·‖_U; the ũ − û slot is taken over [τ, T].
    pub sup_u: [f64; 3],
    /// sup_t |·|_W over [0, T].
    pub sup_w: [f64; 3],
    /// ∫‖·‖_Z over [0, T].
    pub l1_z: [f64; 3],
    /// (∫|·|²_V)^{1/2}; the ũ − û slot is taken over [τ, T].
    pub l2_v: [f64; 3],
    /// ‖ũ̇ − û̇‖_{L²(τ,T;V)}.
    pub dot_l2_v: f64,
    /// ‖ũ̇ − û̇‖_{L²(0,T;U*)}, primal vectors embedded through the W pivot.
    pub dot_l2_ustar: f64,
    /// On [0, τ]: sup |ũ − û|_V, ‖ũ − û‖_{L²V}, ‖ũ̇ − û̇‖_{L²V}.
    pub first_cell: [f64; 3],
}

const ALPHA: [f64; 3] = [-0.5, 1.0, -0.5];
const BETA: [f64; 3] = [0.0, -1.0, 0.5];

// |τ(αa + βb)|² as a quartic in σ, given Gram entries (|a|², ⟨a,b⟩, |b|²).
fn quartic(tau: f64, g: (f64, f64, f64)) -> Vec<f64> {
    let aa = poly::mul(&ALPHA, &ALPHA);
    let ab = poly::mul(&ALPHA, &BETA);
    let bb = poly::mul(&BETA, &BETA);
    (0..5)
        .map(|i| tau * tau * (g.0 * aa[i] + 2.0 * g.1 * ab[i] + g.2 * bb[i]))
        .collect()
}

fn gram(op: &MetricOperator, a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    let ga = op.apply(a)?;
    let gb = op.apply(b)?;
    Ok((dot(&ga, a), dot(&ga, b), dot(&gb, b)))
}

#[derive(Default, Clone, Copy)]
struct Cell {
    sup_u: [f64; 3],
    sup_w: [f64; 3],
    l1_z: [f64; 3],
    l2_v2: [f64; 3],
    dot_v2: f64,
    dot_ustar2: f64,
}

impl Cell {
    fn merge(mut self, o: Cell) -> Cell {
        for i in 0..3 {
            self.sup_u[i] = self.sup_u[i].max(o.sup_u[i]);
            self.sup_w[i] = self.sup_w[i].max(o.sup_w[i]);
            self.l1_z[i] += o.l1_z[i];
            self.l2_v2[i] += o.l2_v2[i];
        }
        self.dot_v2 += o.dot_v2;
        self.dot_ustar2 += o.dot_ustar2;
        self
    }
}

pub fn mismatch_report(tr: &DiscreteTrajectory, p: &Problem) -> Result<MismatchReport> {
    let tau = tr.tau();
    let h = p.norms.h();
    let ug = p.norms.u_gram();
    let visc = &p.norms.visc;
    let cell = |k: usize| -> Result<(Cell, [f64; 3])> {
        let (a, b) = (tr.v(k - 1), tr.v(k));
        let gu = gram(ug, a, b)?;
        let gv = gram(visc, a, b)?;
        let gw = (h * dot(a, a), h * dot(a, b), h * dot(b, b));
        let qu = quartic(tau, gu);
        let qv = quartic(tau, gv);
        let qw = quartic(tau, gw);
        let (u_b, w_b, z_b, v_b) = (gu.2.sqrt(), gw.2.sqrt(), h * b.iter().map(|x| x.abs()).sum::<f64>(), gv.2);
        let tilde_z: f64 = a
            .iter()
            .zip(b)
            .map(|(ai, bi)| poly::integrate_abs(&[-0.5 * ai, ai - bi, 0.5 * (bi - ai)], 0.0, 1.0))
            .sum::<f64>()
            * h
            * tau
            * tau;
        let tilde_v2 = tau * poly::integrate(&qv, 0.0, 1.0);
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let dv2 = tau / 3.0 * visc.quad(&diff)?;
        let embedded: Vec<f64> = diff.iter().map(|x| h * x).collect();
        let dus = p.norms.norm_ustar(&embedded)?;
        let first = k == 1;
        let c = Cell {
            sup_u: [
                tau * u_b,
                tau * u_b,
                if first { 0.0 } else { poly::max_on(&qu, 0.0, 1.0).max(0.0).sqrt() },
            ],
            sup_w: [tau * w_b, tau * w_b, poly::max_on(&qw, 0.0, 1.0).max(0.0).sqrt()],
            l1_z: [tau * tau * z_b, 0.5 * tau * tau * z_b, tilde_z],
            l2_v2: [
                tau * tau * tau * v_b,
                tau * tau * tau * v_b / 3.0,
                if first { 0.0 } else { tilde_v2 },
            ],
            dot_v2: if first { 0.0 } else { dv2 },
            dot_ustar2: tau / 3.0 * dus * dus,
        };
        let fc = if first {
            [poly::max_on(&qv, 0.0, 1.0).max(0.0).sqrt(), tilde_v2.sqrt(), dv2.sqrt()]
        } else {
            [0.0; 3]
        };
        Ok((c, fc))
    };
    let parts = (1..tr.len()).into_par_iter().map(cell).collect::<Result<Vec<_>>>()?;
    let mut first_cell = [0.0f64; 3];
    let mut acc = Cell::default();
    for (c, fc) in parts {
        acc = acc.merge(c);
        for i in 0..3 {
            first_cell[i] = first_cell[i].max(fc[i]);
        }
    }
    Ok(MismatchReport {
        tau,
        eps: tr.eps(),
        sup_u: acc.sup_u,
        sup_w: acc.sup_w,
        l1_z: acc.l1_z,
        l2_v: acc.l2_v2.map(f64::sqrt),
        dot_l2_v: acc.dot_v2.sqrt(),
        dot_l2_ustar: acc.dot_ustar2.sqrt(),
        first_cell,
    })
}

impl MismatchReport {
    /// Left-hand sides of the seven mismatch estimates, in order.
    pub fn totals(&self) -> [f64; 7] {
        [
            self.sup_u.iter().sum(),
            self.sup_w.iter().sum(),
            self.l1_z.iter().sum(),
            self.l2_v.iter().sum(),
            self.dot_l2_v,
            self.first_cell.iter().sum(),
            self.dot_l2_ustar,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::interpolants::InterpolantView;
    use crate::diagnostics::test_support::{play_problem, run};
    use approx::assert_relative_eq;

    #[test]
    fn stationary_run_has_no_mismatch() {
        let p = play_problem(0.0);
        let tr = run(&p, 0.01, 0.1, 1.0, 0.0, 0.0);
        let r = mismatch_report(&tr, &p).unwrap();
        assert!(r.totals().iter().all(|x| *x == 0.0), "{r:?}");
    }

    // brute-force sampling of the interpolants as an independent check
    #[test]
    fn closed_forms_match_sampling() {
        let p = play_problem(2.0);
        let tr = run(&p, 0.02, 0.1, 1.0, 0.0, 0.4);
        let r = mismatch_report(&tr, &p).unwrap();
        let iv = InterpolantView::new(&tr);
        let tau = tr.tau();
        let m = 400;
        let (mut l1, mut l2, mut sup, mut dl2) = (0.0, 0.0, 0.0f64, 0.0);
        for k in 1..tr.len() {
            for j in 0..m {
                let t = tr.t(k - 1) + (j as f64 + 0.5) / m as f64 * tau;
                let d = iv.u_tilde(t)[0] - iv.u_hat(t)[0];
                l1 += d.abs() * tau / m as f64;
                sup = sup.max(d.abs());
                if k > 1 {
                    l2 += d * d * tau / m as f64;
                    let dd = iv.u_tilde_dot(t)[0] - iv.u_hat_dot(t)[0];
                    dl2 += dd * dd * tau / m as f64;
                }
            }
        }
        assert_relative_eq!(r.l1_z[2], l1, max_relative = 1e-4);
        assert_relative_eq!(r.l2_v[2], l2.sqrt(), max_relative = 1e-4);
        assert_relative_eq!(r.sup_w[2], sup, max_relative = 1e-3);
        assert_relative_eq!(r.dot_l2_v, dl2.sqrt(), max_relative = 1e-4);
        // U = W ⊕ K with K = 0 for the single node; ‖·‖_U = |·|_W here
        assert_relative_eq!(r.sup_u[0], r.sup_w[0], max_relative = 1e-12);
    }
}
