//! ε-uniform a priori quantities and the node inequalities for ũ.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stepper::{DiscreteTrajectory, Problem};
use crate::vecops::dot;

/// The seven quantities (i′)–(vii′). Maxima run over k = 0..K, sums over
/// k = 1..K.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UniformBounds {
    pub tau: f64,
    pub eps: f64,
    pub max_energy: f64,
    pub max_u_norm: f64,
    pub max_eps_v_m: f64,
    pub z_variation: f64,
    pub viscous_dissipation: f64,
    pub max_xi_dual: f64,
    pub inertial_dual: f64,
}

impl UniformBounds {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.max_energy,
            self.max_u_norm,
            self.max_eps_v_m,
            self.z_variation,
            self.viscous_dissipation,
            self.max_xi_dual,
            self.inertial_dual,
        ]
    }
}

pub fn uniform_bounds_report(tr: &DiscreteTrajectory, p: &Problem) -> Result<UniformBounds> {
    if !tr.is_complete() {
        return Err(Error::InvalidParameter("uniform bounds need a complete trajectory".into()));
    }
    let (tau, eps) = (tr.tau(), tr.eps());
    let h = p.norms.h();
    type Node = (f64, f64, f64, f64, f64, f64, f64);
    let nodes: Vec<Node> = (0..tr.len())
        .into_par_iter()
        .map(|k| -> Result<Node> {
            let v = tr.v(k);
            let e = crate::energy::eval_energy(p.model.as_ref(), tr.t(k), tr.u(k))?;
            let un = p.norms.norm_u(tr.u(k))?;
            let vm = eps * p.norms.norm_m(v)?;
            let xi = p.norms.norm_ustar(tr.xi(k))?;
            if k == 0 {
                return Ok((e, un, vm, 0.0, 0.0, xi, 0.0));
            }
            let z = tau * p.norms.norm_z(v);
            let vis = eps * tau * p.norms.visc.quad(v)?;
            let acc: Vec<f64> = v
                .iter()
                .zip(tr.v(k - 1))
                .map(|(a, b)| h * eps * eps * (a - b) / tau)
                .collect();
            let inert = tau * p.norms.norm_ustar(&acc)?.powi(2);
            Ok((e, un, vm, z, vis, xi, inert))
        })
        .collect::<Result<_>>()?;
    let mut b = UniformBounds {
        tau,
        eps,
        max_energy: f64::NEG_INFINITY,
        max_u_norm: 0.0,
        max_eps_v_m: 0.0,
        z_variation: 0.0,
        viscous_dissipation: 0.0,
        max_xi_dual: 0.0,
        inertial_dual: 0.0,
    };
    for (e, un, vm, z, vis, xi, inert) in nodes {
        b.max_energy = b.max_energy.max(e);
        b.max_u_norm = b.max_u_norm.max(un);
        b.max_eps_v_m = b.max_eps_v_m.max(vm);
        b.z_variation += z;
        b.viscous_dissipation += vis;
        b.max_xi_dual = b.max_xi_dual.max(xi);
        b.inertial_dual += inert;
    }
    Ok(b)
}

/// Node inequalities on the window [t^m, t^n]:
/// ∫R(ũ̇) ≤ ∫R(û̇) + Cτ/ε and ∫|ũ̇|²_V ≤ ∫|û̇|²_V + τ|v^m|²_V.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NodeWindowCheck {
    pub m: usize,
    pub n: usize,
    pub r_tilde: f64,
    pub r_hat: f64,
    pub r_allowance: f64,
    pub v_tilde: f64,
    pub v_hat: f64,
    pub v_allowance: f64,
    pub pass: bool,
}

/// ∫₀¹ |a + σ(b − a)| dσ.
fn abs_affine_mean(a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a.abs() + b.abs())
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Checks the node inequalities with the constant C = ρ₂·c_ZM·(iii′)/2,
/// where ‖x‖_Z ≤ c_ZM|x|_M.
pub fn node_inequalities(tr: &DiscreteTrajectory, p: &Problem, bounds: &UniformBounds, windows: &[(usize, usize)]) -> Result<Vec<NodeWindowCheck>> {
    let (tau, eps) = (tr.tau(), tr.eps());
    let n_dim = tr.dim() as f64;
    let c_zm = p.norms.h() * (n_dim / p.norms.mass.lambda_min()).sqrt();
    let c = p.pot.rho2() * c_zm * bounds.max_eps_v_m / 2.0;
    let w = p.pot.weights();
    // per-cell integrals, prefix-summed
    let cells: Vec<(f64, f64, f64, f64)> = (1..tr.len())
        .into_par_iter()
        .map(|k| -> Result<_> {
            let (a, b) = (tr.v(k - 1), tr.v(k));
            let rt: f64 = (0..a.len()).map(|i| w[i] * abs_affine_mean(a[i], b[i])).sum::<f64>() * tau;
            let rh = tau * p.pot.eval_r(b)?;
            let va = p.norms.visc.apply(a)?;
            let vb = p.norms.visc.apply(b)?;
            let (aa, ab, bb) = (dot(&va, a), dot(&va, b), dot(&vb, b));
            Ok((rt, rh, tau / 3.0 * (aa + ab + bb), tau * bb))
        })
        .collect::<Result<_>>()?;
    let mut pre = vec![(0.0, 0.0, 0.0, 0.0)];
    for c in &cells {
        let l = *pre.last().unwrap();
        pre.push((l.0 + c.0, l.1 + c.1, l.2 + c.2, l.3 + c.3));
    }
    windows
        .iter()
        .map(|&(m, n)| {
            if m > n || n > tr.last() {
                return Err(Error::InvalidParameter(format!("window ({m}, {n}) outside 0..={}", tr.last())));
            }
            let (r_tilde, r_hat) = (pre[n].0 - pre[m].0, pre[n].1 - pre[m].1);
            let (v_tilde, v_hat) = (pre[n].2 - pre[m].2, pre[n].3 - pre[m].3);
            let r_allowance = c * tau / eps;
            let v_allowance = tau * p.norms.visc.quad(tr.v(m))?;
            let slack = 1e-12 * (1.0 + r_hat + v_hat);
            let pass = r_tilde <= r_hat + r_allowance + slack && v_tilde <= v_hat + v_allowance + slack;
            Ok(NodeWindowCheck {
                m,
                n,
                r_tilde,
                r_hat,
                r_allowance,
                v_tilde,
                v_hat,
                v_allowance,
                pass,
            })
        })
        .collect()
}
