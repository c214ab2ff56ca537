//! Jump detection on limit trajectories and the viscoinertial cost of the
//! blown-up transition at frozen time.
//!
//! Near a jump at t*, the rescaling r = t* + εs turns the scheme into the
//! ε = 1 scheme for the autonomous energy E(t*, ·). The cost of a transition
//! is Σ τ′ p_V(v^k, −M a^k − ξ^k) with a^k = (v^k − v^{k−1})/τ′.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::diagnostics::interpolants::InterpolantView;
use crate::energy::{gauss_legendre4, EnergyModel};
use crate::error::{Error, Result};
use crate::stepper::{incremental_step, DiscreteTrajectory, Problem, SchemeConfig};
use crate::vecops::{dot, sub};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct JumpRecord {
    pub t_star: f64,
    pub window: (f64, f64),
    pub window_nodes: (usize, usize),
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    /// E(t*, u⁻) − E(t*, u⁺).
    pub energy_drop: f64,
    /// R(u⁺ − u⁻).
    pub r_floor: f64,
    /// ‖u⁺ − u⁻‖_Z.
    pub size_z: f64,
}

impl JumpRecord {
    /// Record spanning the node window (a, b); t* is the midpoint of the
    /// cell with the largest R-increment.
    pub fn synthetic(tr: &DiscreteTrajectory, p: &Problem, nodes: (usize, usize)) -> Result<Self> {
        let (a, b) = nodes;
        if a >= b || b > tr.last() {
            return Err(Error::InvalidParameter(format!("jump window ({a}, {b}) is empty or out of range")));
        }
        let mut peak = (a + 1, f64::NEG_INFINITY);
        for k in a + 1..=b {
            let r = p.pot.eval_r(&sub(tr.u(k), tr.u(k - 1)))?;
            if r > peak.1 {
                peak = (k, r);
            }
        }
        let t_star = 0.5 * (tr.t(peak.0 - 1) + tr.t(peak.0));
        Self::from_states(p, t_star, (tr.t(a), tr.t(b)), nodes, tr.u(a).to_vec(), tr.u(b).to_vec())
    }

    pub fn from_states(p: &Problem, t_star: f64, window: (f64, f64), window_nodes: (usize, usize), u_minus: Vec<f64>, u_plus: Vec<f64>) -> Result<Self> {
        let e_minus = crate::energy::eval_energy(p.model.as_ref(), t_star, &u_minus)?;
        let e_plus = crate::energy::eval_energy(p.model.as_ref(), t_star, &u_plus)?;
        let diff = sub(&u_plus, &u_minus);
        Ok(Self {
            t_star,
            window,
            window_nodes,
            energy_drop: e_minus - e_plus,
            r_floor: p.pot.eval_r(&diff)?,
            size_z: p.norms.norm_z(&diff),
            u_minus,
            u_plus,
        })
    }

    /// Same jump with u⁺ replaced by the landing point of a transition.
    pub fn landed(&self, p: &Problem, u_plus: &[f64]) -> Result<Self> {
        Self::from_states(p, self.t_star, self.window, self.window_nodes, self.u_minus.clone(), u_plus.to_vec())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionSettings {
    /// Flag windows whose R-rate exceeds threshold × median positive rate.
    pub threshold: f64,
    /// Discard candidates with ‖u⁺ − u⁻‖_Z at or below this.
    pub min_jump_z: f64,
    pub max_windows: usize,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        Self {
            threshold: 20.0,
            min_jump_z: 1e-2,
            max_windows: 1024,
        }
    }
}

/// Maximal runs of windows with concentrated R-variation.
pub fn detect_jumps(tr: &DiscreteTrajectory, p: &Problem, settings: &DetectionSettings) -> Result<Vec<JumpRecord>> {
    let cells = tr.last();
    if cells == 0 {
        return Ok(Vec::new());
    }
    let mut inc = vec![0.0; cells + 1];
    for (k, x) in inc.iter_mut().enumerate().skip(1) {
        *x = p.pot.eval_r(&sub(tr.u(k), tr.u(k - 1)))?;
    }
    let nw = settings.max_windows.min(cells).max(1);
    let edges: Vec<usize> = (0..=nw).map(|i| (i * cells + nw / 2) / nw).collect();
    let rates: Vec<f64> = edges
        .windows(2)
        .map(|e| inc[e[0] + 1..=e[1]].iter().sum::<f64>() / (tr.t(e[1]) - tr.t(e[0])))
        .collect();
    let mut positive: Vec<f64> = rates.iter().copied().filter(|r| *r > 0.0).collect();
    if positive.is_empty() {
        return Ok(Vec::new());
    }
    positive.sort_by(f64::total_cmp);
    let median = positive[positive.len() / 2];
    let cut = settings.threshold * median;
    let mut out = Vec::new();
    let mut i = 0;
    while i < nw {
        if rates[i] <= cut {
            i += 1;
            continue;
        }
        let start = i;
        while i < nw && rates[i] > cut {
            i += 1;
        }
        let nodes = (edges[start], edges[i]);
        let rec = JumpRecord::synthetic(tr, p, nodes)?;
        if rec.size_z > settings.min_jump_z {
            out.push(rec);
        }
    }
    Ok(out)
}

/// u ↦ E(t*, u).
pub struct FrozenEnergy {
    inner: Arc<dyn EnergyModel>,
    t_star: f64,
}

impl FrozenEnergy {
    pub fn new(inner: Arc<dyn EnergyModel>, t_star: f64) -> Self {
        Self { inner, t_star }
    }
}

impl EnergyModel for FrozenEnergy {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, _t: f64, u: &[f64]) -> f64 {
        self.inner.value(self.t_star, u)
    }
    fn grad_into(&self, _t: f64, u: &[f64], out: &mut [f64]) {
        self.inner.grad_into(self.t_star, u, out)
    }
    fn power(&self, _t: f64, _u: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn lambda(&self) -> f64 {
        self.inner.lambda()
    }
    fn curvature_hint(&self, u: &[f64]) -> f64 {
        self.inner.curvature_hint(u)
    }
    fn power_bound(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn work(&self, _s: f64, _t: f64, _u: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
}

/// Central-difference Hessian of E(t, ·), symmetrized.
pub fn fd_hessian(model: &dyn EnergyModel, t: f64, u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    let mut x = u.to_vec();
    for j in 0..n {
        let d = 1e-5 * (1.0 + u[j].abs());
        x[j] = u[j] + d;
        let gp = model.grad(t, &x);
        x[j] = u[j] - d;
        let gm = model.grad(t, &x);
        x[j] = u[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * d);
        }
    }
    0.5 * (&h + h.transpose())
}

/// 50 characteristic periods 2π·sqrt(λmax(M)/μ), μ the smallest Hessian
/// eigenvalue at `u` (the largest |eigenvalue| when that is not positive).
pub fn default_sigma(model: &dyn EnergyModel, p: &Problem, t_star: f64, u: &[f64]) -> f64 {
    let eig = SymmetricEigen::new(fd_hessian(model, t_star, u)).eigenvalues;
    let max_abs = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let mu = if min > 1e-8 * max_abs.max(1.0) {
        min
    } else if max_abs > 0.0 {
        max_abs
    } else {
        1.0
    };
    50.0 * 2.0 * std::f64::consts::PI * (p.norms.mass.lambda_max() / mu).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionSettings {
    pub sigma: Option<f64>,
    /// τ′ = sigma / steps_per_sigma unless given.
    pub tau_prime: Option<f64>,
    pub steps_per_sigma: usize,
    /// Boundary slack for the terminal velocity and endpoint.
    pub beta: f64,
    /// Subgradient slack (realized as 0 since ξ is recomputed).
    pub alpha: f64,
    /// Tolerance in the frictional stability test |ξ_i| ≤ w_i + tol.
    pub stability_tol: f64,
}

impl Default for TransitionSettings {
    fn default() -> Self {
        Self {
            sigma: None,
            tau_prime: None,
            steps_per_sigma: 100_000,
            beta: 1e-6,
            alpha: 0.0,
            stability_tol: 1e-8,
        }
    }
}

/// States of the ε = 1 frozen-time scheme, starting from (u⁻, 0).
#[derive(Debug, Clone)]
pub struct TransitionPath {
    pub t_star: f64,
    pub tau_prime: f64,
    pub n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    xi: Vec<f64>,
    /// Steps requested (σ/τ′); the path may stop early once it rests at a
    /// stable point, after which the scheme is stationary.
    pub requested_steps: usize,
}

impl TransitionPath {
    pub fn len(&self) -> usize {
        self.u.len() / self.n
    }
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
    pub fn last(&self) -> usize {
        self.len() - 1
    }
    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k * self.n..(k + 1) * self.n]
    }
    pub fn v(&self, k: usize) -> &[f64] {
        &self.v[k * self.n..(k + 1) * self.n]
    }
    pub fn xi(&self, k: usize) -> &[f64] {
        &self.xi[k * self.n..(k + 1) * self.n]
    }
    fn push(&mut self, u: &[f64], v: &[f64], xi: &[f64]) {
        self.u.extend_from_slice(u);
        self.v.extend_from_slice(v);
        self.xi.extend_from_slice(xi);
    }

    /// Keeps nodes 0..=k, as if the solve had been cut short.
    pub fn truncate(&mut self, k: usize) {
        let keep = (k + 1).min(self.len()) * self.n;
        self.u.truncate(keep);
        self.v.truncate(keep);
        self.xi.truncate(keep);
        self.requested_steps = self.requested_steps.max(k);
    }

    /// Transition as a trajectory of the ε = 1 scheme (for the interpolants).
    pub fn as_trajectory(&self, p: &Problem) -> Result<DiscreteTrajectory> {
        let k = self.last().max(1);
        let mut cfg = SchemeConfig::new(self.tau_prime, 1.0, self.tau_prime * k as f64, self.u(0).to_vec(), vec![0.0; self.n])?;
        cfg.horizon = self.tau_prime * self.last() as f64;
        let records = (0..self.len())
            .map(|i| crate::stepper::StepRecord {
                k: i,
                t: i as f64 * self.tau_prime,
                u: self.u(i).to_vec(),
                v: self.v(i).to_vec(),
                xi: self.xi(i).to_vec(),
                eta: vec![0.0; self.n],
                el_residual: 0.0,
                inner_iters: 0,
            })
            .collect();
        DiscreteTrajectory::from_parts(cfg, p.regime(self.tau_prime, 1.0), self.n, records)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CostEstimate {
    pub value: f64,
    /// σ as requested (steps × τ′).
    pub sigma: f64,
    /// Time actually integrated; less than σ after an early stop at rest.
    pub sigma_used: f64,
    pub tau_prime: f64,
    pub steps: usize,
    pub converged: bool,
    pub end_velocity_w: f64,
    /// max_i (|ξ_i| − w_i) at the endpoint.
    pub end_stability_excess: f64,
    pub u_end: Vec<f64>,
    /// Smallest p_V(v^k, ζ^k) − ⟨ζ^k, v^k⟩ along the path.
    pub fenchel_min: f64,
    /// (½|v|²_M + E)(start) − (½|v|²_M + E)(end).
    pub energy_release: f64,
}

/// Runs the frozen-time ε = 1 scheme from (u⁻, 0) and accumulates the cost.
pub fn solve_transition(p: &Problem, jump: &JumpRecord, settings: &TransitionSettings) -> Result<(TransitionPath, CostEstimate)> {
    let frozen: Arc<dyn EnergyModel> = Arc::new(FrozenEnergy::new(p.model.clone(), jump.t_star));
    let fp = Problem::new(frozen, p.pot.clone(), p.norms.clone())?;
    let sigma = settings
        .sigma
        .unwrap_or_else(|| default_sigma(p.model.as_ref(), p, jump.t_star, &jump.u_plus));
    let tau_prime = settings.tau_prime.unwrap_or(sigma / settings.steps_per_sigma as f64);
    if !(sigma > 0.0 && tau_prime > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} and tau' {tau_prime} must be positive")));
    }
    let steps = (sigma / tau_prime).round().max(1.0) as usize;
    let cfg = SchemeConfig::new(tau_prime, 1.0, tau_prime * steps as f64, jump.u_minus.clone(), vec![0.0; p.n()])?;
    let n = p.n();
    let mut path = TransitionPath {
        t_star: jump.t_star,
        tau_prime,
        n,
        u: Vec::new(),
        v: Vec::new(),
        xi: Vec::new(),
        requested_steps: steps,
    };
    let xi0 = fp.model.grad(0.0, &jump.u_minus);
    path.push(&jump.u_minus, &vec![0.0; n], &xi0);
    let mut u_prev2 = jump.u_minus.clone();
    for k in 1..=steps {
        let u_prev = path.u(k - 1).to_vec();
        let rec = incremental_step(&fp, &cfg, &u_prev, &u_prev2, tau_prime * k as f64, k)?;
        path.push(&rec.u, &rec.v, &rec.xi);
        u_prev2 = u_prev;
        if rec.v.iter().all(|x| *x == 0.0) && stability_excess(p, &rec.xi) <= 0.0 {
            break;
        }
    }
    let cost = evaluate_cost(p, &path, settings)?;
    Ok((path, cost))
}

fn stability_excess(p: &Problem, xi: &[f64]) -> f64 {
    xi.iter()
        .zip(p.pot.weights())
        .map(|(x, w)| x.abs() - w)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Cost and convergence flags of a computed path.
pub fn evaluate_cost(p: &Problem, path: &TransitionPath, settings: &TransitionSettings) -> Result<CostEstimate> {
    let tp = path.tau_prime;
    let mut value = 0.0;
    let mut fenchel_min = f64::INFINITY;
    for k in 1..path.len() {
        let (v, v0) = (path.v(k), path.v(k - 1));
        let ma = p.norms.mass.apply(&sub(v, v0))?;
        let zeta: Vec<f64> = ma.iter().zip(path.xi(k)).map(|(m, x)| -m / tp - x).collect();
        let pv = p.pot.eval_contact_potential(&p.norms.visc, v, &zeta)?;
        fenchel_min = fenchel_min.min(pv - dot(&zeta, v));
        value += tp * pv;
    }
    let last = path.last();
    let end_velocity_w = p.norms.norm_w(path.v(last));
    let end_stability_excess = stability_excess(p, path.xi(last));
    let total = |k: usize| -> Result<f64> {
        Ok(0.5 * p.norms.mass.quad(path.v(k))? + crate::energy::eval_energy(p.model.as_ref(), path.t_star, path.u(k))?)
    };
    let energy_release = total(0)? - total(last)?;
    Ok(CostEstimate {
        value,
        sigma: tp * path.requested_steps as f64,
        sigma_used: tp * last as f64,
        tau_prime: tp,
        steps: last,
        converged: end_velocity_w <= settings.beta && end_stability_excess <= settings.stability_tol,
        end_velocity_w,
        end_stability_excess,
        u_end: path.u(last).to_vec(),
        fenchel_min: if fenchel_min.is_finite() { fenchel_min } else { 0.0 },
        energy_release,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub pass: bool,
    pub measured: f64,
    pub allowed: f64,
}

impl ConditionCheck {
    fn le(measured: f64, allowed: f64) -> Self {
        Self {
            pass: measured <= allowed,
            measured,
            allowed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// Στ′‖v^k‖_Z ≤ 2·bound_const.
    pub adm1: ConditionCheck,
    /// max_k ‖ξ^k − ∇E(t*, u^k)‖_{Z*} ≤ α.
    pub adm2: ConditionCheck,
    /// max(‖u_end − u⁺‖_W, |v_end|_W, ‖u_0 − u⁻‖_W) ≤ β.
    pub adm3: ConditionCheck,
    /// ∫⟨Mũ̈ + ∇E(ũ), ũ̇⟩ ≤ Δ(½|ũ̇|²_M + E(ũ)) + 2·bound_const·α, checked as
    /// measured = LHS − Δ and allowed = 2·bound_const·α + 1e−9(1 + |Δ|).
    pub adm4: ConditionCheck,
    pub pass: bool,
}

/// Admissibility of a transition path joining (jump.u⁻, 0) to (jump.u⁺, 0).
pub fn certify_admissibility(p: &Problem, path: &TransitionPath, jump: &JumpRecord, alpha: f64, beta: f64, bound_const: f64) -> Result<AdmissibilityReport> {
    let tp = path.tau_prime;
    let last = path.last();
    let variation: f64 = (1..path.len()).map(|k| tp * p.norms.norm_z(path.v(k))).sum();
    let adm1 = ConditionCheck::le(variation, 2.0 * bound_const);

    let mut sub_gap = 0.0f64;
    for k in 0..path.len() {
        let g = p.model.grad(path.t_star, path.u(k));
        sub_gap = sub_gap.max(p.norms.norm_zstar(&sub(path.xi(k), &g)));
    }
    let adm2 = ConditionCheck::le(sub_gap, alpha);

    let end = p.norms.norm_w(&sub(path.u(last), &jump.u_plus));
    let start = p.norms.norm_w(&sub(path.u(0), &jump.u_minus));
    let boundary = end.max(start).max(p.norms.norm_w(path.v(last))).max(p.norms.norm_w(path.v(0)));
    let adm3 = ConditionCheck::le(boundary, beta);

    // chain rule along the quadratic interpolant ũ
    let tr = path.as_trajectory(p)?;
    let iv = InterpolantView::new(&tr);
    let model = p.model.as_ref();
    let t_star = path.t_star;
    let mut lhs = 0.0;
    for k in 1..path.len() {
        let acc: Vec<f64> = sub(path.v(k), path.v(k - 1)).iter().map(|x| x / tp).collect();
        let ma = p.norms.mass.apply(&acc)?;
        let (a, b) = ((k - 1) as f64 * tp, k as f64 * tp);
        lhs += gauss_legendre4(a, b, |s| {
            let u = iv.u_tilde(s);
            let du = iv.u_tilde_dot(s);
            let g = model.grad(t_star, &u);
            Ok(dot(&ma, &du) + dot(&g, &du))
        })?;
    }
    let total = |s: f64| -> Result<f64> {
        let du = iv.u_tilde_dot(s);
        Ok(0.5 * p.norms.mass.quad(&du)? + model.value(t_star, &iv.u_tilde(s)))
    };
    let horizon = last as f64 * tp;
    let delta = total(horizon)? - total(0.0)?;
    let adm4 = ConditionCheck::le(lhs - delta, 2.0 * bound_const * alpha + 1e-9 * (1.0 + delta.abs()));
    let pass = adm1.pass && adm2.pass && adm3.pass && adm4.pass;
    Ok(AdmissibilityReport {
        adm1,
        adm2,
        adm3,
        adm4,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct JumpVerdict {
    pub pass: bool,
    pub gap: f64,
    pub allowed: f64,
    pub converged: bool,
}

/// PASS iff the cost converged and |cost − drop| ≤ tol_rel·(1 + drop).
pub fn reconcile_jump(jump: &JumpRecord, cost: &CostEstimate, tol_rel: f64) -> JumpVerdict {
    let gap = (cost.value - jump.energy_drop).abs();
    let allowed = tol_rel * (1.0 + jump.energy_drop);
    JumpVerdict {
        pass: cost.converged && gap <= allowed,
        gap,
        allowed,
        converged: cost.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{ChainEnergy, Load, Onsite, Schedule};
    use crate::spaces::{Boundary, DiscreteSpace, MetricOperator, NormFamily};
    use crate::stepper::run_trajectory;
    use crate::DissipationPotential;
    use approx::assert_relative_eq;

    fn double_well(rho: f64) -> Problem {
        let model = Arc::new(ChainEnergy::scalar_toy(Onsite::DoubleWell, Load::uniform(1, Schedule::linear(1.0)), 1.0).unwrap());
        let space = DiscreteSpace::new(1, 1.0, Boundary::None).unwrap();
        let norms = NormFamily::new(space, MetricOperator::identity(1), MetricOperator::identity(1)).unwrap();
        Problem::new(model, DissipationPotential::uniform(1, 1.0, rho).unwrap(), norms).unwrap()
    }

    fn fold_time(rho: f64) -> f64 {
        // scan W′(u) + ρ along the left branch for its maximum
        let wp = |u: f64| u * u * u - u;
        let best = (0..=200_000)
            .map(|i| -1.0 + i as f64 * (1.0 - 0.3) / 200_000.0)
            .map(|u| wp(u) + rho)
            .fold(f64::NEG_INFINITY, f64::max);
        best
    }

    #[test]
    fn fold_oracle_matches_closed_form() {
        assert_relative_eq!(fold_time(0.2), 0.2 + 2.0 / (3.0 * 3f64.sqrt()), epsilon = 1e-9);
    }

    #[test]
    fn double_well_single_jump_and_reconciled_cost() {
        let p = double_well(0.2);
        // the viscous delay past the fold scales like ε^{2/3}
        let cfg = SchemeConfig::new(1e-5, 5e-5, 0.7, vec![-1.0], vec![0.0]).unwrap();
        let tr = run_trajectory(&p, &cfg, |_, _, _| {}).unwrap();
        let jumps = detect_jumps(&tr, &p, &DetectionSettings::default()).unwrap();
        assert_eq!(jumps.len(), 1, "{jumps:?}");
        let j = &jumps[0];
        let t_fold = fold_time(0.2);
        assert!((j.t_star - t_fold).abs() < 0.01 * t_fold, "t* = {}", j.t_star);
        let (path, cost) = solve_transition(&p, j, &TransitionSettings::default()).unwrap();
        assert!(cost.converged, "{cost:?}");
        assert!(cost.fenchel_min >= -1e-9);
        let landed = j.landed(&p, &cost.u_end).unwrap();
        let verdict = reconcile_jump(&landed, &cost, 0.05);
        assert!(verdict.pass, "{verdict:?} drop {}", landed.energy_drop);
        assert!(cost.value >= landed.r_floor);
        let adm = certify_admissibility(&p, &path, &landed, 0.0, 1e-6, 10.0).unwrap();
        assert!(adm.pass, "{adm:?}");
    }

    #[test]
    fn stable_start_gives_zero_cost() {
        let p = double_well(0.2);
        let j = JumpRecord::from_states(&p, 0.0, (0.0, 0.0), (0, 0), vec![-1.0], vec![-1.0]).unwrap();
        let s = TransitionSettings {
            sigma: Some(1.0),
            tau_prime: Some(1e-3),
            ..Default::default()
        };
        let (path, cost) = solve_transition(&p, &j, &s).unwrap();
        assert_eq!(cost.value, 0.0);
        assert!(cost.converged);
        assert!(path.len() <= 2);
        assert!(reconcile_jump(&j, &cost, 1e-12).pass);
        let adm = certify_admissibility(&p, &path, &j, 0.0, 0.0, 0.0).unwrap();
        assert!(adm.pass, "{adm:?}");
    }

    #[test]
    fn truncated_transition_fails_adm3() {
        let p = double_well(0.2);
        let t_star = fold_time(0.2) + 0.01;
        let j = JumpRecord::from_states(&p, t_star, (t_star, t_star), (0, 0), vec![-1.0 / 3f64.sqrt()], vec![1.2]).unwrap();
        let s = TransitionSettings {
            sigma: Some(60.0),
            tau_prime: Some(1e-3),
            ..Default::default()
        };
        let (mut path, cost) = solve_transition(&p, &j, &s).unwrap();
        let landed = j.landed(&p, &cost.u_end).unwrap();
        path.truncate(path.len() / 4);
        let c = evaluate_cost(&p, &path, &s).unwrap();
        assert!(!c.converged);
        let adm = certify_admissibility(&p, &path, &landed, 0.0, 1e-6, 10.0).unwrap();
        assert!(!adm.adm3.pass && !adm.pass);
        assert!(adm.adm3.measured > 1e-3);
    }

    #[test]
    fn synthetic_equal_cost_passes() {
        let p = double_well(0.2);
        let j = JumpRecord::from_states(&p, 0.6, (0.6, 0.6), (0, 0), vec![-0.5], vec![1.1]).unwrap();
        let c = CostEstimate {
            value: j.energy_drop,
            sigma: 1.0,
            sigma_used: 1.0,
            tau_prime: 1e-3,
            steps: 1000,
            converged: true,
            end_velocity_w: 0.0,
            end_stability_excess: -0.1,
            u_end: j.u_plus.clone(),
            fenchel_min: 0.0,
            energy_release: j.energy_drop,
        };
        assert!(reconcile_jump(&j, &c, 0.0).pass);
    }

    #[test]
    fn frozen_energy_ignores_time() {
        let p = double_well(0.2);
        let f = FrozenEnergy::new(p.model.clone(), 0.4);
        assert_eq!(f.value(7.0, &[0.3]), p.model.value(0.4, &[0.3]));
        assert_eq!(f.power(1.0, &[0.3]).unwrap(), 0.0);
        let h = fd_hessian(&f, 0.0, &[0.3]);
        assert_relative_eq!(h[(0, 0)], 3.0 * 0.09 - 1.0, epsilon = 1e-6);
    }

    #[test]
    fn convex_run_has_no_jumps() {
        let p = crate::diagnostics::test_support::play_problem(2.0);
        let tr = crate::diagnostics::test_support::run(&p, 1e-3, 1e-2, 1.0, 0.0, 0.0);
        assert!(detect_jumps(&tr, &p, &DetectionSettings::default()).unwrap().is_empty());
        let q = crate::diagnostics::test_support::play_problem(0.0);
        let tr = crate::diagnostics::test_support::run(&q, 1e-2, 1e-1, 1.0, 0.0, 0.0);
        assert!(detect_jumps(&tr, &q, &DetectionSettings::default()).unwrap().is_empty());
    }
}
