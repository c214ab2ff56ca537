//! Time-incremental minimization scheme with inertia and viscosity.
//!
//! Each step minimizes
//! (ε²/2τ²)|u − 2u^{k−1} + u^{k−2}|²_M + (ε/2τ)|u − u^{k−1}|²_V + R(u − u^{k−1}) + E(t^k, u)
//! over the increment d = u − u^{k−1}, which keeps the quadratic terms free of
//! cancellation when τ is small.

use std::sync::Arc;

use crate::dissipation::DissipationPotential;
use crate::energy::EnergyModel;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::spaces::NormFamily;
use crate::vecops::{dot, norm_inf};

#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    pub max_iter: usize,
    /// Fixed-point tolerance relative to the largest friction weight.
    pub tol: f64,
    /// Factor applied to the step 1/L on a failed sufficient-decrease test.
    pub backtrack: f64,
    pub accelerated: bool,
    /// Tolerance for η^k ∈ ∂R(v^k); failure is a hard error.
    pub membership_tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-10,
            backtrack: 0.5,
            accelerated: false,
            membership_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub tau: f64,
    pub eps: f64,
    pub horizon: f64,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub inner: InnerConfig,
}

impl SchemeConfig {
    pub fn new(tau: f64, eps: f64, horizon: f64, u0: Vec<f64>, u1: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            tau,
            eps,
            horizon,
            u0,
            u1,
            inner: InnerConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_inner(mut self, inner: InnerConfig) -> Self {
        self.inner = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("tau", self.tau), ("eps", self.eps), ("horizon", self.horizon)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
            }
        }
        let ratio = self.horizon / self.tau;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon / tau = {ratio} is not an integer"
            )));
        }
        check_dim(self.u0.len(), self.u1.len())?;
        check_finite("u0", &self.u0)?;
        check_finite("u1", &self.u1)?;
        if !(self.inner.backtrack > 0.0 && self.inner.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtrack factor must lie in (0,1)".into()));
        }
        if !(self.inner.tol > 0.0 && self.inner.membership_tol > 0.0) || self.inner.max_iter == 0 {
            return Err(Error::InvalidParameter("inner tolerances and max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.tau).round() as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }
}

/// Regime and convexity flags for a (τ, ε) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCheck {
    pub tau_over_eps: f64,
    /// ν²c₁²/(2λ) with ν = 1; infinite when λ = 0.
    pub bound: f64,
    pub within_regime: bool,
    /// Lower bound on the Hessian of the step functional relative to the W-metric.
    pub convexity_margin: f64,
    pub strictly_convex: bool,
}

/// Model, dissipation and operators shared by all runs of a problem.
#[derive(Clone)]
pub struct Problem {
    pub model: Arc<dyn EnergyModel>,
    pub pot: DissipationPotential,
    pub norms: NormFamily,
    m_bound: f64,
    v_bound: f64,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.norms.n())
            .field("lambda", &self.model.lambda())
            .finish()
    }
}

impl Problem {
    pub fn new(model: Arc<dyn EnergyModel>, pot: DissipationPotential, norms: NormFamily) -> Result<Self> {
        check_dim(norms.n(), model.dim())?;
        check_dim(norms.n(), pot.dim())?;
        let m_bound = norms.mass.max_abs_row_sum();
        let v_bound = norms.visc.max_abs_row_sum();
        Ok(Self {
            model,
            pot,
            norms,
            m_bound,
            v_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.norms.n()
    }

    pub fn regime(&self, tau: f64, eps: f64) -> RegimeCheck {
        let lambda = self.model.lambda();
        let c1sq = self.norms.c1().powi(2);
        let bound = if lambda > 0.0 { c1sq / (2.0 * lambda) } else { f64::INFINITY };
        let (mu_m, mu_v) = self.norms.relative_lambda_min();
        let margin = eps * eps / (tau * tau) * mu_m + eps / tau * mu_v - lambda;
        RegimeCheck {
            tau_over_eps: tau / eps,
            bound,
            within_regime: tau / eps <= bound,
            convexity_margin: margin,
            strictly_convex: margin > 0.0,
        }
    }

    /// The step functional F_{τ,ε}(t, u; u_prev, u_prev2).
    pub fn step_functional(&self, cfg: &SchemeConfig, t: f64, u: &[f64], u_prev: &[f64], u_prev2: &[f64]) -> Result<f64> {
        let (tau, eps) = (cfg.tau, cfg.eps);
        let d: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| a - b).collect();
        let a: Vec<f64> = (0..u.len()).map(|i| d[i] - (u_prev[i] - u_prev2[i])).collect();
        let inertia = 0.5 * eps * eps / (tau * tau) * self.norms.mass.quad(&a)?;
        let visc = 0.5 * eps / tau * self.norms.visc.quad(&d)?;
        Ok(inertia + visc + self.pot.eval_r(&d)? + crate::energy::eval_energy(self.model.as_ref(), t, u)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub el_residual: f64,
    pub inner_iters: usize,
}

/// Flat storage of {u^k, v^k, ξ^k, η^k} for k = 0..K. Record 0 holds u₀,
/// v⁰ = u₁, ξ⁰ = ∇E(0,u₀) and η⁰ = 0.
#[derive(Clone)]
pub struct DiscreteTrajectory {
    pub config: SchemeConfig,
    pub regime: RegimeCheck,
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
    pub el_residual: Vec<f64>,
    pub inner_iters: Vec<usize>,
    /// Step at which integration aborted, if any.
    pub truncated_at: Option<usize>,
}

impl std::fmt::Debug for DiscreteTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteTrajectory")
            .field("tau", &self.config.tau)
            .field("eps", &self.config.eps)
            .field("n", &self.n)
            .field("records", &self.len())
            .field("truncated_at", &self.truncated_at)
            .finish()
    }
}

impl DiscreteTrajectory {
    fn with_capacity(config: SchemeConfig, regime: RegimeCheck, n: usize) -> Self {
        let cap = (config.steps() + 1) * n;
        Self {
            config,
            regime,
            n,
            u: Vec::with_capacity(cap),
            v: Vec::with_capacity(cap),
            xi: Vec::with_capacity(cap),
            eta: Vec::with_capacity(cap),
            el_residual: Vec::new(),
            inner_iters: Vec::new(),
            truncated_at: None,
        }
    }

    /// Builds a trajectory from stored arrays (as read back from disk).
    pub fn from_parts(
        config: SchemeConfig,
        regime: RegimeCheck,
        n: usize,
        records: Vec<StepRecord>,
    ) -> Result<Self> {
        let mut tr = Self::with_capacity(config, regime, n);
        for r in records {
            for x in [&r.u, &r.v, &r.xi, &r.eta] {
                check_dim(n, x.len())?;
            }
            tr.push(&r.u, &r.v, &r.xi, &r.eta, r.el_residual, r.inner_iters);
        }
        if tr.len() != tr.config.steps() + 1 {
            tr.truncated_at = Some(tr.len());
        }
        Ok(tr)
    }

    fn push(&mut self, u: &[f64], v: &[f64], xi: &[f64], eta: &[f64], res: f64, iters: usize) {
        self.u.extend_from_slice(u);
        self.v.extend_from_slice(v);
        self.xi.extend_from_slice(xi);
        self.eta.extend_from_slice(eta);
        self.el_residual.push(res);
        self.inner_iters.push(iters);
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored records (nodes).
    pub fn len(&self) -> usize {
        self.el_residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the last node.
    pub fn last(&self) -> usize {
        self.len() - 1
    }

    pub fn is_complete(&self) -> bool {
        self.truncated_at.is_none() && self.len() == self.config.steps() + 1
    }

    pub fn tau(&self) -> f64 {
        self.config.tau
    }

    pub fn eps(&self) -> f64 {
        self.config.eps
    }

    pub fn t(&self, k: usize) -> f64 {
        self.config.time(k)
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

    pub fn eta(&self, k: usize) -> &[f64] {
        &self.eta[k * self.n..(k + 1) * self.n]
    }

    pub fn record(&self, k: usize) -> StepRecord {
        StepRecord {
            k,
            t: self.t(k),
            u: self.u(k).to_vec(),
            v: self.v(k).to_vec(),
            xi: self.xi(k).to_vec(),
            eta: self.eta(k).to_vec(),
            el_residual: self.el_residual[k],
            inner_iters: self.inner_iters[k],
        }
    }

    /// Keeps nodes 0..=k.
    pub fn truncate(&mut self, k: usize) {
        let n = self.n;
        let keep = (k + 1).min(self.len());
        self.u.truncate(keep * n);
        self.v.truncate(keep * n);
        self.xi.truncate(keep * n);
        self.eta.truncate(keep * n);
        self.el_residual.truncate(keep);
        self.inner_iters.truncate(keep);
        self.truncated_at = Some(keep);
    }
}

struct StepOutcome {
    d: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
    el_residual: f64,
    iters: usize,
}

// Smooth part in increment form:
// S(d) = (ε²/2τ²)|d − d_prev|²_M + (ε/2τ)|d|²_V + E(t, base + d).
struct Smooth<'a> {
    p: &'a Problem,
    t: f64,
    base: &'a [f64],
    d_prev: &'a [f64],
    cm: f64,
    cv: f64,
    scratch_u: Vec<f64>,
    scratch_a: Vec<f64>,
    scratch_m: Vec<f64>,
}

impl<'a> Smooth<'a> {
    fn value_grad(&mut self, d: &[f64], grad: &mut [f64]) -> f64 {
        let n = d.len();
        for i in 0..n {
            self.scratch_u[i] = self.base[i] + d[i];
            self.scratch_a[i] = d[i] - self.d_prev[i];
        }
        let model = self.p.model.as_ref();
        model.grad_into(self.t, &self.scratch_u, grad);
        let e = model.value(self.t, &self.scratch_u);
        self.p.norms.mass.apply_into(&self.scratch_a, &mut self.scratch_m).expect("dims");
        let mut val = e + 0.5 * self.cm * dot(&self.scratch_m, &self.scratch_a);
        for i in 0..n {
            grad[i] += self.cm * self.scratch_m[i];
        }
        self.p.norms.visc.apply_into(d, &mut self.scratch_m).expect("dims");
        val += 0.5 * self.cv * dot(&self.scratch_m, d);
        for i in 0..n {
            grad[i] += self.cv * self.scratch_m[i];
        }
        val
    }
}

fn step_inner(p: &Problem, cfg: &SchemeConfig, base: &[f64], v_prev: &[f64], t: f64, k: usize) -> Result<StepOutcome> {
    let n = base.len();
    let (tau, eps) = (cfg.tau, cfg.eps);
    let d_prev: Vec<f64> = v_prev.iter().map(|x| x * tau).collect();
    let mut s = Smooth {
        p,
        t,
        base,
        d_prev: &d_prev,
        cm: eps * eps / (tau * tau),
        cv: eps / tau,
        scratch_u: vec![0.0; n],
        scratch_a: vec![0.0; n],
        scratch_m: vec![0.0; n],
    };
    let pot = &p.pot;
    let zero = vec![0.0; n];
    let mut l = s.cm * p.m_bound + s.cv * p.v_bound + p.model.curvature_hint(base).max(0.0);
    l = l.max(f64::MIN_POSITIVE);
    let w_scale = if pot.w_max() > 0.0 {
        pot.w_max()
    } else {
        1.0 + norm_inf(&p.model.grad(t, base))
    };
    let inner = &cfg.inner;

    // ballistic predictor, then prox once so the start is feasible for R
    let mut d = d_prev.clone();
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut center = vec![0.0; n];
    let mut f_d = s.value_grad(&d, &mut g);
    let mut y = d.clone();
    let mut g_y = g.clone();
    let mut f_y = f_d;
    let mut theta = 1.0f64;
    let mut residual = f64::INFINITY;
    for it in 1..=inner.max_iter {
        // prox-gradient step from y with backtracking on L
        let f_trial;
        loop {
            for i in 0..n {
                center[i] = y[i] - g_y[i] / l;
            }
            pot.prox_scaled_into(&center, &zero, 1.0 / l, &mut trial);
            let ft = s.value_grad(&trial, &mut g_trial);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let dd = trial[i] - y[i];
                lin += g_y[i] * dd;
                sq += dd * dd;
            }
            let noise = 1e-15 * (f_y.abs() + 1.0);
            // once the values differ by rounding only, the gradient test decides
            let mut curv = 0.0;
            for i in 0..n {
                curv += (g_trial[i] - g_y[i]) * (trial[i] - y[i]);
            }
            let in_noise = (ft - f_y).abs() <= 1e-11 * (f_y.abs() + 1.0);
            if ft <= f_y + lin + 0.5 * l * sq + noise || sq == 0.0 || (in_noise && curv <= l * sq) {
                f_trial = ft;
                break;
            }
            l /= inner.backtrack;
            if !l.is_finite() {
                return Err(Error::InnerNotConverged {
                    iters: it,
                    residual: f64::INFINITY,
                    tol: inner.tol * w_scale,
                });
            }
        }
        residual = (0..n).map(|i| (l * (trial[i] - y[i])).abs()).fold(0.0, f64::max);
        let floor = 4.0 * f64::EPSILON * (l * norm_inf(&trial) + norm_inf(&g_trial) + l * norm_inf(&d_prev));
        let done = residual <= (inner.tol * w_scale).max(floor);

        if inner.accelerated {
            // FISTA with gradient-mapping restart
            let restart: f64 = (0..n).map(|i| (y[i] - trial[i]) * (trial[i] - d[i])).sum();
            if restart > 0.0 {
                theta = 1.0;
                y.copy_from_slice(&d);
                g_y.copy_from_slice(&g);
                f_y = f_d;
                if !done {
                    continue;
                }
            }
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            for i in 0..n {
                y[i] = trial[i] + beta * (trial[i] - d[i]);
            }
            theta = theta_next;
            d.copy_from_slice(&trial);
            g.copy_from_slice(&g_trial);
            f_d = f_trial;
            f_y = s.value_grad(&y, &mut g_y);
        } else {
            d.copy_from_slice(&trial);
            g.copy_from_slice(&g_trial);
            f_d = f_trial;
            y.copy_from_slice(&d);
            g_y.copy_from_slice(&g);
            f_y = f_d;
        }
        if done {
            return finish(p, cfg, base, &d_prev, t, k, d, it);
        }
    }
    Err(Error::InnerNotConverged {
        iters: inner.max_iter,
        residual,
        tol: inner.tol * w_scale,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(p: &Problem, cfg: &SchemeConfig, base: &[f64], d_prev: &[f64], t: f64, k: usize, d: Vec<f64>, iters: usize) -> Result<StepOutcome> {
    let n = d.len();
    let (tau, eps) = (cfg.tau, cfg.eps);
    let u: Vec<f64> = base.iter().zip(&d).map(|(a, b)| a + b).collect();
    let xi = crate::energy::eval_grad(p.model.as_ref(), t, &u)?;
    let a: Vec<f64> = d.iter().zip(d_prev).map(|(x, y)| x - y).collect();
    let ma = p.norms.mass.apply(&a)?;
    let vd = p.norms.visc.apply(&d)?;
    let cm = eps * eps / (tau * tau);
    let cv = eps / tau;
    let inertia: Vec<f64> = ma.iter().map(|x| cm * x).collect();
    let viscous: Vec<f64> = vd.iter().map(|x| cv * x).collect();
    let eta: Vec<f64> = (0..n).map(|i| -inertia[i] - viscous[i] - xi[i]).collect();
    let lhs: Vec<f64> = (0..n).map(|i| inertia[i] + viscous[i] + eta[i] + xi[i]).collect();
    let el_residual = p.norms.norm_zstar(&lhs);
    let v: Vec<f64> = d.iter().map(|x| x / tau).collect();
    let mtol = cfg.inner.membership_tol;
    if !p.pot.subdiff_membership(&eta, &v, mtol) {
        let excess = eta
            .iter()
            .zip(p.pot.weights())
            .map(|(e, w)| e.abs() - w)
            .fold(f64::NEG_INFINITY, f64::max);
        let r = p.pot.r_unchecked(&v);
        return Err(Error::MembershipFailure {
            step: k,
            detail: format!(
                "box excess {excess:.3e}, <eta,v> - R(v) = {:.3e} (R(v) = {r:.3e}, tol {mtol:.1e})",
                dot(&eta, &v) - r
            ),
        });
    }
    Ok(StepOutcome {
        d,
        xi,
        eta,
        el_residual,
        iters,
    })
}

/// One step of the scheme from (u^{k−1}, u^{k−2}) at time t^k.
pub fn incremental_step(p: &Problem, cfg: &SchemeConfig, u_prev: &[f64], u_prev2: &[f64], t_k: f64, k: usize) -> Result<StepRecord> {
    check_dim(p.n(), u_prev.len())?;
    check_dim(p.n(), u_prev2.len())?;
    let v_prev: Vec<f64> = u_prev.iter().zip(u_prev2).map(|(a, b)| (a - b) / cfg.tau).collect();
    let out = step_inner(p, cfg, u_prev, &v_prev, t_k, k)?;
    Ok(StepRecord {
        k,
        t: t_k,
        u: u_prev.iter().zip(&out.d).map(|(a, b)| a + b).collect(),
        v: out.d.iter().map(|x| x / cfg.tau).collect(),
        xi: out.xi,
        eta: out.eta,
        el_residual: out.el_residual,
        inner_iters: out.iters,
    })
}

/// Integrates the scheme over [0, T]. On a step failure the partial
/// trajectory is returned inside [`Error::Truncated`].
pub fn run_trajectory(
    p: &Problem,
    cfg: &SchemeConfig,
    mut progress: impl FnMut(usize, f64, usize),
) -> Result<DiscreteTrajectory> {
    cfg.validate()?;
    check_dim(p.n(), cfg.u0.len())?;
    let n = p.n();
    let regime = p.regime(cfg.tau, cfg.eps);
    let mut tr = DiscreteTrajectory::with_capacity(cfg.clone(), regime, n);
    let xi0 = crate::energy::eval_grad(p.model.as_ref(), 0.0, &cfg.u0)?;
    tr.push(&cfg.u0, &cfg.u1, &xi0, &vec![0.0; n], 0.0, 0);
    let mut u_next = vec![0.0; n];
    let mut v_next = vec![0.0; n];
    for k in 1..=cfg.steps() {
        let t = cfg.time(k);
        let res = step_inner(p, cfg, tr.u(k - 1), tr.v(k - 1), t, k);
        let out = match res {
            Ok(o) => o,
            Err(e) => {
                tr.truncated_at = Some(k);
                return Err(Error::Truncated {
                    step: k,
                    partial: Box::new(tr),
                    source: Box::new(e),
                });
            }
        };
        let prev = tr.u(k - 1);
        for i in 0..n {
            u_next[i] = prev[i] + out.d[i];
            v_next[i] = out.d[i] / cfg.tau;
        }
        tr.push(&u_next, &v_next, &out.xi, &out.eta, out.el_residual, out.iters);
        progress(k, out.el_residual, out.iters);
    }
    Ok(tr)
}
