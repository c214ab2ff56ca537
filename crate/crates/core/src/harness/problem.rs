//! Construction of problems and scheme configurations from a resolved config.

use std::sync::Arc;

use super::classify::ClassifySettings;
use super::config::{ModelKind, ModelSpec, RunConfig, VelocityScaling, ViscosityKind};
use crate::dissipation::DissipationPotential;
use crate::energy::{ChainEnergy, EnergyModel, Load, Onsite, QuadraticEnergy, Schedule};
use crate::error::{Error, Result};
use crate::jumps::{solve_transition, DetectionSettings, JumpRecord, TransitionSettings};
use crate::spaces::{Boundary, DiscreteSpace, MetricOperator, NormFamily};
use crate::stepper::{InnerConfig, Problem, SchemeConfig};

pub fn load_schedule(m: &ModelSpec) -> Result<Schedule> {
    match &m.load_knots {
        Some(k) => Schedule::piecewise(k.iter().map(|p| (p[0], p[1])).collect()),
        None => Ok(Schedule::Affine {
            a: m.load_offset,
            b: m.load_slope,
        }),
    }
}

pub fn build_problem(m: &ModelSpec, horizon: f64) -> Result<Problem> {
    let schedule = load_schedule(m)?;
    let scalar = || -> Result<NormFamily> {
        let space = DiscreteSpace::new(1, 1.0, Boundary::None)?;
        NormFamily::new(space, MetricOperator::identity(1), MetricOperator::identity(1))
    };
    let (model, norms): (Arc<dyn EnergyModel>, NormFamily) = match m.kind {
        ModelKind::Play => {
            let a = MetricOperator::scaled_identity(1, m.stiffness)?;
            (Arc::new(QuadraticEnergy::new(a, Load::uniform(1, schedule), horizon)?), scalar()?)
        }
        ModelKind::DoubleWell => (
            Arc::new(ChainEnergy::scalar_toy(Onsite::DoubleWell, Load::uniform(1, schedule), horizon)?),
            scalar()?,
        ),
        ModelKind::FlatWell => (
            Arc::new(ChainEnergy::scalar_toy(
                Onsite::FlatWell { a: m.well_halfwidth },
                Load::uniform(1, schedule),
                horizon,
            )?),
            scalar()?,
        ),
        ModelKind::DoubleWellChain => {
            let h = m.length / (m.n + 1) as f64;
            let space = DiscreteSpace::new(m.n, h, Boundary::DirichletZero)?;
            let mass = MetricOperator::scaled_identity(m.n, h)?;
            let visc = match m.viscosity {
                ViscosityKind::Mass => mass.clone(),
                ViscosityKind::Gradient => space.u_gram()?,
            };
            let model = ChainEnergy::new(space, Onsite::DoubleWell, Load::uniform(m.n, schedule), horizon)?;
            (Arc::new(model), NormFamily::new(space, mass, visc)?)
        }
    };
    let n = norms.n();
    let h = norms.h();
    Problem::new(model, DissipationPotential::uniform(n, h, m.rho)?, norms)
}

/// u₀ as used by every run: the constant state, or with relax_initial the
/// state where the frozen t = 0 transition dynamics come to rest.
pub fn initial_state(c: &RunConfig, p: &Problem) -> Result<Vec<f64>> {
    let u0 = vec![c.model.u0; p.n()];
    if !c.model.relax_initial {
        return Ok(u0);
    }
    let rec = JumpRecord::from_states(p, 0.0, (0.0, 0.0), (0, 0), u0.clone(), u0)?;
    let s = transition_settings(c);
    let (_, cost) = solve_transition(p, &rec, &s)?;
    if !cost.converged || cost.end_stability_excess > s.stability_tol {
        return Err(Error::InvalidParameter(format!(
            "relaxation of u0 = {} did not reach a stable rest point (stability excess {:.3e})",
            c.model.u0, cost.end_stability_excess
        )));
    }
    Ok(cost.u_end)
}

/// Scheme configuration for one (τ, ε) pair: u₀^ε ≡ u0 and u₁^ε from the
/// chosen velocity scaling.
pub fn scheme_config(c: &RunConfig, u0: &[f64], tau: f64, eps: f64) -> Result<SchemeConfig> {
    let n = c.model.n;
    let u1 = match c.scheme.u1_scaling {
        VelocityScaling::Fixed => c.scheme.u1,
        VelocityScaling::InvSqrtEps => c.scheme.u1 / eps.sqrt(),
    };
    let inner = InnerConfig {
        max_iter: c.scheme.inner_max_iter,
        tol: c.scheme.inner_tol,
        accelerated: c.scheme.accelerated,
        membership_tol: c.scheme.membership_tol,
        ..InnerConfig::default()
    };
    Ok(SchemeConfig::new(tau, eps, c.scheme.horizon, u0.to_vec(), vec![u1; n])?.with_inner(inner))
}

pub fn detection_settings(c: &RunConfig) -> DetectionSettings {
    DetectionSettings {
        threshold: c.jump.threshold,
        min_jump_z: c.jump.min_z,
        ..DetectionSettings::default()
    }
}

pub fn transition_settings(c: &RunConfig) -> TransitionSettings {
    TransitionSettings {
        sigma: c.jump.sigma,
        tau_prime: c.jump.tau_prime,
        steps_per_sigma: c.jump.steps_per_sigma,
        beta: c.jump.beta,
        alpha: c.jump.alpha,
        stability_tol: c.jump.stability_tol,
    }
}

pub fn classify_settings(c: &RunConfig) -> ClassifySettings {
    ClassifySettings {
        tol: c.sweep.tol,
        transition: transition_settings(c),
        tol_rel: c.jump.tol_rel,
        seed: c.io.seed,
        ..ClassifySettings::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config_str;

    #[test]
    fn builds_every_model_kind() {
        for kind in ["play", "double-well", "flat-well", "double-well-chain"] {
            let c = parse_config_str(&format!("model.kind = \"{kind}\"\n")).unwrap();
            let p = build_problem(&c.model, c.scheme.horizon).unwrap();
            assert_eq!(p.n(), c.model.n);
            let u0 = initial_state(&c, &p).unwrap();
            for &(tau, eps) in &c.sweep.pairs {
                let s = scheme_config(&c, &u0, tau, eps).unwrap();
                assert!(p.regime(s.tau, s.eps).strictly_convex, "{kind} {tau} {eps}");
                assert!(p.regime(s.tau, s.eps).within_regime, "{kind} {tau} {eps}");
            }
        }
    }

    #[test]
    fn relaxed_chain_start_is_stable() {
        let c = parse_config_str("model.kind = \"double-well-chain\"\n").unwrap();
        let p = build_problem(&c.model, c.scheme.horizon).unwrap();
        let u = initial_state(&c, &p).unwrap();
        let xi = p.model.grad(0.0, &u);
        let w = p.pot.weights();
        assert!(xi.iter().zip(w).all(|(x, wi)| x.abs() <= wi + 1e-8), "{xi:?}");
        // the interior stays in the left well, the ends follow the zero data
        assert!((u[p.n() / 2] + 1.0).abs() < 0.2 && u[0] > u[p.n() / 2]);
        let raw = vec![c.model.u0; p.n()];
        let xi0 = p.model.grad(0.0, &raw);
        assert!(xi0.iter().zip(w).any(|(x, wi)| x.abs() > 10.0 * wi));
    }

    #[test]
    fn chain_lambda_accounts_for_poincare() {
        let c = parse_config_str("model.kind = \"double-well-chain\"\n").unwrap();
        let p = build_problem(&c.model, c.scheme.horizon).unwrap();
        let h = 10.0 / 65.0;
        let poincare = 4.0 / (h * h) * (std::f64::consts::PI * h / 20.0).sin().powi(2);
        assert!((p.model.lambda() - (1.0 - poincare)).abs() < 1e-8);
    }
}
