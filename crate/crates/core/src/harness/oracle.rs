//! Closed-form reference solutions.

use crate::error::{Error, Result};

/// Rate-independent solution of the 1-DOF problem E(t,u) = ½u² − f(t)u with
/// R(v) = ρ|v|, for a nondecreasing load: u(t) = max(u0, f(t) − ρ).
pub fn play_oracle(rho: f64, f: impl Fn(f64) -> f64, u0: f64, t: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {rho}")));
    }
    let gap = (u0 - f(0.0)).abs();
    if gap > rho * (1.0 + 1e-12) {
        return Err(Error::UnstableInitialState { gap, rho });
    }
    Ok(u0.max(f(t) - rho))
}

/// Largest error between a sampled path and the oracle.
pub fn play_sup_error(rho: f64, f: impl Fn(f64) -> f64, u0: f64, samples: &[(f64, f64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(t, u) in samples {
        worst = worst.max((u - play_oracle(rho, &f, u0, t)?).abs());
    }
    Ok(worst)
}
