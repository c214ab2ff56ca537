//! Read-only analyses of computed trajectories.

pub mod bounds;
pub mod defect;
pub mod interpolants;
pub mod ledger;
pub mod mismatch;
pub(crate) mod poly;

pub use bounds::{node_inequalities, uniform_bounds_report, NodeWindowCheck, UniformBounds};
pub use defect::{build_defect_ledger, DefectAtom, DefectLedger, DiffuseInterval};
pub use interpolants::InterpolantView;
pub use ledger::{audit_energy_inequality, EnergyLedgerRow, StepLedger};
pub use mismatch::{mismatch_report, MismatchReport};

/// Least-squares slope of log y against log x. None with fewer than two
/// usable points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|t: &f64| 3.0 * t.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
