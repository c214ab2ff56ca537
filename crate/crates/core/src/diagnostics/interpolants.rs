//! Piecewise constant, affine and quadratic interpolants of a trajectory.

use crate::stepper::DiscreteTrajectory;

#[derive(Debug, Clone, Copy)]
pub struct InterpolantView<'a> {
    tr: &'a DiscreteTrajectory,
}

impl<'a> InterpolantView<'a> {
    pub fn new(tr: &'a DiscreteTrajectory) -> Self {
        Self { tr }
    }

    pub fn trajectory(&self) -> &'a DiscreteTrajectory {
        self.tr
    }

    /// Cell index k with t ∈ (t^{k−1}, t^k] and the offset s = t − t^{k−1};
    /// k = 0 at t ≤ 0.
    pub fn cell(&self, t: f64) -> (usize, f64) {
        let tau = self.tr.tau();
        if t <= 0.0 {
            return (0, 0.0);
        }
        let last = self.tr.last();
        let mut k = (t / tau).ceil() as usize;
        // node times are k·τ; guard the ceil against rounding
        if k > 0 && self.tr.t(k - 1) >= t {
            k -= 1;
        }
        if k < last && self.tr.t(k) < t {
            k += 1;
        }
        let k = k.clamp(1, last.max(1));
        (k, t - self.tr.t(k - 1))
    }

    /// π_τ(t) = t^k for t ∈ (t^{k−1}, t^k].
    pub fn node_map(&self, t: f64) -> f64 {
        self.tr.t(self.cell(t).0)
    }

    /// Right-continuous piecewise constant ū (value u^k on the cell).
    pub fn u_bar(&self, t: f64) -> Vec<f64> {
        self.tr.u(self.cell(t).0).to_vec()
    }

    /// Left piecewise constant u̲ (value u^{k−1} on the cell).
    pub fn u_under(&self, t: f64) -> Vec<f64> {
        let (k, _) = self.cell(t);
        self.tr.u(k.saturating_sub(1)).to_vec()
    }

    pub fn u_hat(&self, t: f64) -> Vec<f64> {
        let (k, s) = self.cell(t);
        if k == 0 {
            return self.tr.u(0).to_vec();
        }
        let (a, v) = (self.tr.u(k - 1), self.tr.v(k));
        a.iter().zip(v).map(|(x, y)| x + s * y).collect()
    }

    pub fn u_hat_dot(&self, t: f64) -> Vec<f64> {
        let (k, _) = self.cell(t);
        self.tr.v(k.max(1)).to_vec()
    }

    /// ũ(t) = u^{k−1} − (τ/2)v^{k−1} + s v^{k−1} + (s²/2τ)(v^k − v^{k−1}).
    pub fn u_tilde(&self, t: f64) -> Vec<f64> {
        let tau = self.tr.tau();
        let (k, s) = self.cell(t);
        if k == 0 {
            return self.tr.u(0).iter().zip(self.tr.v(0)).map(|(u, v)| u - 0.5 * tau * v).collect();
        }
        let (a, v0, v1) = (self.tr.u(k - 1), self.tr.v(k - 1), self.tr.v(k));
        (0..a.len())
            .map(|i| a[i] + (s - 0.5 * tau) * v0[i] + s * s / (2.0 * tau) * (v1[i] - v0[i]))
            .collect()
    }

    pub fn u_tilde_dot(&self, t: f64) -> Vec<f64> {
        let tau = self.tr.tau();
        let (k, s) = self.cell(t);
        if k == 0 {
            return self.tr.v(0).to_vec();
        }
        let (v0, v1) = (self.tr.v(k - 1), self.tr.v(k));
        (0..v0.len()).map(|i| v0[i] + s / tau * (v1[i] - v0[i])).collect()
    }

    /// Uniform grid of `points` samples on [0, T].
    pub fn grid(&self, points: usize) -> Vec<f64> {
        let horizon = self.tr.t(self.tr.last());
        (0..points).map(|i| horizon * i as f64 / (points - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{Load, QuadraticEnergy, Schedule};
    use crate::spaces::{Boundary, DiscreteSpace, MetricOperator, NormFamily};
    use crate::stepper::{run_trajectory, Problem, SchemeConfig};
    use crate::DissipationPotential;
    use std::sync::Arc;

    fn play_run(tau: f64) -> DiscreteTrajectory {
        let model = Arc::new(QuadraticEnergy::new(MetricOperator::identity(1), Load::uniform(1, Schedule::linear(2.0)), 1.0).unwrap());
        let space = DiscreteSpace::new(1, 1.0, Boundary::None).unwrap();
        let norms = NormFamily::new(space, MetricOperator::identity(1), MetricOperator::identity(1)).unwrap();
        let p = Problem::new(model, DissipationPotential::uniform(1, 1.0, 1.0).unwrap(), norms).unwrap();
        let cfg = SchemeConfig::new(tau, 0.05, 1.0, vec![0.0], vec![0.3]).unwrap();
        run_trajectory(&p, &cfg, |_, _, _| {}).unwrap()
    }

    #[test]
    fn node_identities() {
        let tr = play_run(0.01);
        let iv = InterpolantView::new(&tr);
        for k in 1..tr.len() {
            let t = tr.t(k);
            assert_eq!(iv.u_bar(t), tr.u(k));
            assert_eq!(iv.cell(t).0, k);
            assert_eq!(iv.node_map(t), t);
            assert_eq!(iv.u_hat_dot(t - 0.003), tr.v(k));
        }
        let u0 = tr.u(0)[0];
        assert_eq!(iv.u_tilde(0.0), vec![u0 - 0.5 * 0.01 * 0.3]);
        for k in [1usize, 17, 100] {
            let t = tr.t(k);
            let hat = iv.u_hat(t)[0];
            assert!((hat - tr.u(k)[0]).abs() <= 1e-15 * (1.0 + hat.abs()));
            assert!((iv.u_under(t)[0] - tr.u(k - 1)[0]).abs() == 0.0);
            let tilde = iv.u_tilde(t)[0];
            let expect = tr.u(k)[0] - 0.005 * tr.v(k)[0];
            assert!((tilde - expect).abs() < 1e-14);
            // derivative affine between v^{k−1} and v^k
            let mid = t - 0.005;
            let d = iv.u_tilde_dot(mid)[0];
            assert!((d - 0.5 * (tr.v(k - 1)[0] + tr.v(k)[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn u_tilde_is_continuous_across_nodes() {
        let tr = play_run(0.01);
        let iv = InterpolantView::new(&tr);
        for k in 1..tr.last() {
            let t = tr.t(k);
            let left = iv.u_tilde(t)[0];
            let right = iv.u_tilde(t + 1e-12)[0];
            assert!((left - right).abs() < 1e-9);
        }
    }
}
