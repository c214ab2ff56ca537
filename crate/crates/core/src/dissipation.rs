//! Weighted-ℓ1 dissipation R(z) = Σ w_i |z_i| and its convex-analytic companions.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::spaces::MetricOperator;
use crate::vecops::{dot, norm_inf};

const PROJ_MAX_ITER: usize = 10_000;
const PROJ_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DissipationPotential {
    w: Vec<f64>,
    h: f64,
    rho1: f64,
    rho2: f64,
}

impl DissipationPotential {
    pub fn new(w: Vec<f64>, h: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("dissipation needs at least one weight".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("mesh width must be positive, got {h}")));
        }
        if let Some(bad) = w.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight {bad} is not a nonnegative number")));
        }
        let rho1 = w.iter().cloned().fold(f64::MAX, f64::min) / h;
        let rho2 = w.iter().cloned().fold(0.0, f64::max) / h;
        Ok(Self { w, h, rho1, rho2 })
    }

    /// Constant friction coefficient rho on a mesh of width h.
    pub fn uniform(n: usize, h: f64, rho: f64) -> Result<Self> {
        Self::new(vec![h * rho; n], h)
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn w_max(&self) -> f64 {
        self.rho2 * self.h
    }

    pub fn eval_r(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.w.len(), z.len())?;
        Ok(self.r_unchecked(z))
    }

    #[inline]
    pub(crate) fn r_unchecked(&self, z: &[f64]) -> f64 {
        self.w.iter().zip(z).map(|(w, x)| w * x.abs()).sum()
    }

    /// R of a difference a - b without allocating.
    #[inline]
    pub(crate) fn r_diff(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * (x - y).abs())
            .sum()
    }

    pub fn eval_r_eps(&self, visc: &MetricOperator, eps: f64, v: &[f64]) -> Result<f64> {
        check_eps(eps)?;
        Ok(0.5 * eps * visc.quad(v)? + self.eval_r(v)?)
    }

    /// Projects ζ onto the box ∂R(0) in the V⁻¹-metric. Returns (η, dist).
    pub fn project_box_vinv(&self, visc: &MetricOperator, zeta: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.w.len(), zeta.len())?;
        check_dim(self.w.len(), visc.dim())?;
        check_finite("zeta", zeta)?;
        let eta = self.clamp(zeta);
        if let Some(d) = visc.as_diagonal() {
            let dist2: f64 = zeta
                .iter()
                .zip(&eta)
                .zip(d)
                .map(|((z, e), di)| (z - e) * (z - e) / di)
                .sum();
            return Ok((eta, dist2.sqrt()));
        }
        let eta = self.project_spg(visc, zeta, eta)?;
        let r: Vec<f64> = zeta.iter().zip(&eta).map(|(z, e)| z - e).collect();
        let dist = visc.inv_norm(&r)?;
        Ok((eta, dist))
    }

    fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.w).map(|(x, w)| x.clamp(-w, *w)).collect()
    }

    // Spectral projected gradient with nonmonotone Armijo search.
    fn project_spg(&self, visc: &MetricOperator, zeta: &[f64], mut eta: Vec<f64>) -> Result<Vec<f64>> {
        let n = eta.len();
        let vdiag = visc.diag_entries();
        let scale = norm_inf(zeta).max(self.w_max()).max(f64::MIN_POSITIVE);
        let objective = |eta: &[f64]| -> Result<(f64, Vec<f64>)> {
            let r: Vec<f64> = eta.iter().zip(zeta).map(|(e, z)| e - z).collect();
            let g = visc.solve(&r)?;
            Ok((0.5 * dot(&g, &r), g))
        };
        let kkt = |eta: &[f64], g: &[f64]| -> f64 {
            (0..n)
                .map(|i| {
                    let trial = (eta[i] - vdiag[i] * g[i]).clamp(-self.w[i], self.w[i]);
                    (eta[i] - trial).abs()
                })
                .fold(0.0, f64::max)
        };
        let (mut f, mut g) = objective(&eta)?;
        let mut history = [f; 10];
        let mut alpha = vdiag.iter().cloned().fold(f64::MAX, f64::min);
        let mut res = kkt(&eta, &g);
        for it in 0..PROJ_MAX_ITER {
            if res <= PROJ_TOL * scale {
                return Ok(eta);
            }
            let trial: Vec<f64> = (0..n).map(|i| eta[i] - alpha * g[i]).collect();
            let trial = self.clamp(&trial);
            let d: Vec<f64> = trial.iter().zip(&eta).map(|(a, b)| a - b).collect();
            let gd = dot(&g, &d);
            let fmax = history.iter().cloned().fold(f64::MIN, f64::max);
            let mut lam = 1.0;
            let (mut f_new, mut g_new, mut eta_new);
            loop {
                eta_new = eta.iter().zip(&d).map(|(e, di)| e + lam * di).collect::<Vec<_>>();
                (f_new, g_new) = objective(&eta_new)?;
                if f_new <= fmax + 1e-4 * lam * gd || lam < 1e-12 {
                    break;
                }
                lam *= 0.5;
            }
            let s: Vec<f64> = eta_new.iter().zip(&eta).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            alpha = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-30, 1e30) } else { 1e30 };
            eta = eta_new;
            g = g_new;
            f = f_new;
            history[it % 10] = f;
            res = kkt(&eta, &g);
        }
        if res <= PROJ_TOL * scale {
            return Ok(eta);
        }
        Err(Error::ProjectionNotConverged {
            iters: PROJ_MAX_ITER,
            residual: res,
        })
    }

    /// R*_ε(ζ) = dist²_{V⁻¹}(ζ, ∂R(0)) / (2ε).
    pub fn eval_r_eps_star(&self, visc: &MetricOperator, eps: f64, zeta: &[f64]) -> Result<f64> {
        check_eps(eps)?;
        let (_, dist) = self.project_box_vinv(visc, zeta)?;
        Ok(dist * dist / (2.0 * eps))
    }

    /// p_V(v, ζ) = R(v) + |v|_V · dist_{V⁻¹}(ζ, ∂R(0)).
    pub fn eval_contact_potential(&self, visc: &MetricOperator, v: &[f64], zeta: &[f64]) -> Result<f64> {
        check_dim(self.w.len(), v.len())?;
        let vn = visc.mnorm(v)?;
        let r = self.r_unchecked(v);
        if vn == 0.0 {
            return Ok(r);
        }
        let (_, dist) = self.project_box_vinv(visc, zeta)?;
        Ok(r + vn * dist)
    }

    /// argmin_u ½⟨A(u−center), u−center⟩ + R(u−anchor) for diagonal A.
    pub fn prox_r(&self, quad_op: &MetricOperator, center: &[f64], anchor: &[f64]) -> Result<Vec<f64>> {
        let a = quad_op
            .as_diagonal()
            .ok_or_else(|| Error::InvalidParameter("prox_R needs a diagonal quadratic operator".into()))?;
        check_dim(self.w.len(), center.len())?;
        check_dim(self.w.len(), anchor.len())?;
        Ok((0..self.w.len())
            .map(|i| anchor[i] + soft_threshold(center[i] - anchor[i], self.w[i] / a[i]))
            .collect())
    }

    /// Prox against the scalar majorizer L·I, written into `out`.
    #[inline]
    pub(crate) fn prox_scaled_into(&self, center: &[f64], anchor: &[f64], inv_l: f64, out: &mut [f64]) {
        for i in 0..self.w.len() {
            out[i] = anchor[i] + soft_threshold(center[i] - anchor[i], self.w[i] * inv_l);
        }
    }

    /// True iff η ∈ ∂R(v) up to tol.
    pub fn subdiff_membership(&self, eta: &[f64], v: &[f64], tol: f64) -> bool {
        if eta.len() != self.w.len() || v.len() != self.w.len() {
            return false;
        }
        if eta.iter().zip(&self.w).any(|(e, w)| !(e.abs() <= w + tol)) {
            return false;
        }
        let r = self.r_unchecked(v);
        dot(eta, v) >= r - tol * (1.0 + r)
    }

    /// Σ_k R(f_k − f_{k−1}) over the given samples.
    pub fn r_variation(&self, samples: &[Vec<f64>]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("r_variation needs at least one sample".into()));
        }
        for s in samples {
            check_dim(self.w.len(), s.len())?;
        }
        Ok(samples.windows(2).map(|p| self.r_diff(&p[1], &p[0])).sum())
    }
}

/// Soft threshold; |x| ≤ t gives exactly zero.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn unit(n: usize) -> DissipationPotential {
        DissipationPotential::new(vec![1.0; n], 1.0).unwrap()
    }

    #[test]
    fn eval_r_examples() {
        let p = unit(3);
        assert_eq!(p.eval_r(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(p.eval_r(&[1.0, -2.0, 0.0]).unwrap(), 3.0);
        assert!(p.eval_r(&[1.0]).is_err());
    }

    #[test]
    fn r_eps_examples() {
        let p = unit(1);
        let v1 = MetricOperator::identity(1);
        assert_eq!(p.eval_r_eps(&v1, 0.5, &[0.0]).unwrap(), 0.0);
        assert_relative_eq!(p.eval_r_eps(&v1, 0.5, &[2.0]).unwrap(), 3.0);
        assert!(p.eval_r_eps(&v1, 0.0, &[2.0]).is_err());
    }

    #[test]
    fn projection_examples() {
        let p = unit(1);
        let v1 = MetricOperator::identity(1);
        let (eta, d) = p.project_box_vinv(&v1, &[0.5]).unwrap();
        assert_eq!((eta, d), (vec![0.5], 0.0));
        let (eta, d) = p.project_box_vinv(&v1, &[3.0]).unwrap();
        assert_eq!(eta, vec![1.0]);
        assert_relative_eq!(d, 2.0);

        let p2 = unit(2);
        let v = MetricOperator::diagonal(vec![4.0, 1.0]).unwrap();
        let (eta, d) = p2.project_box_vinv(&v, &[3.0, 0.0]).unwrap();
        assert_eq!(eta, vec![1.0, 0.0]);
        assert_relative_eq!(d, 1.0);
        // grid over the box
        let mut best = f64::MAX;
        for i in 0..=200 {
            for j in 0..=200 {
                let e = [-1.0 + i as f64 / 100.0, -1.0 + j as f64 / 100.0];
                let r = [3.0 - e[0], 0.0 - e[1]];
                best = best.min((r[0] * r[0] / 4.0 + r[1] * r[1]).sqrt());
            }
        }
        assert_relative_eq!(best, d, epsilon = 1e-12);
    }

    #[test]
    fn nondiagonal_projection_matches_grid() {
        let p = unit(2);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 1.0]);
        let v = MetricOperator::dense(m.clone()).unwrap();
        let vinv = m.try_inverse().unwrap();
        let zeta = [2.5, -1.7];
        let (eta, d) = p.project_box_vinv(&v, &zeta).unwrap();
        let mut best = f64::MAX;
        let k = 1000;
        for i in 0..=k {
            for j in 0..=k {
                let e = [-1.0 + 2.0 * i as f64 / k as f64, -1.0 + 2.0 * j as f64 / k as f64];
                let r = nalgebra::Vector2::new(zeta[0] - e[0], zeta[1] - e[1]);
                best = best.min((r.transpose() * vinv.fixed_view::<2, 2>(0, 0) * r)[(0, 0)].sqrt());
            }
        }
        assert!(eta.iter().all(|e| e.abs() <= 1.0));
        assert!(d <= best + 1e-12);
        assert!(best - d < 5e-3);
    }

    #[test]
    fn r_eps_star_examples() {
        let p = unit(1);
        let v1 = MetricOperator::identity(1);
        assert_eq!(p.eval_r_eps_star(&v1, 0.5, &[0.3]).unwrap(), 0.0);
        assert_relative_eq!(p.eval_r_eps_star(&v1, 0.5, &[3.0]).unwrap(), 4.0);
    }

    #[test]
    fn contact_potential_examples() {
        let p = unit(1);
        let v1 = MetricOperator::identity(1);
        assert_eq!(p.eval_contact_potential(&v1, &[0.0], &[3.0]).unwrap(), 0.0);
        assert_relative_eq!(p.eval_contact_potential(&v1, &[2.0], &[0.5]).unwrap(), 2.0);
        let val = p.eval_contact_potential(&v1, &[2.0], &[3.0]).unwrap();
        assert_relative_eq!(val, 6.0);
        let inf = (-200..=200)
            .map(|j| 2f64.powf(j as f64 / 10.0))
            .map(|e| p.eval_r_eps(&v1, e, &[2.0]).unwrap() + p.eval_r_eps_star(&v1, e, &[3.0]).unwrap())
            .fold(f64::MAX, f64::min);
        assert_relative_eq!(inf, val, max_relative = 1e-3);
    }

    #[test]
    fn prox_examples() {
        let p = unit(1);
        let a = MetricOperator::identity(1);
        assert_eq!(p.prox_r(&a, &[0.7], &[0.7]).unwrap(), vec![0.7]);
        assert_eq!(p.prox_r(&a, &[2.0], &[0.0]).unwrap(), vec![1.0]);
        let grid = (0..=40_000)
            .map(|i| -2.0 + i as f64 * 1e-4)
            .map(|u| (u, 0.5 * (u - 2.0) * (u - 2.0) + u.abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((grid.0 - 1.0).abs() < 2e-4);
        let free = DissipationPotential::new(vec![0.0], 1.0).unwrap();
        assert_eq!(free.prox_r(&a, &[2.0], &[0.0]).unwrap(), vec![2.0]);
        // exact tie gives no motion
        assert_eq!(p.prox_r(&a, &[1.0], &[0.0]).unwrap(), vec![0.0]);
        let dense = MetricOperator::dense(DMatrix::identity(1, 1)).unwrap();
        assert!(p.prox_r(&dense, &[2.0], &[0.0]).is_err());
    }

    #[test]
    fn membership_examples() {
        let p = unit(1);
        assert!(p.subdiff_membership(&[0.3], &[0.0], 1e-12));
        assert!(p.subdiff_membership(&[1.0], &[2.0], 1e-12));
        assert!(!p.subdiff_membership(&[-1.0], &[2.0], 1e-12));
        assert!(!p.subdiff_membership(&[1.5], &[0.0], 1e-12));
        assert!(!p.subdiff_membership(&[1.5], &[2.0], 1e-12));
    }

    #[test]
    fn r_variation_examples() {
        let p = unit(1);
        assert_eq!(p.r_variation(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap(), 0.0);
        assert_eq!(p.r_variation(&[vec![0.0], vec![2.0], vec![1.0]]).unwrap(), 3.0);
        let mono: Vec<Vec<f64>> = (0..10).map(|i| vec![(i * i) as f64]).collect();
        assert_eq!(p.r_variation(&mono).unwrap(), 81.0);
        assert!(p.r_variation(&[]).is_err());
    }

    #[test]
    fn rho_bounds() {
        let p = DissipationPotential::new(vec![0.1, 0.3, 0.2], 0.5).unwrap();
        assert_relative_eq!(p.rho1(), 0.2);
        assert_relative_eq!(p.rho2(), 0.6);
    }

    fn banded_v() -> MetricOperator {
        MetricOperator::tridiagonal(vec![2.5; 5], vec![-1.0; 4]).unwrap()
    }

    proptest! {
        #[test]
        fn homogeneity_and_bounds(z in prop::collection::vec(-5.0f64..5.0, 5), s in 0.0f64..10.0,
                                   w in prop::collection::vec(0.01f64..2.0, 5)) {
            let h = 0.2;
            let p = DissipationPotential::new(w, h).unwrap();
            let r = p.eval_r(&z).unwrap();
            let sz: Vec<f64> = z.iter().map(|x| s * x).collect();
            prop_assert!((p.eval_r(&sz).unwrap() - s * r).abs() <= 1e-12 * (1.0 + s * r));
            let nz = h * z.iter().map(|x| x.abs()).sum::<f64>();
            prop_assert!(p.rho1() * nz <= r * (1.0 + 1e-12) + 1e-15);
            prop_assert!(r <= p.rho2() * nz * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn fenchel_young_and_equality(v in prop::collection::vec(-3.0f64..3.0, 5),
                                      zeta in prop::collection::vec(-4.0f64..4.0, 5),
                                      eps in 0.01f64..5.0, sel in prop::collection::vec(-1.0f64..1.0, 5)) {
            let p = unit(5);
            for visc in [MetricOperator::diagonal(vec![1.0, 2.0, 0.5, 1.5, 3.0]).unwrap(), banded_v()] {
                let lhs = p.eval_r_eps(&visc, eps, &v).unwrap() + p.eval_r_eps_star(&visc, eps, &zeta).unwrap();
                prop_assert!(lhs >= dot(&zeta, &v) - 1e-9 * (1.0 + lhs.abs()));
                // η a selection of ∂R(v)
                let eta: Vec<f64> = v.iter().zip(&sel).map(|(x, s)| if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { *s }).collect();
                let vv = visc.apply(&v).unwrap();
                let z2: Vec<f64> = vv.iter().zip(&eta).map(|(a, b)| eps * a + b).collect();
                let lhs = p.eval_r_eps(&visc, eps, &v).unwrap() + p.eval_r_eps_star(&visc, eps, &z2).unwrap();
                let rhs = dot(&z2, &v);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn contact_potential_properties(v in prop::collection::vec(-3.0f64..3.0, 5),
                                        zeta in prop::collection::vec(-4.0f64..4.0, 5), s in 0.0f64..4.0) {
            let p = unit(5);
            let visc = banded_v();
            let pv = p.eval_contact_potential(&visc, &v, &zeta).unwrap();
            prop_assert!(pv >= p.eval_r(&v).unwrap() - 1e-12);
            prop_assert!(pv >= dot(&zeta, &v) - 1e-9 * (1.0 + pv));
            let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
            let psv = p.eval_contact_potential(&visc, &sv, &zeta).unwrap();
            prop_assert!((psv - s * pv).abs() <= 1e-12 * (1.0 + s * pv));
            let inf = (-20..=20)
                .map(|j| 2f64.powi(j))
                .map(|e| p.eval_r_eps(&visc, e, &v).unwrap() + p.eval_r_eps_star(&visc, e, &zeta).unwrap())
                .fold(f64::MAX, f64::min);
            prop_assert!(inf >= pv - 1e-9 * (1.0 + pv));
        }

        #[test]
        fn prox_satisfies_inclusion(center in prop::collection::vec(-3.0f64..3.0, 4),
                                    anchor in prop::collection::vec(-3.0f64..3.0, 4),
                                    a in prop::collection::vec(0.1f64..4.0, 4)) {
            let p = DissipationPotential::new(vec![0.3, 1.0, 0.0, 2.0], 1.0).unwrap();
            let op = MetricOperator::diagonal(a.clone()).unwrap();
            let u = p.prox_r(&op, &center, &anchor).unwrap();
            let eta: Vec<f64> = (0..4).map(|i| -a[i] * (u[i] - center[i])).collect();
            let d: Vec<f64> = (0..4).map(|i| u[i] - anchor[i]).collect();
            prop_assert!(p.subdiff_membership(&eta, &d, 1e-9));
        }
    }
}
