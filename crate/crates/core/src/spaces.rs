//! Discrete space chain and SPD metric operators.
//!
//! Vectors are plain coefficient arrays. The duality pairing is the Euclidean
//! dot product; mesh weights live in the norms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Zero ghost values on both ends: n values give n+1 differences.
    DirichletZero,
    /// Free chain: n values give n-1 differences (none when n = 1).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSpace {
    pub n: usize,
    pub h: f64,
    pub bc: Boundary,
}

impl DiscreteSpace {
    pub fn new(n: usize, h: f64, bc: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("mesh width must be positive, got {h}")));
        }
        Ok(Self { n, h, bc })
    }

    pub fn num_edges(&self) -> usize {
        match self.bc {
            Boundary::DirichletZero => self.n + 1,
            Boundary::None => self.n - 1,
        }
    }

    /// Forward differences divided by h.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let h = self.h;
        Ok(match self.bc {
            Boundary::DirichletZero => (0..=self.n)
                .map(|e| {
                    let right = if e < self.n { x[e] } else { 0.0 };
                    let left = if e > 0 { x[e - 1] } else { 0.0 };
                    (right - left) / h
                })
                .collect(),
            Boundary::None => x.windows(2).map(|w| (w[1] - w[0]) / h).collect(),
        })
    }

    /// The matrix K with ⟨Kx,x⟩ = h·Σ_e (Dx)_e², i.e. (1/h)·tridiag(−1,2,−1)
    /// with the end rows adjusted for the free chain. The free chain gives a
    /// semidefinite K, which is returned unfactored (solve then errors).
    pub fn stiffness(&self) -> Result<MetricOperator> {
        let n = self.n;
        let s = 1.0 / self.h;
        let mut diag = vec![2.0 * s; n];
        if self.bc == Boundary::None {
            diag[0] = s;
            diag[n - 1] = s;
            if n == 1 {
                diag[0] = 0.0;
            }
        }
        let off = vec![-s; n.saturating_sub(1)];
        let k = MetricOperator::tridiagonal_unchecked(diag, off)?;
        match self.bc {
            Boundary::DirichletZero => k.factor(),
            Boundary::None => Ok(k),
        }
    }

    /// Gram matrix of the U-norm: hI + K.
    pub fn u_gram(&self) -> Result<MetricOperator> {
        let k = self.stiffness()?;
        let mut bands = k.lower_bands();
        for d in bands[0].iter_mut() {
            *d += self.h;
        }
        MetricOperator::banded(bands)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Diagonal,
    BandedSpd,
    DenseSpd,
}

#[derive(Debug, Clone)]
enum Repr {
    Diagonal(Vec<f64>),
    // Row-major lower band storage: a[i*(bw+1) + d] = A[i][i-d].
    Banded { bw: usize, a: Vec<f64>, l: Vec<f64> },
    Dense { a: DMatrix<f64>, l: DMatrix<f64> },
}

/// Symmetric positive-definite operator. Factorizations are computed at
/// construction, so the type is immutable and freely shareable.
#[derive(Debug, Clone)]
pub struct MetricOperator {
    n: usize,
    repr: Repr,
}

impl MetricOperator {
    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0).expect("unit diagonal is SPD")
    }

    pub fn scaled_identity(n: usize, s: f64) -> Result<Self> {
        Self::diagonal(vec![s; n])
    }

    pub fn diagonal(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidParameter("empty operator".into()));
        }
        if let Some(bad) = d.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::NotSpd(format!("diagonal entry {bad}")));
        }
        Ok(Self {
            n: d.len(),
            repr: Repr::Diagonal(d),
        })
    }

    pub fn tridiagonal(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let op = Self::tridiagonal_unchecked(diag, off)?;
        op.factor()
    }

    // Builds the band storage without factorizing (used for semidefinite K).
    fn tridiagonal_unchecked(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty operator".into()));
        }
        check_dim(n - 1, off.len())?;
        let mut a = vec![0.0; 2 * n];
        for i in 0..n {
            a[2 * i] = diag[i];
            if i > 0 {
                a[2 * i + 1] = off[i - 1];
            }
        }
        Ok(Self {
            n,
            repr: Repr::Banded {
                bw: 1,
                a,
                l: Vec::new(),
            },
        })
    }

    /// `bands[d][i] = A[i+d][i]`; `bands[0]` is the diagonal.
    pub fn banded(bands: Vec<Vec<f64>>) -> Result<Self> {
        let n = bands.first().map(|b| b.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidParameter("empty operator".into()));
        }
        let bw = bands.len() - 1;
        for (d, b) in bands.iter().enumerate() {
            check_dim(n.saturating_sub(d), b.len())?;
        }
        let mut a = vec![0.0; n * (bw + 1)];
        for (d, b) in bands.iter().enumerate() {
            for (j, &val) in b.iter().enumerate() {
                a[(j + d) * (bw + 1) + d] = val;
            }
        }
        Self {
            n,
            repr: Repr::Banded { bw, a, l: Vec::new() },
        }
        .factor()
    }

    pub fn dense(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidParameter("dense operator must be square and nonempty".into()));
        }
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSpd(format!("asymmetric entry ({i},{j})")));
                }
            }
        }
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        Ok(Self {
            n,
            repr: Repr::Dense { l: chol.l(), a },
        })
    }

    fn factor(self) -> Result<Self> {
        let Repr::Banded { bw, a, .. } = &self.repr else {
            return Ok(self);
        };
        let (n, bw) = (self.n, *bw);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        let at = |buf: &[f64], i: usize, j: usize| buf[i * w + (i - j)];
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut s = a[j * w];
            for k in lo..j {
                let v = at(&l, j, k);
                s -= v * v;
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NotSpd(format!("banded Cholesky pivot {j} is {s}")));
            }
            let d = s.sqrt();
            l[j * w] = d;
            for i in (j + 1)..n.min(j + bw + 1) {
                let lo_i = i.saturating_sub(bw);
                let mut s = a[i * w + (i - j)];
                for k in lo_i.max(lo)..j {
                    s -= at(&l, i, k) * at(&l, j, k);
                }
                l[i * w + (i - j)] = s / d;
            }
        }
        let mut out = self;
        if let Repr::Banded { l: slot, .. } = &mut out.repr {
            *slot = l;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> OpKind {
        match self.repr {
            Repr::Diagonal(_) => OpKind::Diagonal,
            Repr::Banded { .. } => OpKind::BandedSpd,
            Repr::Dense { .. } => OpKind::DenseSpd,
        }
    }

    /// Diagonal entries, if the operator is diagonal.
    pub fn as_diagonal(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    pub fn diag_entries(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(d) => d.clone(),
            Repr::Banded { bw, a, .. } => (0..self.n).map(|i| a[i * (bw + 1)]).collect(),
            Repr::Dense { a, .. } => (0..self.n).map(|i| a[(i, i)]).collect(),
        }
    }

    fn lower_bands(&self) -> Vec<Vec<f64>> {
        match &self.repr {
            Repr::Diagonal(d) => vec![d.clone()],
            Repr::Banded { bw, a, .. } => {
                let w = bw + 1;
                (0..=*bw)
                    .map(|d| (0..self.n.saturating_sub(d)).map(|j| a[(j + d) * w + d]).collect())
                    .collect()
            }
            Repr::Dense { a, .. } => (0..self.n)
                .map(|d| (0..self.n - d).map(|j| a[(j + d, j)]).collect())
                .collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (d, band) in self.lower_bands().iter().enumerate() {
            for (j, &v) in band.iter().enumerate() {
                m[(j + d, j)] = v;
                m[(j, j + d)] = v;
            }
        }
        m
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        check_dim(self.n, out.len())?;
        match &self.repr {
            Repr::Diagonal(d) => {
                for i in 0..self.n {
                    out[i] = d[i] * x[i];
                }
            }
            Repr::Banded { bw, a, .. } => {
                let w = bw + 1;
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..self.n {
                    out[i] += a[i * w] * x[i];
                    for d in 1..=(*bw).min(i) {
                        let v = a[i * w + d];
                        out[i] += v * x[i - d];
                        out[i - d] += v * x[i];
                    }
                }
            }
            Repr::Dense { a, .. } => {
                for i in 0..self.n {
                    out[i] = (0..self.n).map(|j| a[(i, j)] * x[j]).sum();
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// ⟨Ax, x⟩ without the SPD check.
    pub fn quad(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.apply(x)?, x))
    }

    pub fn mnorm(&self, x: &[f64]) -> Result<f64> {
        let q = self.quad(x)?;
        let scale = self.max_abs_row_sum() * dot(x, x);
        if q < -1e-14 * scale {
            return Err(Error::NotSpd(format!("negative quadratic form {q:e}")));
        }
        Ok(q.max(0.0).sqrt())
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, y.len())?;
        match &self.repr {
            Repr::Diagonal(d) => Ok(y.iter().zip(d).map(|(a, b)| a / b).collect()),
            Repr::Banded { l, .. } if l.is_empty() => Err(Error::NotSpd("operator is only semidefinite".into())),
            Repr::Banded { bw, l, .. } => {
                let (n, bw, w) = (self.n, *bw, bw + 1);
                let mut z = y.to_vec();
                for i in 0..n {
                    let mut s = z[i];
                    for k in i.saturating_sub(bw)..i {
                        s -= l[i * w + (i - k)] * z[k];
                    }
                    z[i] = s / l[i * w];
                }
                for i in (0..n).rev() {
                    let mut s = z[i];
                    for k in (i + 1)..n.min(i + bw + 1) {
                        s -= l[k * w + (k - i)] * z[k];
                    }
                    z[i] = s / l[i * w];
                }
                Ok(z)
            }
            Repr::Dense { l, .. } => {
                let n = self.n;
                let mut z = y.to_vec();
                for i in 0..n {
                    let s: f64 = (0..i).map(|k| l[(i, k)] * z[k]).sum();
                    z[i] = (z[i] - s) / l[(i, i)];
                }
                for i in (0..n).rev() {
                    let s: f64 = ((i + 1)..n).map(|k| l[(k, i)] * z[k]).sum();
                    z[i] = (z[i] - s) / l[(i, i)];
                }
                Ok(z)
            }
        }
    }

    /// Dual norm sqrt(⟨A⁻¹ζ, ζ⟩).
    pub fn inv_norm(&self, zeta: &[f64]) -> Result<f64> {
        Ok(dot(&self.solve(zeta)?, zeta).max(0.0).sqrt())
    }

    /// Gershgorin bound on the largest eigenvalue.
    pub fn max_abs_row_sum(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().fold(0.0, |m, x| m.max(x.abs())),
            _ => {
                let m = self.to_dense();
                (0..self.n)
                    .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn lambda_max(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().cloned().fold(f64::MIN, f64::max),
            _ => power_iteration(self.n, |x| self.apply(x).expect("dimension checked")),
        }
    }

    /// Smallest eigenvalue by inverse power iteration.
    pub fn lambda_min(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().cloned().fold(f64::MAX, f64::min),
            _ => 1.0 / power_iteration(self.n, |x| self.solve(x).expect("dimension checked")),
        }
    }
}

fn power_iteration(n: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    // Deterministic start with components on every mode of a chain.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut est = 0.0;
    for _ in 0..5000 {
        let y = op(&x);
        let new_est = dot(&y, &x);
        let ny = norm2(&y);
        if ny == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / ny).collect();
        if (new_est - est).abs() <= 1e-15 * new_est.abs() {
            return new_est;
        }
        est = new_est;
    }
    est
}

/// The norms of the space chain U ↪ V ↪ W ↪ Z together with the mass and
/// viscosity operators.
#[derive(Debug, Clone)]
pub struct NormFamily {
    pub space: DiscreteSpace,
    pub mass: MetricOperator,
    pub visc: MetricOperator,
    u_gram: MetricOperator,
}

impl NormFamily {
    pub fn new(space: DiscreteSpace, mass: MetricOperator, visc: MetricOperator) -> Result<Self> {
        check_dim(space.n, mass.dim())?;
        check_dim(space.n, visc.dim())?;
        let u_gram = space.u_gram()?;
        Ok(Self {
            space,
            mass,
            visc,
            u_gram,
        })
    }

    pub fn n(&self) -> usize {
        self.space.n
    }

    pub fn h(&self) -> f64 {
        self.space.h
    }

    pub fn norm_z(&self, x: &[f64]) -> f64 {
        self.space.h * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn norm_w(&self, x: &[f64]) -> f64 {
        (self.space.h * dot(x, x)).sqrt()
    }

    pub fn norm_u(&self, x: &[f64]) -> Result<f64> {
        self.u_gram.mnorm(x)
    }

    pub fn norm_zstar(&self, zeta: &[f64]) -> f64 {
        zeta.iter().fold(0.0, |m: f64, v| m.max(v.abs())) / self.space.h
    }

    pub fn norm_wstar(&self, zeta: &[f64]) -> f64 {
        (dot(zeta, zeta) / self.space.h).sqrt()
    }

    pub fn norm_ustar(&self, zeta: &[f64]) -> Result<f64> {
        self.u_gram.inv_norm(zeta)
    }

    pub fn norm_m(&self, x: &[f64]) -> Result<f64> {
        self.mass.mnorm(x)
    }

    pub fn norm_v(&self, x: &[f64]) -> Result<f64> {
        self.visc.mnorm(x)
    }

    /// Largest c with c·|x|_W ≤ |x|_V.
    pub fn c1(&self) -> f64 {
        (self.visc.lambda_min() / self.space.h).sqrt()
    }

    /// Smallest eigenvalues of M and V relative to the W-metric.
    pub fn relative_lambda_min(&self) -> (f64, f64) {
        let h = self.space.h;
        (self.mass.lambda_min() / h, self.visc.lambda_min() / h)
    }

    pub fn u_gram(&self) -> &MetricOperator {
        &self.u_gram
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lap3() -> MetricOperator {
        MetricOperator::tridiagonal(vec![2.0; 3], vec![-1.0; 2]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let id = MetricOperator::identity(2);
        assert_eq!(id.apply(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(lap3().apply(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(lap3().apply(&[1.0, 0.0, 0.0]).unwrap(), vec![2.0, -1.0, 0.0]);
        assert!(matches!(id.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn stiffness_matches_unit_laplacian() {
        let s = DiscreteSpace::new(3, 1.0, Boundary::DirichletZero).unwrap();
        let k = s.stiffness().unwrap();
        assert_eq!(k.apply(&[1.0, 0.0, 0.0]).unwrap(), vec![2.0, -1.0, 0.0]);
    }

    #[test]
    fn mnorm_examples() {
        let two = MetricOperator::scaled_identity(2, 2.0).unwrap();
        assert_relative_eq!(two.mnorm(&[3.0, 4.0]).unwrap(), 50f64.sqrt(), epsilon = 1e-14);
        assert_eq!(lap3().mnorm(&[0.0; 3]).unwrap(), 0.0);
        let id = MetricOperator::identity(2);
        assert_eq!(id.mnorm(&[1.0, 0.0]).unwrap(), id.mnorm(&[0.0, 1.0]).unwrap());
    }

    #[test]
    fn solve_examples() {
        let id = MetricOperator::identity(2);
        assert_eq!(id.solve(&[5.0, -1.0]).unwrap(), vec![5.0, -1.0]);
        let two = MetricOperator::scaled_identity(1, 2.0).unwrap();
        assert_eq!(two.solve(&[4.0]).unwrap(), vec![2.0]);
        let x = lap3().solve(&[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in x.iter().zip([0.75, 0.5, 0.25]) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_spd_is_rejected() {
        assert!(matches!(
            MetricOperator::tridiagonal(vec![1.0, 1.0], vec![-2.0]),
            Err(Error::NotSpd(_))
        ));
        assert!(MetricOperator::diagonal(vec![1.0, 0.0]).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MetricOperator::dense(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(MetricOperator::dense(m).is_err());
    }

    #[test]
    fn laplacian_eigenvalues() {
        let n = 64;
        let h = 10.0 / 65.0;
        let s = DiscreteSpace::new(n, h, Boundary::DirichletZero).unwrap();
        let k = s.stiffness().unwrap();
        let exact = (4.0 / h) * (std::f64::consts::PI / (2.0 * 65.0)).sin().powi(2);
        assert_relative_eq!(k.lambda_min(), exact, max_relative = 1e-10);
        let exact_max = (4.0 / h) * (64.0 * std::f64::consts::PI / (2.0 * 65.0)).sin().powi(2);
        assert_relative_eq!(k.lambda_max(), exact_max, max_relative = 1e-6);
    }

    #[test]
    fn grad_and_u_norm() {
        let s = DiscreteSpace::new(2, 0.5, Boundary::DirichletZero).unwrap();
        assert_eq!(s.grad(&[1.0, 3.0]).unwrap(), vec![2.0, 4.0, -6.0]);
        let nf = NormFamily::new(s, MetricOperator::identity(2), MetricOperator::identity(2)).unwrap();
        let x = [1.0, 3.0];
        let g = s.grad(&x).unwrap();
        let expect = nf.norm_w(&x).powi(2) + 0.5 * dot(&g, &g);
        assert_relative_eq!(nf.norm_u(&x).unwrap().powi(2), expect, max_relative = 1e-13);
        let free = DiscreteSpace::new(1, 1.0, Boundary::None).unwrap();
        assert_eq!(free.num_edges(), 0);
        assert!(free.grad(&[2.0]).unwrap().is_empty());
    }

    #[test]
    fn zstar_is_dual_to_z() {
        let s = DiscreteSpace::new(4, 0.25, Boundary::DirichletZero).unwrap();
        let nf = NormFamily::new(s, MetricOperator::identity(4), MetricOperator::identity(4)).unwrap();
        let zeta = [0.3, -1.7, 0.2, 0.9];
        let best = (0..4)
            .flat_map(|i| [1.0, -1.0].map(move |sg| (i, sg)))
            .map(|(i, sg)| {
                let mut x = vec![0.0; 4];
                x[i] = sg / s.h;
                assert_relative_eq!(nf.norm_z(&x), 1.0);
                dot(&zeta, &x)
            })
            .fold(f64::MIN, f64::max);
        assert_relative_eq!(best, nf.norm_zstar(&zeta), max_relative = 1e-14);
    }

    fn random_spd(seed: u64, n: usize) -> Vec<MetricOperator> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let dense = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
        let dense = (&dense + dense.transpose()) * 0.5;
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
        let b0: Vec<f64> = (0..n).map(|_| rng.gen_range(3.0..5.0)).collect();
        let b1: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b2: Vec<f64> = (0..n - 2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        vec![
            MetricOperator::dense(dense).unwrap(),
            MetricOperator::diagonal(diag).unwrap(),
            MetricOperator::banded(vec![b0, b1, b2]).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn symmetric_spd_and_inverse(seed in 0u64..1000, xs in prop::collection::vec(-3.0f64..3.0, 12)) {
            let n = 6;
            let (x, y) = xs.split_at(n);
            for op in random_spd(seed, n) {
                let scale = op.max_abs_row_sum() * (1.0 + norm2(x) * norm2(y));
                let axy = dot(&op.apply(x).unwrap(), y);
                let xay = dot(x, &op.apply(y).unwrap());
                prop_assert!((axy - xay).abs() <= 1e-12 * scale);
                prop_assert!(axy <= op.mnorm(x).unwrap() * op.mnorm(y).unwrap() * (1.0 + 1e-12) + 1e-15);
                if norm2(x) > 1e-8 {
                    prop_assert!(op.quad(x).unwrap() > 0.0);
                }
                let back = op.solve(&op.apply(x).unwrap()).unwrap();
                let err = norm2(&crate::vecops::sub(&back, x));
                prop_assert!(err <= 1e-10 * norm2(x).max(1e-300));
                let dense_rt = op.to_dense() * nalgebra::DVector::from_column_slice(x);
                let applied = op.apply(x).unwrap();
                for i in 0..n {
                    prop_assert!((dense_rt[i] - applied[i]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
