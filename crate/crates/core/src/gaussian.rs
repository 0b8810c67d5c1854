//! Multivariate Gaussian model of unattacked sensor readings and the
//! negative log-density value function built on it.
//!
//! The value of a coalition `S` is `-ln f_S(x_S)`, where `f_S` is the
//! Gaussian marginal over the sensors in `S`. The empty coalition has value
//! zero. Larger values mean the readings are less likely under the
//! unattacked model.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::shapley::ValueFunction;
use crate::MAX_SENSORS;

const SYMMETRY_RTOL: f64 = 1e-12;

/// Marginal factorizations are memoized for every coalition when the model
/// has at most this many sensors.
const CACHE_MAX_SENSORS: usize = 16;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Sensor readings at one time instant. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl std::ops::Index<usize> for Observation {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Cholesky factor of a coalition's covariance sub-matrix.
#[derive(Debug, Clone)]
struct MarginalFactor {
    indices: Vec<usize>,
    /// Row-major lower triangle, `k * k` entries.
    lower: Vec<f64>,
    /// `-(k/2) ln 2π - ln det L`.
    log_norm: f64,
}

impl MarginalFactor {
    fn log_density(&self, mean: &[f64], x: &[f64]) -> f64 {
        let k = self.indices.len();
        let mut z = [0.0f64; MAX_SENSORS];
        let mut quad = 0.0;
        for r in 0..k {
            let row = &self.lower[r * k..r * k + r + 1];
            let idx = self.indices[r];
            let mut acc = x[idx] - mean[idx];
            for c in 0..r {
                acc -= row[c] * z[c];
            }
            z[r] = acc / row[r];
            quad += z[r] * z[r];
        }
        self.log_norm - 0.5 * quad
    }
}

#[derive(Debug, Clone, Copy)]
struct DiagonalTerm {
    inv_sd: f64,
    log_norm: f64,
}

/// Unattacked joint distribution of `n` sensors: `N(mean, cov)`.
///
/// Immutable after construction. Marginal factorizations are computed lazily
/// and cached per coalition, so a shared `&GaussianModel` can be used from
/// many threads.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    lower: DMatrix<f64>,
    diagonal: Option<Vec<DiagonalTerm>>,
    cache: Vec<OnceLock<MarginalFactor>>,
}

impl GaussianModel {
    /// Validates `mean` and the row-major `cov` and factors the covariance.
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if n > MAX_SENSORS {
            return Err(Error::UniverseTooLarge {
                n,
                max: MAX_SENSORS,
            });
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: if cov.nrows() != n {
                    cov.nrows()
                } else {
                    cov.ncols()
                },
            });
        }
        if let Some(i) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        for r in 0..n {
            for c in 0..r {
                let (a, b) = (cov[(r, c)], cov[(c, r)]);
                if (a - b).abs() > SYMMETRY_RTOL * a.abs().max(b.abs()) {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        let lower = factor(&cov).ok_or(Error::NotPositiveDefinite)?;

        let is_diagonal = (0..n).all(|r| (0..n).all(|c| r == c || cov[(r, c)] == 0.0));
        let diagonal = is_diagonal.then(|| {
            (0..n)
                .map(|i| {
                    let sd = cov[(i, i)].sqrt();
                    DiagonalTerm {
                        inv_sd: 1.0 / sd,
                        log_norm: -HALF_LN_2PI - sd.ln(),
                    }
                })
                .collect()
        });
        let cache_len = if diagonal.is_none() && n <= CACHE_MAX_SENSORS {
            1usize << n
        } else {
            0
        };
        let cache = (0..cache_len).map(|_| OnceLock::new()).collect();

        Ok(Self {
            mean,
            cov,
            lower,
            diagonal,
            cache,
        })
    }

    /// Convenience constructor taking the covariance as nested rows.
    pub fn from_rows(mean: Vec<f64>, cov: &[Vec<f64>]) -> Result<Self> {
        let n = mean.len();
        if cov.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: cov.len(),
            });
        }
        if let Some(row) = cov.iter().find(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |r, c| cov[r][c]);
        Self::new(mean, m)
    }

    /// Two sensors with standard deviations `sigma1`, `sigma2` and
    /// correlation `rho`.
    pub fn bivariate(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        let off = rho * sigma1 * sigma2;
        Self::new(
            vec![mu1, mu2],
            DMatrix::from_row_slice(2, 2, &[sigma1 * sigma1, off, off, sigma2 * sigma2]),
        )
    }

    /// Independent sensors with the given standard deviations.
    pub fn independent(mean: Vec<f64>, sigmas: &[f64]) -> Result<Self> {
        if sigmas.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: sigmas.len(),
            });
        }
        let diag = nalgebra::DVector::from_iterator(sigmas.len(), sigmas.iter().map(|s| s * s));
        Self::new(mean, DMatrix::from_diagonal(&diag))
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// True when every off-diagonal covariance entry is exactly zero.
    pub fn is_independent(&self) -> bool {
        self.diagonal.is_some()
    }

    /// Standard deviation of sensor `i`.
    pub fn sigma(&self, i: usize) -> f64 {
        self.cov[(i, i)].sqrt()
    }

    /// Correlation between sensors `i` and `j`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)] / (self.sigma(i) * self.sigma(j))
    }

    /// One draw from the model.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Observation {
        let mut z = [0.0f64; MAX_SENSORS];
        for v in z.iter_mut().take(self.n()) {
            *v = rng.sample(StandardNormal);
        }
        self.sample_from_normals(&z[..self.n()])
    }

    /// Maps independent standard normal draws `z` to `mean + L z`.
    pub fn sample_from_normals(&self, z: &[f64]) -> Observation {
        assert_eq!(z.len(), self.n(), "need one normal draw per sensor");
        let n = self.n();
        let values = (0..n)
            .map(|r| self.mean[r] + (0..=r).map(|c| self.lower[(r, c)] * z[c]).sum::<f64>())
            .collect();
        Observation(values)
    }

    /// `ln f_S(x_S)` for the Gaussian marginal over coalition `s`.
    pub fn marginal_log_density(&self, s: Coalition, x: &Observation) -> Result<f64> {
        self.check_dims(s, x)?;
        if s.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        Ok(self.log_density_unchecked(s, x.as_slice()))
    }

    /// Negative log marginal density; zero for the empty coalition.
    ///
    /// Panics if `x` or `s` does not match the model's sensor count.
    pub fn value(&self, s: Coalition, x: &Observation) -> f64 {
        if let Err(e) = self.check_dims(s, x) {
            panic!("{e}");
        }
        if s.is_empty() {
            return 0.0;
        }
        -self.log_density_unchecked(s, x.as_slice())
    }

    fn check_dims(&self, s: Coalition, x: &Observation) -> Result<()> {
        for actual in [x.len(), s.universe()] {
            if actual != self.n() {
                return Err(Error::DimensionMismatch {
                    expected: self.n(),
                    actual,
                });
            }
        }
        Ok(())
    }

    fn log_density_unchecked(&self, s: Coalition, x: &[f64]) -> f64 {
        if let Some(terms) = &self.diagonal {
            return s
                .iter()
                .map(|i| {
                    let t = terms[i];
                    let z = (x[i] - self.mean[i]) * t.inv_sd;
                    t.log_norm - 0.5 * z * z
                })
                .sum();
        }
        self.marginal_log_density_dense(s, x)
    }

    /// Sub-matrix factorization path, used for every correlated model.
    fn marginal_log_density_dense(&self, s: Coalition, x: &[f64]) -> f64 {
        match self.cache.get(s.bits() as usize) {
            Some(slot) => slot
                .get_or_init(|| self.marginal_factor(s))
                .log_density(&self.mean, x),
            None => self.marginal_factor(s).log_density(&self.mean, x),
        }
    }

    fn marginal_factor(&self, s: Coalition) -> MarginalFactor {
        let indices: Vec<usize> = s.iter().collect();
        let k = indices.len();
        let sub = DMatrix::from_fn(k, k, |r, c| self.cov[(indices[r], indices[c])]);
        // Principal sub-matrices of a positive definite matrix are positive definite.
        let l = factor(&sub).expect("principal sub-matrix must be positive definite");
        let mut lower = vec![0.0; k * k];
        let mut log_det_l = 0.0;
        for r in 0..k {
            for c in 0..=r {
                lower[r * k + c] = l[(r, c)];
            }
            log_det_l += l[(r, r)].ln();
        }
        MarginalFactor {
            indices,
            lower,
            log_norm: -(k as f64) * HALF_LN_2PI - log_det_l,
        }
    }
}

/// Lower Cholesky factor, or `None` when the matrix is not numerically
/// positive definite.
fn factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = m.clone().cholesky()?.unpack();
    let pivots_ok = (0..m.nrows()).all(|i| {
        let d = l[(i, i)];
        d.is_finite() && d * d > 1e-12 * m[(i, i)]
    });
    pivots_ok.then_some(l)
}

impl ValueFunction for GaussianModel {
    fn n(&self) -> usize {
        self.mean.len()
    }

    fn value(&self, s: Coalition, x: &Observation) -> f64 {
        GaussianModel::value(self, s, x)
    }
}

/// Dense-path log density for tests that need to compare it with the
/// diagonal shortcut.
#[cfg(test)]
pub(crate) fn dense_log_density(model: &GaussianModel, s: Coalition, x: &Observation) -> f64 {
    model.marginal_log_density_dense(s, x.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn obs(v: &[f64]) -> Observation {
        Observation::new(v.to_vec()).unwrap()
    }

    fn set(idx: &[usize], n: usize) -> Coalition {
        Coalition::from_indices(idx.iter().copied(), n).unwrap()
    }

    #[test]
    fn accepts_table_models() {
        let m =
            GaussianModel::from_rows(vec![0.0, 0.0], &[vec![4.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert!(m.is_independent());
        assert_eq!(m.sigma(0), 2.0);
        let m =
            GaussianModel::from_rows(vec![0.0, 0.0], &[vec![4.0, 3.2], vec![3.2, 4.0]]).unwrap();
        assert!(!m.is_independent());
        assert!((m.correlation(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_singular_and_malformed() {
        assert_eq!(
            GaussianModel::from_rows(vec![0.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 1.0]])
                .unwrap_err(),
            Error::NotPositiveDefinite
        );
        assert_eq!(
            GaussianModel::bivariate(0.0, 0.0, 1.0, 1.0, -1.0).unwrap_err(),
            Error::NotPositiveDefinite
        );
        assert_eq!(
            GaussianModel::from_rows(vec![0.0, 0.0], &[vec![1.0, 0.2], vec![0.3, 1.0]])
                .unwrap_err(),
            Error::NotSymmetric
        );
        assert!(matches!(
            GaussianModel::from_rows(vec![0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            GaussianModel::independent(vec![0.0; 33], &[1.0; 33]),
            Err(Error::UniverseTooLarge { n: 33, .. })
        ));
    }

    #[test]
    fn observation_rejects_non_finite() {
        assert_eq!(
            Observation::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        );
        assert_eq!(
            Observation::new(vec![f64::INFINITY]),
            Err(Error::NonFinite(0))
        );
    }

    #[test]
    fn zero_noise_returns_mean() {
        let m = GaussianModel::independent(vec![5.0, 7.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.sample_from_normals(&[0.0, 0.0]).as_slice(), &[5.0, 7.0]);
    }

    #[test]
    fn standard_normal_at_mode() {
        let m = GaussianModel::independent(vec![0.0], &[1.0]).unwrap();
        let s = set(&[0], 1);
        let ld = m.marginal_log_density(s, &obs(&[0.0])).unwrap();
        assert!((ld - (-0.5 * (2.0 * PI).ln())).abs() < 1e-15);
        assert!((ld + 0.91894).abs() < 1e-5);
        assert!((m.value(s, &obs(&[0.0])) - 0.91894).abs() < 1e-5);
    }

    #[test]
    fn correlated_joint_at_origin() {
        let m = GaussianModel::bivariate(0.0, 0.0, 1.0, 1.0, 0.5).unwrap();
        let ld = m
            .marginal_log_density(set(&[0, 1], 2), &obs(&[0.0, 0.0]))
            .unwrap();
        let expected = -(2.0 * PI * 0.75f64.sqrt()).ln();
        assert!((ld - expected).abs() < 1e-14, "{ld} vs {expected}");
    }

    /// Direct evaluation of the bivariate density formula.
    fn bivariate_pdf(x1: f64, x2: f64, s1: f64, s2: f64, rho: f64) -> f64 {
        let (a, b) = (x1 / s1, x2 / s2);
        let q = (a * a + b * b - 2.0 * rho * a * b) / (2.0 * (1.0 - rho * rho));
        (-q).exp() / (2.0 * PI * s1 * s2 * (1.0 - rho * rho).sqrt())
    }

    #[test]
    fn matches_closed_form_bivariate() {
        for &(s1, s2, rho) in &[(2.0, 2.0, 0.2), (1.0, 1.5, -0.8), (0.7, 3.0, 0.5)] {
            let m = GaussianModel::bivariate(0.0, 0.0, s1, s2, rho).unwrap();
            for &(x1, x2) in &[(0.0, 0.0), (1.0, -2.0), (3.5, 0.25)] {
                let ld = m
                    .marginal_log_density(set(&[0, 1], 2), &obs(&[x1, x2]))
                    .unwrap();
                let pdf = bivariate_pdf(x1, x2, s1, s2, rho);
                assert!((ld - pdf.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_coalition() {
        let m = GaussianModel::independent(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let e = Coalition::empty(2).unwrap();
        assert_eq!(m.value(e, &obs(&[3.0, 4.0])), 0.0);
        assert_eq!(
            m.marginal_log_density(e, &obs(&[3.0, 4.0])),
            Err(Error::EmptyCoalition)
        );
    }

    #[test]
    fn dimension_mismatch() {
        let m = GaussianModel::independent(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(
            m.marginal_log_density(set(&[0], 2), &obs(&[1.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        ));
        assert!(matches!(
            m.marginal_log_density(set(&[0], 3), &obs(&[1.0, 2.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 3
            })
        ));
    }

    #[test]
    fn independent_factorization() {
        let m = GaussianModel::independent(vec![1.0, -2.0], &[0.5, 3.0]).unwrap();
        let x = obs(&[0.3, 1.7]);
        let joint = m.marginal_log_density(set(&[0, 1], 2), &x).unwrap();
        let a = m.marginal_log_density(set(&[0], 2), &x).unwrap();
        let b = m.marginal_log_density(set(&[1], 2), &x).unwrap();
        assert!((joint - a - b).abs() < 1e-12);
        assert!(
            (m.value(set(&[0, 1], 2), &x) - m.value(set(&[0], 2), &x) - m.value(set(&[1], 2), &x))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn diagonal_shortcut_matches_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigmas: Vec<f64> = (0..6).map(|_| rng.random_range(0.3..3.0)).collect();
        let mean: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = GaussianModel::independent(mean, &sigmas).unwrap();
        let x = m.sample(&mut rng);
        for bits in 1u32..64 {
            let s = Coalition::from_bits(bits, 6).unwrap();
            let fast = m.marginal_log_density(s, &x).unwrap();
            let dense = dense_log_density(&m, s, &x);
            assert!((fast - dense).abs() < 1e-12 * fast.abs().max(1.0));
        }
    }

    #[test]
    fn marginal_of_dense_model_uses_sub_covariance() {
        // Sensor 1 alone of a correlated pair is N(mu_1, sigma_1^2).
        let m = GaussianModel::bivariate(1.0, -1.0, 2.0, 0.5, 0.9).unwrap();
        let x = obs(&[2.0, 5.0]);
        let ld = m.marginal_log_density(set(&[0], 2), &x).unwrap();
        let expected = -HALF_LN_2PI - 2.0f64.ln() - 0.5 * (0.5f64).powi(2);
        assert!((ld - expected).abs() < 1e-14);
    }

    #[test]
    fn uncached_path_for_large_models() {
        let n = CACHE_MAX_SENSORS + 2;
        let mut cov = DMatrix::<f64>::identity(n, n);
        for i in 0..n - 1 {
            cov[(i, i + 1)] = 0.3;
            cov[(i + 1, i)] = 0.3;
        }
        let m = GaussianModel::new(vec![0.0; n], cov).unwrap();
        let x = Observation::new(vec![0.1; n]).unwrap();
        let s = set(&[0, 1], n);
        let pair = GaussianModel::bivariate(0.0, 0.0, 1.0, 1.0, 0.3).unwrap();
        let want = pair
            .marginal_log_density(set(&[0, 1], 2), &obs(&[0.1, 0.1]))
            .unwrap();
        assert!((m.marginal_log_density(s, &x).unwrap() - want).abs() < 1e-13);
    }
}
