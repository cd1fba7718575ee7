//! The multivariate generalised Gaussian family.
//!
//! Density, for `Q = (x−μ)ᵀ Σ⁻¹ (x−μ)`:
//!
//! ```text
//! f(x) = β Γ(m/2) / (π^{m/2} Γ(m/(2β)) 2^{m/(2β)} |Σ|^{1/2}) · exp(−½ Q^β)
//! ```
//!
//! `β = 1` is the Gaussian, `β = 0.5` the Laplace-type member, `β < 1`
//! heavier tails and `β > 1` lighter ones. Some references write the
//! exponent as `s` with `β = s / 2`; [`ShapeParam::from_s`] converts.
//!
//! Sampling uses the elliptical representation `X = μ + Σ^{1/2} R U` with
//! `U` uniform on the sphere and `½ R^{2β} ~ Gamma(m/(2β), 1)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GofError, Result};
use crate::gamma::GammaSampler;
use crate::matrix::SpdMatrix;
use crate::sample::Sample;
use crate::tolerances::{BETA_MAX, BETA_MIN};

/// The tail exponent `β`, restricted to `[0.01, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShapeParam(f64);

impl ShapeParam {
    pub fn new(beta: f64) -> Result<Self> {
        if !(BETA_MIN..=BETA_MAX).contains(&beta) {
            return Err(GofError::InvalidParameter(format!(
                "shape parameter {beta} outside [{BETA_MIN}, {BETA_MAX}]"
            )));
        }
        Ok(Self(beta))
    }

    /// Convert from the exponential-power `s` parameterisation (`β = s/2`).
    pub fn from_s(s: f64) -> Result<Self> {
        Self::new(s / 2.0)
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Limit of `‖X‖ / m^{1/(2β)}` for `X ~ MGGD(0, I, β)` as `m → ∞`.
    pub fn radial_concentration_const(self) -> f64 {
        (1.0 / self.0).powf(1.0 / (2.0 * self.0))
    }
}

impl TryFrom<f64> for ShapeParam {
    type Error = GofError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ShapeParam> for f64 {
    fn from(b: ShapeParam) -> f64 {
        b.0
    }
}

/// `(μ, Σ, β)`.
#[derive(Debug, Clone)]
pub struct MggdParams {
    mu: DVector<f64>,
    sigma: SpdMatrix,
    beta: ShapeParam,
}

impl MggdParams {
    pub fn new(mu: DVector<f64>, sigma: SpdMatrix, beta: ShapeParam) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(GofError::DimensionMismatch {
                expected: sigma.dim(),
                found: mu.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(GofError::NonFinite("location".into()));
        }
        Ok(Self { mu, sigma, beta })
    }

    /// `MGGD(0, I_m, β)`.
    pub fn standard(m: usize, beta: ShapeParam) -> Self {
        Self {
            mu: DVector::zeros(m),
            sigma: SpdMatrix::identity(m),
            beta,
        }
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn beta(&self) -> ShapeParam {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn with_beta(&self, beta: ShapeParam) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    /// Log of the normalising constant of the density.
    pub fn log_normalizer(&self) -> f64 {
        log_normalizer(self.dim(), self.beta.get(), self.sigma.log_det())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(GofError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GofError::NonFinite("density argument".into()));
        }
        let centered: Vec<f64> = x.iter().zip(self.mu.iter()).map(|(a, b)| a - b).collect();
        let q = self.sigma.mahalanobis_sq(&centered);
        Ok(self.log_normalizer() - 0.5 * q.powf(self.beta.get()))
    }

    /// Draw `n` iid rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Sample> {
        let sqrt = self.sigma.sqrt()?;
        let z = sample_standard(self.dim(), self.beta, n, rng)?;
        z.affine(sqrt, &self.mu)
    }
}

/// `log β + lnΓ(m/2) − (m/2) ln π − lnΓ(m/(2β)) − (m/(2β)) ln 2 − ½ log|Σ|`.
pub fn log_normalizer(m: usize, beta: f64, log_det_sigma: f64) -> f64 {
    let mf = m as f64;
    let a = mf / (2.0 * beta);
    beta.ln() + ln_gamma(mf / 2.0) - 0.5 * mf * std::f64::consts::PI.ln() - ln_gamma(a)
        - a * std::f64::consts::LN_2
        - 0.5 * log_det_sigma
}

/// Radial law of `MGGD(0, I_m, β)`: `W = ½ R^{2β} ~ Gamma(m/(2β), 1)`.
#[derive(Debug, Clone, Copy)]
pub struct RadialLaw {
    m: usize,
    beta: ShapeParam,
    gamma: GammaSampler,
}

impl RadialLaw {
    pub fn new(m: usize, beta: ShapeParam) -> Result<Self> {
        if m == 0 {
            return Err(GofError::InvalidParameter("dimension must be at least 1".into()));
        }
        let shape = m as f64 / (2.0 * beta.get());
        Ok(Self {
            m,
            beta,
            gamma: GammaSampler::new(shape)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> ShapeParam {
        self.beta
    }

    /// Shape of the gamma law of `W`, `m/(2β)`.
    pub fn gamma_shape(&self) -> f64 {
        self.gamma.shape()
    }

    /// `R = (2W)^{1/(2β)}`.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let ln_w = self.gamma.sample_ln(rng);
        ((std::f64::consts::LN_2 + ln_w) / (2.0 * self.beta.get())).exp()
    }
}

/// Uniform direction on the unit sphere in `R^m`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut u = vec![0.0; m];
    fill_unit_sphere(&mut u, rng);
    u
}

fn fill_unit_sphere<R: Rng + ?Sized>(u: &mut [f64], rng: &mut R) {
    loop {
        let mut norm2 = 0.0;
        for v in u.iter_mut() {
            *v = StandardNormal.sample(rng);
            norm2 += *v * *v;
        }
        if norm2 > 0.0 {
            if u.len() == 1 {
                u[0] = u[0].signum();
                return;
            }
            let inv = 1.0 / norm2.sqrt();
            u.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// `n` iid rows of `MGGD(0, I_m, β)`.
pub fn sample_standard<R: Rng + ?Sized>(
    m: usize,
    beta: ShapeParam,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    let law = RadialLaw::new(m, beta)?;
    let mut data = vec![0.0; n * m];
    for row in data.chunks_exact_mut(m) {
        fill_unit_sphere(row, rng);
        let r = law.sample_radius(rng);
        row.iter_mut().for_each(|v| *v *= r);
    }
    Sample::from_rows(data, n, m)
}

/// `E[Q^k]` for `Q = ‖X‖²`, `X ~ MGGD(0, I_m, β)`:
/// `2^{k/β} Γ(m/(2β) + k/β) / Γ(m/(2β))`, assembled in log space.
pub fn mahalanobis_moment(m: usize, beta: ShapeParam, k: u32) -> Result<f64> {
    let b = beta.get();
    let a = m as f64 / (2.0 * b);
    let kb = k as f64 / b;
    let ln = kb * std::f64::consts::LN_2 + ln_gamma(a + kb) - ln_gamma(a);
    let v = ln.exp();
    if !v.is_finite() {
        return Err(GofError::NonFinite(format!(
            "moment E[Q^{k}] overflows (log value {ln:.3})"
        )));
    }
    Ok(v)
}

/// `n` iid rows `μ + Σ^{1/2} Z / √(S/ν)` with `Z` standard normal and `S ~ χ²_ν`.
pub fn sample_multivariate_t<R: Rng + ?Sized>(
    mu: &DVector<f64>,
    sigma: &SpdMatrix,
    nu: f64,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(GofError::InvalidParameter(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    let m = sigma.dim();
    if mu.len() != m {
        return Err(GofError::DimensionMismatch {
            expected: m,
            found: mu.len(),
        });
    }
    let half_chi = GammaSampler::new(nu / 2.0)?;
    let mut data = vec![0.0; n * m];
    for row in data.chunks_exact_mut(m) {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let s = 2.0 * half_chi.sample(rng);
        let scale = (nu / s).sqrt();
        row.iter_mut().for_each(|v| *v *= scale);
    }
    let z = Sample::from_rows(data, n, m)?;
    z.affine(sigma.sqrt()?, mu)
}

/// Gaussian log-density, used as a β = 1 cross-check.
pub fn gaussian_log_density(mu: &DVector<f64>, sigma: &DMatrix<f64>, x: &[f64]) -> f64 {
    let m = mu.len();
    let c = DVector::from_iterator(m, x.iter().zip(mu.iter()).map(|(a, b)| a - b));
    let chol = sigma.clone().cholesky().expect("positive definite covariance");
    let sol = chol.solve(&c);
    let q = c.dot(&sol);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{kurtosis, ks_distance_to, mean, quantile};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{Continuous, ContinuousCDF, Gamma, Normal, StudentsT};

    fn beta(b: f64) -> ShapeParam {
        ShapeParam::new(b).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn shape_param_envelope() {
        assert!(ShapeParam::new(0.0).is_err());
        assert!(ShapeParam::new(0.009).is_err());
        assert!(ShapeParam::new(100.5).is_err());
        assert!(ShapeParam::new(0.01).is_ok());
        assert!(ShapeParam::new(100.0).is_ok());
        assert_eq!(ShapeParam::from_s(1.0).unwrap().get(), 0.5);
    }

    #[test]
    fn radial_concentration_constants() {
        assert_eq!(beta(1.0).radial_concentration_const(), 1.0);
        assert_relative_eq!(beta(0.5).radial_concentration_const(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(
            beta(2.0).radial_concentration_const(),
            0.5_f64.powf(0.25),
            epsilon = 1e-14
        );
        assert_relative_eq!(beta(2.0).radial_concentration_const(), 0.8409, epsilon = 1e-4);
    }

    #[test]
    fn unit_sphere_in_one_dimension_is_a_sign() {
        let mut r = rng(1);
        let draws: Vec<f64> = (0..4000).map(|_| sample_unit_sphere(1, &mut r)[0]).collect();
        assert!(draws.iter().all(|&u| u == 1.0 || u == -1.0));
        let plus = draws.iter().filter(|&&u| u > 0.0).count() as f64 / 4000.0;
        // 4 standard errors of a fair coin.
        assert!((plus - 0.5).abs() < 4.0 * (0.25_f64 / 4000.0).sqrt());
    }

    #[test]
    fn unit_sphere_has_unit_norm() {
        let mut r = rng(2);
        for _ in 0..100 {
            let u = sample_unit_sphere(3, &mut r);
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_sphere_coordinates_are_centred() {
        let m = 10;
        let draws = 100_000;
        let mut r = rng(3);
        let mut sums = vec![0.0; m];
        for _ in 0..draws {
            for (s, v) in sums.iter_mut().zip(sample_unit_sphere(m, &mut r)) {
                *s += v;
            }
        }
        let bound = 3.0 * (1.0 / (m * draws) as f64).sqrt();
        for s in sums {
            assert!((s / draws as f64).abs() < bound);
        }
    }

    #[test]
    fn radius_reduces_to_gaussian_for_beta_one() {
        // m = 2, β = 1: R²/2 ~ Exp(1).
        let law = RadialLaw::new(2, beta(1.0)).unwrap();
        let mut r = rng(4);
        let mut w: Vec<f64> = (0..20_000)
            .map(|_| 0.5 * law.sample_radius(&mut r).powi(2))
            .collect();
        let d = ks_distance_to(&mut w, |x| 1.0 - (-x).exp());
        assert!(d < 1.63 / (20_000f64).sqrt());
    }

    #[test]
    fn radius_gamma_mean_identity() {
        let law = RadialLaw::new(50, beta(0.5)).unwrap();
        let mut r = rng(5);
        let w: Vec<f64> = (0..100_000)
            .map(|_| 0.5 * law.sample_radius(&mut r).powf(1.0))
            .collect();
        assert!((mean(&w) / 50.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn radius_concentrates_on_thin_shell() {
        let b = beta(0.5);
        let law = RadialLaw::new(200, b).unwrap();
        let mut r = rng(6);
        let scale = 200f64.powf(1.0 / (2.0 * b.get()));
        let ratios: Vec<f64> = (0..20_000).map(|_| law.sample_radius(&mut r) / scale).collect();
        assert!((mean(&ratios) - 2.0).abs() / 2.0 < 0.02);
    }

    #[test]
    fn standard_normal_mode_density() {
        let p = MggdParams::standard(1, beta(1.0));
        assert_relative_eq!(p.log_density(&[0.0]).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn beta_one_density_is_gaussian() {
        let m = 5;
        let mut r = rng(7);
        let b = DMatrix::<f64>::from_fn(m, m, |_, _| StandardNormal.sample(&mut r));
        let sigma_m = &b * b.transpose() + DMatrix::identity(m, m);
        let mu = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(&mut r));
        let p = MggdParams::new(mu.clone(), SpdMatrix::factorize(&sigma_m).unwrap(), beta(1.0)).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..m).map(|_| 2.0 * rand::Rng::sample::<f64, _>(&mut r, StandardNormal)).collect::<Vec<f64>>();
            let a = p.log_density(&x).unwrap();
            let g = gaussian_log_density(&mu, &sigma_m, &x);
            assert!((a - g).abs() < 1e-10, "{a} vs {g}");
        }
    }

    #[test]
    fn density_integrates_to_one_by_radial_quadrature() {
        // m = 4, β = 0.5: ∫ |S³| r³ f(r) dr with |S^{m−1}| = 2π^{m/2}/Γ(m/2).
        let m = 4;
        let p = MggdParams::standard(m, beta(0.5));
        let area = (std::f64::consts::LN_2 + 0.5 * m as f64 * std::f64::consts::PI.ln()
            - ln_gamma(m as f64 / 2.0))
        .exp();
        let f = |r: f64| {
            let mut x = vec![0.0; m];
            x[0] = r;
            area * r.powi(m as i32 - 1) * p.log_density(&x).unwrap().exp()
        };
        let (upper, steps) = (400.0, 200_000usize);
        let h = upper / steps as f64;
        let mut total = f(0.0) + f(upper);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * f(i as f64 * h);
        }
        total *= h / 3.0;
        assert!((total - 1.0).abs() < 1e-6, "mass = {total}");
    }

    #[test]
    fn density_errors() {
        let p = MggdParams::standard(3, beta(1.0));
        assert!(matches!(p.log_density(&[0.0, 1.0]), Err(GofError::DimensionMismatch { .. })));
        assert!(matches!(p.log_density(&[0.0, 1.0, f64::NAN]), Err(GofError::NonFinite(_))));
    }

    #[test]
    fn moments_match_chi_square_for_beta_one() {
        for m in [1, 3, 10, 57] {
            assert_relative_eq!(mahalanobis_moment(m, beta(1.0), 1).unwrap(), m as f64, max_relative = 1e-12);
        }
        assert_relative_eq!(mahalanobis_moment(10, beta(1.0), 2).unwrap(), 120.0, max_relative = 1e-12);
    }

    #[test]
    fn moments_match_monte_carlo() {
        let m = 10;
        let b = beta(0.5);
        let mut r = rng(8);
        let x = sample_standard(m, b, 1_000_000, &mut r).unwrap();
        let q: Vec<f64> = x.rows().map(|row| row.iter().map(|v| v * v).sum()).collect();
        let mc1 = mean(&q);
        let exact1 = mahalanobis_moment(m, b, 1).unwrap();
        assert!((mc1 / exact1 - 1.0).abs() < 0.005, "{mc1} vs {exact1}");
        let q2: Vec<f64> = q.iter().map(|v| v * v).collect();
        let mc2 = mean(&q2);
        let se2 = (crate::stats::variance(&q2) / q2.len() as f64).sqrt();
        let exact2 = mahalanobis_moment(m, b, 2).unwrap();
        assert!((mc2 - exact2).abs() < 3.0 * se2, "{mc2} vs {exact2} (se {se2})");
    }

    #[test]
    fn moment_overflow_is_reported() {
        assert!(mahalanobis_moment(10, beta(0.01), 20).is_err());
    }

    #[test]
    fn beta_one_sampler_has_normal_marginals() {
        let p = MggdParams::standard(3, beta(1.0));
        let x = p.sample(10_000, &mut rng(9)).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        for j in 0..3 {
            let mut col: Vec<f64> = x.rows().map(|r| r[j]).collect();
            let d = ks_distance_to(&mut col, |v| normal.cdf(v));
            // 1e-3 level KS critical value.
            assert!(d < 1.95 / 100.0, "column {j}: {d}");
        }
    }

    #[test]
    fn sampler_is_location_equivariant() {
        let m = 4;
        let mu = DVector::from_element(m, 5.0);
        let sigma = SpdMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = MggdParams::new(mu, sigma, beta(0.7)).unwrap();
        let n = 20_000;
        let x = p.sample(n, &mut rng(10)).unwrap();
        let means = x.column_means();
        for j in 0..m {
            let col: Vec<f64> = x.rows().map(|r| r[j]).collect();
            let sd = crate::stats::variance(&col).sqrt();
            assert!((means[j] - 5.0).abs() < 4.0 * sd / (n as f64).sqrt());
        }
    }

    #[test]
    fn sampler_radial_law_is_gamma() {
        let (m, b) = (50, beta(0.5));
        let x = MggdParams::standard(m, b).sample(100_000, &mut rng(11)).unwrap();
        let mut w: Vec<f64> = x
            .rows()
            .map(|r| 0.5 * r.iter().map(|v| v * v).sum::<f64>().powf(b.get()))
            .collect();
        let law = Gamma::new(50.0, 1.0).unwrap();
        assert!(ks_distance_to(&mut w, |v| law.cdf(v)) < 0.01);
    }

    #[test]
    fn sampler_is_affine_equivariant() {
        let m = 6;
        let mut r = rng(12);
        let b = DMatrix::<f64>::from_fn(m, m, |_, _| StandardNormal.sample(&mut r));
        let sigma = SpdMatrix::factorize(&(&b * b.transpose() + DMatrix::identity(m, m))).unwrap();
        let mu = DVector::from_fn(m, |i, _| i as f64);
        let shape = beta(0.6);
        let p = MggdParams::new(mu.clone(), sigma.clone(), shape).unwrap();
        let x = p.sample(20_000, &mut r).unwrap();
        let map = crate::matrix::WhiteningMap::new(mu, &sigma).unwrap();
        let z = map.whiten(&x).unwrap();
        let q_fit: Vec<f64> = z.rows().map(|row| row.iter().map(|v| v * v).sum()).collect();
        let y = sample_standard(m, shape, 20_000, &mut r).unwrap();
        let q_ref: Vec<f64> = y.rows().map(|row| row.iter().map(|v| v * v).sum()).collect();
        // 1% two-sample KS critical value for equal sizes 20000.
        let crit = 1.63 * (2.0 / 20_000f64).sqrt();
        assert!(crate::stats::ks_two_sample(&q_fit, &q_ref) < crit);
    }

    #[test]
    fn t_sampler_near_gaussian_for_huge_nu() {
        let mu = DVector::zeros(2);
        let x = sample_multivariate_t(&mu, &SpdMatrix::identity(2), 1e6, 10_000, &mut rng(13)).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut col: Vec<f64> = x.rows().map(|r| r[0]).collect();
        assert!(ks_distance_to(&mut col, |v| normal.cdf(v)) < 0.015);
    }

    #[test]
    fn t3_quantile_and_heavy_tails() {
        let oracle = StudentsT::new(0.0, 1.0, 3.0).unwrap();
        let q95 = oracle.inverse_cdf(0.95);
        assert!((q95 - 2.353).abs() < 1e-3);
        // Sanity check the oracle itself against its density.
        assert!(oracle.pdf(0.0) > 0.36);

        let mu = DVector::zeros(1);
        let x = sample_multivariate_t(&mu, &SpdMatrix::identity(1), 3.0, 100_000, &mut rng(14)).unwrap();
        let col: Vec<f64> = x.rows().map(|r| r[0]).collect();
        let emp = quantile(&col, 0.95);
        assert!((emp / q95 - 1.0).abs() < 0.05, "{emp}");
        assert!(kurtosis(&col) > 5.0);
    }

    #[test]
    fn t_sampler_rejects_bad_nu() {
        let mu = DVector::zeros(1);
        assert!(sample_multivariate_t(&mu, &SpdMatrix::identity(1), 0.0, 3, &mut rng(1)).is_err());
    }
}
