//! Likelihood comparison of Normal, multivariate t and MGGD fits.
//!
//! Normal uses the closed-form maximum likelihood estimate. The t model is
//! profiled over `ν ∈ {1, 1.5, …, 50}` with an EM scatter fit per `ν`; the
//! MGGD model over `β ∈ {0.2, 0.25, …, 4}` with the fixed-`β` likelihood
//! scatter and a closed-form scale step, then refined on a 0.01 grid around
//! the best `β`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GofError, Result};
use crate::estimation::{mahalanobis_radii, mggd_log_likelihood, mggd_ml_fit, ml_scale};
use crate::matrix::SpdMatrix;
use crate::mggd::{MggdParams, ShapeParam};
use crate::sample::Sample;

const ML_TOL: f64 = 1e-9;
const ML_MAX_ITER: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: String,
    pub log_likelihood: f64,
    pub k: usize,
    pub aic: f64,
    pub bic: f64,
    /// `ν` for t, `β` for MGGD.
    pub extra_param: Option<f64>,
    /// The profile maximum sits on the edge of its grid.
    pub at_grid_edge: bool,
}

impl ModelFit {
    fn new(model: &str, ll: f64, k: usize, n: usize, extra: Option<f64>, edge: bool) -> Self {
        Self {
            model: model.into(),
            log_likelihood: ll,
            k,
            aic: 2.0 * k as f64 - 2.0 * ll,
            bic: k as f64 * (n as f64).ln() - 2.0 * ll,
            extra_param: extra,
            at_grid_edge: edge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub param: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub n: usize,
    pub m: usize,
    pub normal: ModelFit,
    pub t: ModelFit,
    pub mggd: ModelFit,
    pub beta_profile: Vec<ProfilePoint>,
    pub nu_profile: Vec<ProfilePoint>,
}

impl ModelComparison {
    /// Models ordered by AIC, best first.
    pub fn aic_ranking(&self) -> Vec<&ModelFit> {
        let mut v = vec![&self.normal, &self.t, &self.mggd];
        v.sort_by(|a, b| a.aic.total_cmp(&b.aic));
        v
    }

    pub fn profile_csv(&self) -> String {
        let mut s = String::from("beta,log_likelihood\n");
        for p in &self.beta_profile {
            s.push_str(&format!("{},{}\n", p.param, p.log_likelihood));
        }
        s
    }

    pub fn render_text(&self) -> String {
        let mut s = format!("Model comparison (n = {}, m = {})\n", self.n, self.m);
        s.push_str(&format!("  {:<8} {:>14} {:>4} {:>14} {:>14}  {}\n", "model", "loglik", "k", "AIC", "BIC", "param"));
        for f in [&self.normal, &self.t, &self.mggd] {
            let param = match (f.model.as_str(), f.extra_param) {
                ("t", Some(v)) => format!("nu = {v}"),
                ("mggd", Some(v)) => format!("beta = {v:.2}"),
                _ => String::new(),
            };
            let edge = if f.at_grid_edge { " (grid edge)" } else { "" };
            s.push_str(&format!(
                "  {:<8} {:>14.3} {:>4} {:>14.3} {:>14.3}  {param}{edge}\n",
                f.model, f.log_likelihood, f.k, f.aic, f.bic
            ));
        }
        s
    }
}

fn normal_k(m: usize) -> usize {
    m + m * (m + 1) / 2
}

fn centered(x: &Sample, mu: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.n(), x.m(), |i, j| x.row(i)[j] - mu[j])
}

/// Gaussian maximum likelihood `(μ̂, Σ̂)` and log-likelihood.
pub fn normal_fit(x: &Sample) -> Result<(DVector<f64>, SpdMatrix, f64)> {
    let (n, m) = (x.n(), x.m());
    if n <= m {
        return Err(GofError::TooFewObservations { needed: m + 1, got: n });
    }
    let mu = x.column_means();
    let c = centered(x, &mu);
    let sigma = SpdMatrix::factorize(&(c.transpose() * &c / n as f64))?;
    let ll = -0.5 * n as f64 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + sigma.log_det() + m as f64);
    Ok((mu, sigma, ll))
}

/// Multivariate t log-likelihood with scatter `Σ`.
pub fn t_log_likelihood(x: &Sample, mu: &DVector<f64>, sigma: &SpdMatrix, nu: f64) -> Result<f64> {
    let m = x.m() as f64;
    let c0 = ln_gamma((nu + m) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * m * (nu * std::f64::consts::PI).ln() - 0.5 * sigma.log_det();
    let q = mahalanobis_radii(x, mu, sigma)?;
    Ok(q.iter().map(|qi| c0 - 0.5 * (nu + m) * (qi / nu).ln_1p()).sum())
}

/// EM for `(μ, Σ)` at fixed `ν`: weights `(ν + m)/(ν + Qᵢ)`.
pub fn t_em_fit(x: &Sample, nu: f64, start: (&DVector<f64>, &SpdMatrix)) -> Result<(DVector<f64>, SpdMatrix, f64)> {
    let (n, m) = (x.n(), x.m());
    let mut mu = start.0.clone();
    let mut sigma = start.1.clone();
    for _ in 0..ML_MAX_ITER {
        let q = mahalanobis_radii(x, &mu, &sigma)?;
        let w: Vec<f64> = q.iter().map(|qi| (nu + m as f64) / (nu + qi)).collect();
        let wsum: f64 = w.iter().sum();
        let new_mu = DVector::from_fn(m, |j, _| (0..n).map(|i| w[i] * x.row(i)[j]).sum::<f64>() / wsum);
        let mut c = centered(x, &new_mu);
        for (i, mut row) in c.row_iter_mut().enumerate() {
            row *= w[i].sqrt();
        }
        let s = c.transpose() * c / n as f64;
        let new_sigma = SpdMatrix::factorize(&((&s + s.transpose()) * 0.5))?;
        let change = (new_sigma.matrix() - sigma.matrix()).norm() / sigma.matrix().norm()
            + (&new_mu - &mu).norm() / (1.0 + mu.norm());
        mu = new_mu;
        sigma = new_sigma;
        if change <= ML_TOL {
            break;
        }
    }
    let ll = t_log_likelihood(x, &mu, &sigma, nu)?;
    Ok((mu, sigma, ll))
}

/// Rescale `Σ` to the likelihood-optimal `s·Σ`: `s^β = β·mean(Q^β)/m`.
fn optimise_scale(x: &Sample, params: &MggdParams) -> Result<MggdParams> {
    let b = params.beta().get();
    let q = mahalanobis_radii(x, params.mu(), params.sigma())?;
    let s = ml_scale(&q, b, x.m())?;
    MggdParams::new(params.mu().clone(), params.sigma().scaled(s)?, params.beta())
}

/// Fixed-`β` MGGD likelihood fit, warm-started when `start` is given.
pub fn mggd_profile_fit(x: &Sample, beta: f64, start: Option<&MggdParams>) -> Result<(MggdParams, f64)> {
    let b = ShapeParam::new(beta)?;
    let fit = mggd_ml_fit(x, b, start.map(|p| (p.mu(), p.sigma())), ML_TOL, ML_MAX_ITER)?;
    let params = optimise_scale(x, &fit.params)?;
    let ll = mggd_log_likelihood(x, &params)?;
    Ok((params, ll))
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k).map(|i| ((lo + i as f64 * step) * 1e6).round() / 1e6).collect()
}

pub fn nu_grid() -> Vec<f64> {
    grid(1.0, 50.0, 0.5)
}

pub fn beta_grid() -> Vec<f64> {
    grid(0.2, 4.0, 0.05)
}

fn argmax(points: &[ProfilePoint]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.log_likelihood > points[best].log_likelihood {
            best = i;
        }
    }
    best
}

/// Normal, t and MGGD fits with AIC/BIC and the `β` profile.
pub fn model_comparison(x: &Sample) -> Result<ModelComparison> {
    let (n, m) = (x.n(), x.m());
    if n <= m + 2 {
        return Err(GofError::TooFewObservations { needed: m + 3, got: n });
    }
    let (mu0, sigma0, ll_normal) = normal_fit(x)?;
    let k_normal = normal_k(m);

    // t: warm-start each ν from the previous one, heaviest tails last.
    let nus = nu_grid();
    let mut nu_profile = Vec::with_capacity(nus.len());
    let (mut mu, mut sigma) = (mu0.clone(), sigma0.clone());
    for &nu in nus.iter().rev() {
        let (mu1, s1, ll) = t_em_fit(x, nu, (&mu, &sigma))?;
        nu_profile.push(ProfilePoint { param: nu, log_likelihood: ll });
        mu = mu1;
        sigma = s1;
    }
    nu_profile.reverse();
    let bt = argmax(&nu_profile);
    let t = ModelFit::new(
        "t",
        nu_profile[bt].log_likelihood,
        k_normal + 1,
        n,
        Some(nu_profile[bt].param),
        bt == 0 || bt + 1 == nu_profile.len(),
    );

    // MGGD: walk the grid outward from β = 1, warm-starting from the neighbour.
    let betas = beta_grid();
    let one = betas.iter().position(|&b| b == 1.0).expect("grid contains 1");
    let mut fits: Vec<Option<(MggdParams, f64)>> = vec![None; betas.len()];
    let gaussian_start = MggdParams::new(mu0.clone(), sigma0.clone(), ShapeParam::new(1.0)?)?;
    let mut prev = Some(gaussian_start.clone());
    for i in one..betas.len() {
        let f = mggd_profile_fit(x, betas[i], prev.as_ref())?;
        prev = Some(f.0.clone());
        fits[i] = Some(f);
    }
    prev = Some(gaussian_start);
    for i in (0..one).rev() {
        let f = mggd_profile_fit(x, betas[i], prev.as_ref())?;
        prev = Some(f.0.clone());
        fits[i] = Some(f);
    }
    let beta_profile: Vec<ProfilePoint> = betas
        .iter()
        .zip(&fits)
        .map(|(&b, f)| ProfilePoint {
            param: b,
            log_likelihood: f.as_ref().expect("fitted").1,
        })
        .collect();
    let bg = argmax(&beta_profile);
    let edge = bg == 0 || bg + 1 == beta_profile.len();
    let mut best = (beta_profile[bg].param, beta_profile[bg].log_likelihood);
    let start = fits[bg].as_ref().map(|f| f.0.clone());
    for step in [-4i32, -3, -2, -1, 1, 2, 3, 4] {
        let b = ((best.0 + step as f64 * 0.01) * 1e6).round() / 1e6;
        let b0 = beta_profile[bg].param;
        if (b - b0).abs() > 0.045 || !(0.2..=4.0).contains(&b) {
            continue;
        }
        let (_, ll) = mggd_profile_fit(x, b, start.as_ref())?;
        if ll > best.1 {
            best = (b, ll);
        }
    }
    let mggd = ModelFit::new("mggd", best.1, k_normal + 1, n, Some(best.0), edge);

    Ok(ModelComparison {
        n,
        m,
        normal: ModelFit::new("normal", ll_normal, k_normal, n, None, false),
        t,
        mggd,
        beta_profile,
        nu_profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mggd::{gaussian_log_density, sample_multivariate_t};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toeplitz(m: usize) -> SpdMatrix {
        SpdMatrix::factorize(&DMatrix::from_fn(m, m, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()))).unwrap()
    }

    #[test]
    fn grids() {
        let b = beta_grid();
        assert_eq!((b.len(), b[0], *b.last().unwrap()), (77, 0.2, 4.0));
        let v = nu_grid();
        assert_eq!((v.len(), v[1], *v.last().unwrap()), (99, 1.5, 50.0));
    }

    #[test]
    fn normal_loglik_matches_density_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MggdParams::new(DVector::from_vec(vec![1.0, 2.0, 3.0]), toeplitz(3), ShapeParam::new(1.0).unwrap()).unwrap();
        let x = p.sample(200, &mut rng).unwrap();
        let (mu, sigma, ll) = normal_fit(&x).unwrap();
        let direct: f64 = x.rows().map(|r| gaussian_log_density(&mu, sigma.matrix(), r)).sum();
        assert!((ll - direct).abs() < 1e-8 * direct.abs());
    }

    #[test]
    fn t_likelihood_at_large_nu_approaches_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MggdParams::new(DVector::zeros(3), toeplitz(3), ShapeParam::new(1.0).unwrap()).unwrap();
        let x = p.sample(300, &mut rng).unwrap();
        let (mu, sigma, ll) = normal_fit(&x).unwrap();
        let lt = t_log_likelihood(&x, &mu, &sigma, 1e7).unwrap();
        assert!((lt - ll).abs() < 1e-3 * ll.abs());
    }

    #[test]
    fn mggd_at_beta_one_is_the_gaussian_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample_multivariate_t(&DVector::zeros(3), &toeplitz(3), 5.0, 200, &mut rng).unwrap();
        let (_, _, ll_normal) = normal_fit(&x).unwrap();
        let (_, ll) = mggd_profile_fit(&x, 1.0, None).unwrap();
        assert!((ll - ll_normal).abs() < 1e-6 * ll_normal.abs());
        // Nesting: one redundant parameter costs exactly 2 in AIC.
        let k = normal_k(3);
        let aic_forced = ModelFit::new("mggd", ll, k + 1, 200, Some(1.0), false).aic;
        let aic_normal = ModelFit::new("normal", ll_normal, k, 200, None, false).aic;
        assert!(aic_forced >= aic_normal - 1e-6 * aic_normal.abs());
    }

    #[test]
    fn gaussian_data_prefers_no_extra_parameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = MggdParams::new(DVector::zeros(4), toeplitz(4), ShapeParam::new(1.0).unwrap()).unwrap();
        let x = p.sample(2000, &mut rng).unwrap();
        let c = model_comparison(&x).unwrap();
        assert!(c.normal.aic <= c.mggd.aic + 2.0, "{} vs {}", c.normal.aic, c.mggd.aic);
        assert_eq!(c.normal.k, 14);
        assert_eq!((c.t.k, c.mggd.k), (15, 15));
        assert!(c.mggd.log_likelihood >= c.normal.log_likelihood - 1e-6 * c.normal.log_likelihood.abs());
        let b = c.mggd.extra_param.unwrap();
        assert!((0.85..1.15).contains(&b), "{b}");
    }

    #[test]
    fn t3_data_prefers_t_over_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = sample_multivariate_t(&DVector::zeros(4), &toeplitz(4), 3.0, 500, &mut rng).unwrap();
        let c = model_comparison(&x).unwrap();
        assert!(c.t.aic < c.normal.aic);
        assert!(c.mggd.aic < c.normal.aic);
        let nu = c.t.extra_param.unwrap();
        assert!((2.0..=5.0).contains(&nu), "{nu}");
        assert_eq!(c.aic_ranking()[2].model, "normal");
    }

    #[test]
    fn light_tailed_mggd_profile_peaks_near_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = MggdParams::new(DVector::zeros(4), toeplitz(4), ShapeParam::new(2.0).unwrap()).unwrap();
        let x = p.sample(1000, &mut rng).unwrap();
        let c = model_comparison(&x).unwrap();
        let b = c.mggd.extra_param.unwrap();
        assert!((1.6..2.5).contains(&b), "{b}");
        assert!(!c.mggd.at_grid_edge);
        assert!(c.mggd.aic < c.normal.aic);
    }

    #[test]
    fn too_few_rows() {
        let x = Sample::from_rows(vec![0.0; 5 * 3], 5, 3).unwrap();
        assert!(model_comparison(&x).is_err());
    }
}
