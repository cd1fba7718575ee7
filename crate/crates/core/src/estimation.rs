//! Robust estimation of `(μ, Σ, β)` under the MGGD null.
//!
//! Location is the spatial median, scatter shape the regularised Tyler
//! fixed point
//!
//! ```text
//! Σ = (1 − ρ) (m/n) Σᵢ cᵢcᵢᵀ / (cᵢᵀ Σ⁻¹ cᵢ) + ρ I,    cᵢ = xᵢ − μ̂,
//! ```
//!
//! normalised to trace `m` after convergence. The shape exponent solves the
//! moment-ratio equation `E[Q²]/E[Q]² = r̂` on the Mahalanobis radii, which
//! does not depend on the overall scale, and the scale is then set so the
//! mean radius matches `E[Q]` under the fitted `β̂`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GofError, Result};
use crate::matrix::{ConditionReport, SpdMatrix, WhiteningMap};
use crate::mggd::{mahalanobis_moment, MggdParams, ShapeParam};
use crate::sample::Sample;
use crate::tolerances::{BETA_BRACKET, BETA_MAX_ITER, BETA_TOL, MIN_FIT_N, ZERO_RADIUS};

// ---------------------------------------------------------------------------
// Location
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMedian {
    pub location: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of `Σᵢ (xᵢ − μ)/‖xᵢ − μ‖` over rows not coinciding with `μ`.
    pub gradient_norm: f64,
}

fn l1_objective(x: &Sample, y: &[f64]) -> f64 {
    x.rows()
        .map(|r| r.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .sum()
}

/// Weiszfeld's iteration for `argmin_μ Σᵢ ‖xᵢ − μ‖₂`.
///
/// Iterates that land on a data point take the Vardi–Zhang step, and a
/// data point whose pull from the others is no larger than its multiplicity
/// is accepted as the exact minimiser. Steps that increase the objective are
/// halved.
pub fn spatial_median(x: &Sample, tol: f64, max_iter: usize) -> Result<SpatialMedian> {
    let (n, m) = (x.n(), x.m());
    if n < 2 {
        return Err(GofError::TooFewObservations { needed: 2, got: n });
    }
    let scale = x.as_slice().iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    let mut y: Vec<f64> = x.column_means().as_slice().to_vec();
    let mut objective = l1_objective(x, &y);
    let mut pull = vec![0.0; m];
    let mut target = vec![0.0; m];

    for iter in 0..max_iter {
        pull.iter_mut().for_each(|v| *v = 0.0);
        target.iter_mut().for_each(|v| *v = 0.0);
        let mut weight = 0.0;
        let mut coincident = 0usize;
        for row in x.rows() {
            let d = row.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d <= 0.0 {
                coincident += 1;
                continue;
            }
            let w = 1.0 / d;
            weight += w;
            for j in 0..m {
                target[j] += w * row[j];
                pull[j] += w * (row[j] - y[j]);
            }
        }
        let r = pull.iter().map(|v| v * v).sum::<f64>().sqrt();
        if weight == 0.0 || r <= coincident as f64 || r <= tol * n as f64 {
            return Ok(SpatialMedian {
                location: DVector::from_vec(y),
                iterations: iter,
                converged: true,
                gradient_norm: r,
            });
        }
        target.iter_mut().for_each(|v| *v /= weight);
        let mut next: Vec<f64> = if coincident == 0 {
            target.clone()
        } else {
            let eta = coincident as f64 / r;
            let keep = (1.0 - eta).max(0.0);
            let stay = eta.min(1.0);
            target.iter().zip(&y).map(|(t, c)| keep * t + stay * c).collect()
        };
        let mut next_obj = l1_objective(x, &next);
        let mut damping = 0;
        while next_obj > objective && damping < 30 {
            for (nv, cv) in next.iter_mut().zip(&y) {
                *nv = cv + 0.5 * (*nv - cv);
            }
            next_obj = l1_objective(x, &next);
            damping += 1;
        }
        let step = next.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        y = next;
        objective = next_obj;
        if step <= tol * scale * 1e-3 {
            let g = gradient_norm(x, &y);
            return Ok(SpatialMedian {
                location: DVector::from_vec(y),
                iterations: iter + 1,
                converged: true,
                gradient_norm: g,
            });
        }
    }
    let g = gradient_norm(x, &y);
    log::warn!("spatial median did not converge in {max_iter} iterations (gradient {g:.3e})");
    Ok(SpatialMedian {
        location: DVector::from_vec(y),
        iterations: max_iter,
        converged: false,
        gradient_norm: g,
    })
}

fn gradient_norm(x: &Sample, y: &[f64]) -> f64 {
    let mut pull = vec![0.0; y.len()];
    for row in x.rows() {
        let d = row.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d > 0.0 {
            for j in 0..y.len() {
                pull[j] += (row[j] - y[j]) / d;
            }
        }
    }
    pull.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Scatter
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TylerConfig {
    /// Shrinkage weight in `(0, 1)`; `None` selects [`default_rho`].
    pub rho: Option<f64>,
    pub max_iter: usize,
    /// Relative Frobenius change between iterates that counts as converged.
    pub tol: f64,
}

impl Default for TylerConfig {
    fn default() -> Self {
        Self {
            rho: None,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

impl TylerConfig {
    pub fn with_rho(rho: f64) -> Self {
        Self {
            rho: Some(rho),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(GofError::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(GofError::InvalidParameter("tyler tol must be > 0 and max_iter ≥ 1".into()));
        }
        Ok(())
    }

    pub fn resolve_rho(&self, m: usize, n: usize) -> f64 {
        self.rho.unwrap_or_else(|| default_rho(m, n))
    }
}

/// `min(0.9, max(0.05, m/(m + 2n), 1 − n/m + 0.05))`.
///
/// The last term keeps `ρ` above `1 − n/m`, below which the regularised
/// fixed point need not exist when `m > n`.
pub fn default_rho(m: usize, n: usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let existence = 1.0 - nf / mf + 0.05;
    (mf / (mf + 2.0 * nf)).max(0.05).max(existence).min(0.9)
}

#[derive(Debug, Clone)]
pub struct TylerFit {
    /// Fixed point rescaled to trace `m`.
    pub shape: SpdMatrix,
    /// Trace of the fixed point before normalisation.
    pub trace_before: f64,
    pub rho: f64,
    pub iterations: usize,
    /// `‖F(Σ) − Σ‖_F / ‖Σ‖_F` at the returned (unnormalised) iterate.
    pub residual: f64,
    pub converged: bool,
    pub dropped_rows: usize,
}

/// Squared Mahalanobis radii of every row, `(xᵢ − μ)ᵀ Σ⁻¹ (xᵢ − μ)`.
pub fn mahalanobis_radii(x: &Sample, mu: &DVector<f64>, sigma: &SpdMatrix) -> Result<Vec<f64>> {
    if x.m() != sigma.dim() || mu.len() != sigma.dim() {
        return Err(GofError::DimensionMismatch {
            expected: sigma.dim(),
            found: x.m(),
        });
    }
    let c = centered_matrix(x, mu);
    Ok(quadratic_rows(&c, sigma.inverse()))
}

fn centered_matrix(x: &Sample, mu: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.n(), x.m(), |i, j| x.row(i)[j] - mu[j])
}

/// `diag(C A Cᵀ)` for symmetric `A`.
fn quadratic_rows(c: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
    let ca = c * a;
    (0..c.nrows())
        .map(|i| ca.row(i).iter().zip(c.row(i).iter()).map(|(u, v)| u * v).sum())
        .collect()
}

/// One application of the right-hand side of the fixed-point equation.
fn tyler_map(c: &DMatrix<f64>, sigma: &DMatrix<f64>, rho: f64) -> Result<DMatrix<f64>> {
    let (n, m) = c.shape();
    let inv = sigma
        .clone()
        .cholesky()
        .ok_or(GofError::NotPositiveDefinite { lambda_min: f64::NAN })?
        .inverse();
    let q = quadratic_rows(c, &inv);
    let mut weighted = c.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        if q[i] < ZERO_RADIUS {
            return Err(GofError::ZeroDenominator { row: i });
        }
        row /= q[i].sqrt();
    }
    let mut out = weighted.transpose() * weighted;
    out *= (1.0 - rho) * m as f64 / n as f64;
    for j in 0..m {
        out[(j, j)] += rho;
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Residual of the fixed-point equation at `sigma` (unnormalised scale).
pub fn tyler_fixed_point_residual(
    x: &Sample,
    mu_hat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    rho: f64,
) -> Result<f64> {
    let c = nonzero_centered(x, mu_hat).0;
    let next = tyler_map(&c, sigma, rho)?;
    Ok((next - sigma).norm() / sigma.norm())
}

fn nonzero_centered(x: &Sample, mu: &DVector<f64>) -> (DMatrix<f64>, usize) {
    let keep: Vec<usize> = (0..x.n())
        .filter(|&i| x.row(i).iter().zip(mu.iter()).any(|(a, b)| a != b))
        .collect();
    let dropped = x.n() - keep.len();
    let c = DMatrix::from_fn(keep.len(), x.m(), |i, j| x.row(keep[i])[j] - mu[j]);
    (c, dropped)
}

/// Regularised Tyler scatter shape, starting from `I`.
pub fn tyler_regularized(x: &Sample, mu_hat: &DVector<f64>, cfg: &TylerConfig) -> Result<TylerFit> {
    cfg.validate()?;
    if mu_hat.len() != x.m() {
        return Err(GofError::DimensionMismatch {
            expected: x.m(),
            found: mu_hat.len(),
        });
    }
    let (c, dropped) = nonzero_centered(x, mu_hat);
    if dropped > 0 {
        log::warn!("tyler: dropped {dropped} rows equal to the location estimate");
    }
    if c.nrows() < 2 {
        return Err(GofError::TooFewObservations {
            needed: 2,
            got: c.nrows(),
        });
    }
    let m = x.m();
    let rho = cfg.resolve_rho(m, c.nrows());
    let mut sigma = DMatrix::identity(m, m);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let next = tyler_map(&c, &sigma, rho)?;
        residual = (&next - &sigma).norm() / sigma.norm();
        if residual <= cfg.tol {
            converged = true;
            break;
        }
        sigma = next;
        iterations += 1;
    }
    if !converged {
        log::warn!("tyler: no convergence after {} iterations (residual {residual:.3e})", cfg.max_iter);
    }
    let trace_before = sigma.trace();
    let shape = SpdMatrix::factorize(&(&sigma * (m as f64 / trace_before)))?;
    Ok(TylerFit {
        shape,
        trace_before,
        rho,
        iterations,
        residual,
        converged,
        dropped_rows: dropped,
    })
}

/// Rescale a trace-normalised shape so the mean radius equals `E[Q]` under `β̂`.
///
/// Returns the scaled matrix and the factor `σ²`.
pub fn calibrate_scale(
    sigma_shape: &SpdMatrix,
    x: &Sample,
    mu_hat: &DVector<f64>,
    beta_hat: ShapeParam,
) -> Result<(SpdMatrix, f64)> {
    let radii = mahalanobis_radii(x, mu_hat, sigma_shape)?;
    let mean_q = radii.iter().sum::<f64>() / radii.len() as f64;
    if !(mean_q > 0.0) {
        return Err(GofError::DegenerateRadii);
    }
    let expected = mahalanobis_moment(x.m(), beta_hat, 1)?;
    let factor = mean_q / expected;
    Ok((sigma_shape.scaled(factor)?, factor))
}

// ---------------------------------------------------------------------------
// Shape exponent
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: ShapeParam,
    /// The empirical ratio fell outside what the bracket can attain.
    pub clamped: bool,
    pub iterations: usize,
}

/// `ln( Γ(a) Γ(a + 2/β) / Γ(a + 1/β)² )`, `a = m/(2β)`: the log of
/// `E[Q²]/E[Q]²` under `MGGD(0, I_m, β)`. Strictly decreasing in `β`.
pub fn log_moment_ratio(m: usize, beta: f64) -> f64 {
    let a = m as f64 / (2.0 * beta);
    ln_gamma(a) + ln_gamma(a + 2.0 / beta) - 2.0 * ln_gamma(a + 1.0 / beta)
}

/// Solve `E[Q²]/E[Q]² = ratio` for `β` by bisection on `ln β`.
pub fn solve_beta_from_ratio(
    ratio: f64,
    m: usize,
    bounds: (f64, f64),
    tol: f64,
) -> Result<BetaEstimate> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(GofError::NonFinite(format!("moment ratio {ratio}")));
    }
    let target = ratio.ln();
    let (lo, hi) = bounds;
    if target >= log_moment_ratio(m, lo) {
        return Ok(BetaEstimate {
            beta: ShapeParam::new(lo)?,
            clamped: true,
            iterations: 0,
        });
    }
    if target <= log_moment_ratio(m, hi) {
        return Ok(BetaEstimate {
            beta: ShapeParam::new(hi)?,
            clamped: true,
            iterations: 0,
        });
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut iterations = 0;
    while iterations < BETA_MAX_ITER && (b.exp() - a.exp()) > tol {
        let mid = 0.5 * (a + b);
        if log_moment_ratio(m, mid.exp()) > target {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    Ok(BetaEstimate {
        beta: ShapeParam::new((0.5 * (a + b)).exp())?,
        clamped: false,
        iterations,
    })
}

/// Moment-ratio estimate of `β` from squared radii.
pub fn estimate_beta_from_radii(radii: &[f64], m: usize, bounds: (f64, f64), tol: f64) -> Result<BetaEstimate> {
    if radii.len() < 4 {
        return Err(GofError::TooFewObservations {
            needed: 4,
            got: radii.len(),
        });
    }
    let n = radii.len() as f64;
    let m1 = radii.iter().sum::<f64>() / n;
    let m2 = radii.iter().map(|q| q * q).sum::<f64>() / n;
    if !(m1 > 0.0) {
        return Err(GofError::DegenerateRadii);
    }
    let est = solve_beta_from_ratio(m2 / (m1 * m1), m, bounds, tol)?;
    if est.clamped {
        log::warn!("shape estimate clamped to {} (moment ratio {:.4})", est.beta.get(), m2 / (m1 * m1));
    }
    Ok(est)
}

pub fn estimate_beta(
    x: &Sample,
    mu_hat: &DVector<f64>,
    sigma_hat: &SpdMatrix,
    bounds: (f64, f64),
    tol: f64,
) -> Result<BetaEstimate> {
    let radii = mahalanobis_radii(x, mu_hat, sigma_hat)?;
    estimate_beta_from_radii(&radii, x.m(), bounds, tol)
}

// ---------------------------------------------------------------------------
// Full fit
// ---------------------------------------------------------------------------

/// How the shape exponent enters the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapeMode {
    /// Estimate `β` from the data (the composite MGGD null).
    #[default]
    Estimate,
    /// Hold `β` fixed, e.g. `1` for a Gaussian null.
    Fixed(ShapeParam),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub tyler: TylerConfig,
    pub shape: ShapeMode,
    pub median_tol: f64,
    pub median_max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tyler: TylerConfig::default(),
            shape: ShapeMode::Estimate,
            median_tol: 1e-9,
            median_max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub median_iterations: usize,
    pub median_converged: bool,
    pub rho: f64,
    pub tyler_iterations: usize,
    pub tyler_residual: f64,
    pub tyler_converged: bool,
    pub dropped_rows: usize,
    pub beta_clamped: bool,
    /// `|β̂₂ − β̂₁|` between the shape-only and the scale-calibrated estimate.
    pub beta_refinement_change: f64,
    pub scale_factor: f64,
    pub spectrum: ConditionReport,
}

impl FitDiagnostics {
    pub fn all_converged(&self) -> bool {
        self.median_converged && self.tyler_converged
    }
}

#[derive(Debug, Clone)]
pub struct FittedNull {
    pub params: MggdParams,
    pub whitening: WhiteningMap,
    pub diagnostics: FitDiagnostics,
}

/// spatial median → regularised Tyler → `β̂` → scale → whitening map.
pub fn fit_mggd(x: &Sample, cfg: &FitConfig) -> Result<FittedNull> {
    let needed = MIN_FIT_N.max(4);
    if x.n() < needed {
        return Err(GofError::TooFewObservations { needed, got: x.n() });
    }
    let median = spatial_median(x, cfg.median_tol, cfg.median_max_iter)?;
    let mu_hat = median.location.clone();
    let tyler = tyler_regularized(x, &mu_hat, &cfg.tyler)?;

    let shape_radii = mahalanobis_radii(x, &mu_hat, &tyler.shape)?;
    let (beta_first, clamped) = match cfg.shape {
        ShapeMode::Estimate => {
            let est = estimate_beta_from_radii(&shape_radii, x.m(), BETA_BRACKET, BETA_TOL)?;
            (est.beta, est.clamped)
        }
        ShapeMode::Fixed(b) => (b, false),
    };
    let (mut sigma_hat, mut factor) = calibrate_scale(&tyler.shape, x, &mu_hat, beta_first)?;

    // Refinement pass under the calibrated scale.
    let mut beta_hat = beta_first;
    let mut change = 0.0;
    let mut clamped = clamped;
    if cfg.shape == ShapeMode::Estimate {
        let est = estimate_beta(x, &mu_hat, &sigma_hat, BETA_BRACKET, BETA_TOL)?;
        change = (est.beta.get() - beta_first.get()).abs();
        clamped = est.clamped;
        if est.beta != beta_first {
            beta_hat = est.beta;
            let (s, f) = calibrate_scale(&tyler.shape, x, &mu_hat, beta_hat)?;
            sigma_hat = s;
            factor = f;
        }
    }

    let spectrum = sigma_hat.condition_diagnostics();
    let whitening = WhiteningMap::new(mu_hat.clone(), &sigma_hat)?;
    let params = MggdParams::new(mu_hat, sigma_hat, beta_hat)?;
    Ok(FittedNull {
        params,
        whitening,
        diagnostics: FitDiagnostics {
            median_iterations: median.iterations,
            median_converged: median.converged,
            rho: tyler.rho,
            tyler_iterations: tyler.iterations,
            tyler_residual: tyler.residual,
            tyler_converged: tyler.converged,
            dropped_rows: tyler.dropped_rows,
            beta_clamped: clamped,
            beta_refinement_change: change,
            scale_factor: factor,
            spectrum,
        },
    })
}

// ---------------------------------------------------------------------------
// Maximum likelihood scatter for a fixed shape exponent
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MggdMlFit {
    pub params: MggdParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Joint `(μ, Σ)` maximum likelihood for fixed `β`, by the fixed point
///
/// ```text
/// μ = Σᵢ wᵢ xᵢ / Σᵢ wᵢ,   Σ = (β/n) Σᵢ wᵢ cᵢcᵢᵀ,   wᵢ = Qᵢ^{β−1}.
/// ```
///
/// Started from the spatial median and the scale-calibrated Tyler shape.
/// At `β = 1` this returns the Gaussian maximum likelihood estimate.
pub fn mggd_ml_fit(
    x: &Sample,
    beta: ShapeParam,
    start: Option<(&DVector<f64>, &SpdMatrix)>,
    tol: f64,
    max_iter: usize,
) -> Result<MggdMlFit> {
    let (n, m) = (x.n(), x.m());
    if n <= m {
        return Err(GofError::TooFewObservations { needed: m + 1, got: n });
    }
    let b = beta.get();
    let (mut mu, mut sigma) = match start {
        Some((mu, s)) => (mu.clone(), s.matrix().clone()),
        None => {
            let med = spatial_median(x, 1e-9, 1000)?.location;
            let tyler = tyler_regularized(x, &med, &TylerConfig::with_rho(1e-3))?;
            let (s, _) = calibrate_scale(&tyler.shape, x, &med, beta)?;
            (med, s.matrix().clone())
        }
    };
    // Floor on Q keeps the weights finite for β < 1 when μ nears a data point.
    let q_floor = 1e-12 * m as f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let spd = SpdMatrix::factorize(&sigma)?;
        let c = centered_matrix(x, &mu);
        let q = quadratic_rows(&c, spd.inverse());
        let w: Vec<f64> = q.iter().map(|&qi| qi.max(q_floor).powf(b - 1.0)).collect();
        let wsum: f64 = w.iter().sum();
        let new_mu = DVector::from_fn(m, |j, _| {
            (0..n).map(|i| w[i] * x.row(i)[j]).sum::<f64>() / wsum
        });
        let c_new = centered_matrix(x, &new_mu);
        let mut weighted = c_new.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[i].sqrt();
        }
        let mut new_sigma = weighted.transpose() * weighted * (b / n as f64);
        new_sigma = (&new_sigma + new_sigma.transpose()) * 0.5;
        // The raw update drifts in scale for β > 1 on heavy-tailed data, so
        // each step is followed by the closed-form ML scale for its shape.
        let q_new = quadratic_rows(&c_new, SpdMatrix::factorize(&new_sigma)?.inverse());
        new_sigma *= ml_scale(&q_new, b, m)?;
        let ds = (&new_sigma - &sigma).norm() / sigma.norm();
        let dm = (&new_mu - &mu).norm() / (1.0 + mu.norm());
        sigma = new_sigma;
        mu = new_mu;
        iterations += 1;
        if ds.max(dm) <= tol {
            converged = true;
            break;
        }
    }
    let params = MggdParams::new(mu, SpdMatrix::factorize(&sigma)?, beta)?;
    let log_likelihood = mggd_log_likelihood(x, &params)?;
    Ok(MggdMlFit {
        params,
        log_likelihood,
        iterations,
        converged,
    })
}

/// Factor `s` maximising the likelihood of `sΣ` given the radii `Q` under `Σ`:
/// `s^β = β·mean(Q^β)/m`, evaluated in log space.
pub fn ml_scale(q: &[f64], beta: f64, m: usize) -> Result<f64> {
    let logs: Vec<f64> = q.iter().filter(|&&v| v > 0.0).map(|v| beta * v.ln()).collect();
    if logs.is_empty() {
        return Err(GofError::DegenerateRadii);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let log_mean = lse - (q.len() as f64).ln();
    let s = ((beta / m as f64).ln() + log_mean) / beta;
    let s = s.exp();
    if !s.is_finite() || s <= 0.0 {
        return Err(GofError::DegenerateRadii);
    }
    Ok(s)
}

/// `Σᵢ log f(xᵢ)`.
pub fn mggd_log_likelihood(x: &Sample, params: &MggdParams) -> Result<f64> {
    let radii = mahalanobis_radii(x, params.mu(), params.sigma())?;
    let b = params.beta().get();
    let c = params.log_normalizer();
    Ok(radii.iter().map(|q| c - 0.5 * q.powf(b)).sum())
}
