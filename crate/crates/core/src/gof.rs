//! Nearest-neighbour goodness-of-fit test for the composite MGGD null,
//! calibrated by a parametric bootstrap that refits every replicate.
//!
//! Steps: fit `(μ̂, Σ̂, β̂)`, whiten `Z = Σ̂^{-1/2}(X − μ̂)`, draw a reference
//! `Y ~ MGGD(0, I, β̂)` of the same size, count `T_obs`; then for each
//! replicate draw `X* ~ MGGD(μ̂, Σ̂, β̂)`, refit, whiten, draw `Y*` under `β̂*`
//! and count `T*`. The p-value is two-sided around `n/2`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_from_pairwise, energy_pvalue, EnergyStatResult};
use crate::error::{GofError, Result};
use crate::estimation::{fit_mggd, FitConfig, FitDiagnostics, FittedNull, ShapeMode, TylerConfig};
use crate::matrix::WhiteningMap;
use crate::mggd::{sample_standard, MggdParams, ShapeParam};
use crate::nn::{cross_edge_statistic, within_count_from_nn, Label, NnMethod, NnStatResult, PairwiseDistances};
use crate::rng::{stream, ChaCha8Rng};
use crate::sample::Sample;
use crate::tolerances::{MAX_FAILED_REPLICATE_FRACTION, MIN_FIT_N};

/// How the bootstrap p-value is formed from the replicate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PValueRule {
    /// `#{b : |T*_b − n/2| ≥ |T_obs − n/2|} / B`.
    #[default]
    Plain,
    /// `(1 + #{…}) / (B + 1)`; never exactly zero.
    PlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub fit: FitConfig,
    pub nn_method: NnMethod,
    pub pvalue_rule: PValueRule,
    /// Refit inside every replicate. Turning this off reuses the observed
    /// fit and is for debugging only; such runs do not hold their level.
    pub refit: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bootstrap_b: 200,
            seed: 0,
            fit: FitConfig::default(),
            nn_method: NnMethod::Auto,
            pvalue_rule: PValueRule::Plain,
            refit: true,
        }
    }
}

impl TestConfig {
    pub fn new(alpha: f64, bootstrap_b: usize, seed: u64) -> Self {
        Self {
            alpha,
            bootstrap_b,
            seed,
            ..Self::default()
        }
    }

    pub fn with_tyler(mut self, tyler: TylerConfig) -> Self {
        self.fit.tyler = tyler;
        self
    }

    pub fn with_shape(mut self, shape: ShapeMode) -> Self {
        self.fit.shape = shape;
        self
    }

    /// Multivariate normality: `β` pinned to one.
    pub fn gaussian_null(self) -> Self {
        self.with_shape(ShapeMode::Fixed(ShapeParam::new(1.0).expect("β = 1 is valid")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(GofError::InvalidParameter(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.bootstrap_b == 0 {
            return Err(GofError::InvalidParameter("bootstrap size must be at least 1".into()));
        }
        self.fit.tyler.validate()
    }
}

/// Serializable snapshot of the fitted null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSummary {
    pub mu: Vec<f64>,
    /// Row-major `m × m` scatter.
    pub sigma: Vec<f64>,
    pub beta: f64,
    pub diagnostics: FitDiagnostics,
}

impl FittedSummary {
    pub fn from_fit(fit: &FittedNull) -> Self {
        let s = fit.params.sigma().matrix();
        let m = s.nrows();
        Self {
            mu: fit.params.mu().as_slice().to_vec(),
            sigma: (0..m).flat_map(|i| (0..m).map(move |j| s[(i, j)])).collect(),
            beta: fit.params.beta().get(),
            diagnostics: fit.diagnostics.clone(),
        }
    }
}

impl PartialEq for FitDiagnostics {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub n: usize,
    pub m: usize,
    pub t_obs: usize,
    pub z_obs: f64,
    /// Replicate statistics in replicate order; failed replicates omitted.
    pub boot_stats: Vec<usize>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub pvalue_rule: PValueRule,
    pub fitted: FittedSummary,
    pub failed_replicates: usize,
    pub retried_replicates: usize,
    /// False when the bootstrap skipped refitting.
    pub conforming: bool,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

/// Both statistics calibrated on the same replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub nn: GofReport,
    pub energy: EnergyStatResult,
}

/// Reject when `p < α`. A level-one test rejects everything, including
/// `p = 1`.
pub fn decide(p_value: f64, alpha: f64) -> bool {
    alpha >= 1.0 || p_value < alpha
}

/// `#{b : |T*_b − n/2| ≥ |T_obs − n/2|} / B`, evaluated in integers.
pub fn bootstrap_pvalue(t_obs: usize, boot_stats: &[usize], n: usize) -> f64 {
    bootstrap_pvalue_with(t_obs, boot_stats, n, PValueRule::Plain)
}

pub fn bootstrap_pvalue_with(t_obs: usize, boot_stats: &[usize], n: usize, rule: PValueRule) -> f64 {
    assert!(!boot_stats.is_empty(), "bootstrap sample is empty");
    let dev = |t: usize| (2 * t as i64 - n as i64).abs();
    let obs = dev(t_obs);
    let hits = boot_stats.iter().filter(|&&t| dev(t) >= obs).count();
    match rule {
        PValueRule::Plain => hits as f64 / boot_stats.len() as f64,
        PValueRule::PlusOne => (hits + 1) as f64 / (boot_stats.len() + 1) as f64,
    }
}

/// Where the whitening and reference shape come from.
#[derive(Debug, Clone)]
enum NullSource {
    Fitted,
    /// True parameters substituted for every fit.
    Oracle(Box<MggdParams>),
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    t: usize,
    energy: Option<f64>,
}

fn statistics(z: &Sample, y: &Sample, method: NnMethod, with_energy: bool) -> Result<Stats> {
    if with_energy {
        let pooled = z.stack(y)?;
        let d = PairwiseDistances::new(&pooled);
        let mut labels = vec![Label::A; z.n()];
        labels.extend(std::iter::repeat_n(Label::B, y.n()));
        let t = within_count_from_nn(&d.nearest_neighbors(), &labels, Label::B);
        Ok(Stats {
            t,
            energy: Some(energy_from_pairwise(&d, z.n())),
        })
    } else {
        Ok(Stats {
            t: cross_edge_statistic(z, y, method)?.t_count,
            energy: None,
        })
    }
}

fn fit_for(x: &Sample, cfg: &TestConfig, source: &NullSource) -> Result<(WhiteningMap, ShapeParam, Option<FittedNull>)> {
    match source {
        NullSource::Fitted => {
            let fit = fit_mggd(x, &cfg.fit)?;
            Ok((fit.whitening.clone(), fit.params.beta(), Some(fit)))
        }
        NullSource::Oracle(p) => Ok((WhiteningMap::new(p.mu().clone(), p.sigma())?, p.beta(), None)),
    }
}

fn observed_path(
    x: &Sample,
    cfg: &TestConfig,
    source: &NullSource,
    with_energy: bool,
) -> Result<(Stats, MggdParams, WhiteningMap, FittedSummary)> {
    let (whitening, beta, fit) = fit_for(x, cfg, source)?;
    let z = whitening.whiten(x)?;
    let mut rng = stream(cfg.seed, &[0]);
    let y = sample_standard(x.m(), beta, x.n(), &mut rng)?;
    let stats = statistics(&z, &y, cfg.nn_method, with_energy)?;
    let (params, summary) = match (fit, source) {
        (Some(f), _) => (f.params.clone(), FittedSummary::from_fit(&f)),
        (None, NullSource::Oracle(p)) => ((**p).clone(), oracle_summary(p)),
        (None, NullSource::Fitted) => unreachable!(),
    };
    Ok((stats, params, whitening, summary))
}

fn oracle_summary(p: &MggdParams) -> FittedSummary {
    let s = p.sigma().matrix();
    let m = s.nrows();
    FittedSummary {
        mu: p.mu().as_slice().to_vec(),
        sigma: (0..m).flat_map(|i| (0..m).map(move |j| s[(i, j)])).collect(),
        beta: p.beta().get(),
        diagnostics: FitDiagnostics {
            median_iterations: 0,
            median_converged: true,
            rho: 0.0,
            tyler_iterations: 0,
            tyler_residual: 0.0,
            tyler_converged: true,
            dropped_rows: 0,
            beta_clamped: false,
            beta_refinement_change: 0.0,
            scale_factor: 1.0,
            spectrum: p.sigma().condition_diagnostics(),
        },
    }
}

fn one_replicate(
    rng: &mut ChaCha8Rng,
    n: usize,
    params: &MggdParams,
    obs_whitening: &WhiteningMap,
    cfg: &TestConfig,
    source: &NullSource,
    with_energy: bool,
) -> Result<Stats> {
    let x_star = params.sample(n, rng)?;
    let (whitening, beta) = if cfg.refit {
        let (w, b, _) = fit_for(&x_star, cfg, source)?;
        (w, b)
    } else {
        (obs_whitening.clone(), params.beta())
    };
    let z = whitening.whiten(&x_star)?;
    let y = sample_standard(params.dim(), beta, n, rng)?;
    statistics(&z, &y, cfg.nn_method, with_energy)
}

enum Outcome {
    Ok { stats: Stats, retried: bool },
    Failed(GofError),
}

fn run_replicates(
    n: usize,
    params: &MggdParams,
    whitening: &WhiteningMap,
    cfg: &TestConfig,
    source: &NullSource,
    with_energy: bool,
) -> Result<(Vec<Stats>, usize, usize)> {
    let outcomes: Vec<Outcome> = (0..cfg.bootstrap_b as u64)
        .into_par_iter()
        .map(|b| {
            let mut last = None;
            for attempt in 0..2u64 {
                let mut rng = stream(cfg.seed, &[1, b, attempt]);
                match one_replicate(&mut rng, n, params, whitening, cfg, source, with_energy) {
                    Ok(stats) => {
                        return Outcome::Ok {
                            stats,
                            retried: attempt > 0,
                        }
                    }
                    Err(e) => last = Some(e),
                }
            }
            Outcome::Failed(last.expect("two attempts made"))
        })
        .collect();

    let mut stats = Vec::with_capacity(outcomes.len());
    let mut retried = 0;
    let mut failed = 0;
    let mut last_err = None;
    for o in outcomes {
        match o {
            Outcome::Ok { stats: s, retried: r } => {
                retried += r as usize;
                stats.push(s);
            }
            Outcome::Failed(e) => {
                failed += 1;
                last_err = Some(e);
            }
        }
    }
    if failed > 0 {
        log::warn!("{failed} of {} bootstrap replicates failed", cfg.bootstrap_b);
    }
    if failed as f64 > MAX_FAILED_REPLICATE_FRACTION * cfg.bootstrap_b as f64 || stats.is_empty() {
        return Err(GofError::BootstrapFailure {
            failed,
            total: cfg.bootstrap_b,
            last: last_err.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    Ok((stats, failed, retried))
}

fn run(x: &Sample, cfg: &TestConfig, source: NullSource, with_energy: bool) -> Result<JointReport> {
    cfg.validate()?;
    let needed = MIN_FIT_N;
    if x.n() < needed {
        return Err(GofError::TooFewObservations { needed, got: x.n() });
    }
    let start = Instant::now();
    let (n, m) = (x.n(), x.m());
    let (obs, params, whitening, fitted) = observed_path(x, cfg, &source, with_energy)?;
    let (boot, failed, retried) = run_replicates(n, &params, &whitening, cfg, &source, with_energy)?;

    let boot_stats: Vec<usize> = boot.iter().map(|s| s.t).collect();
    let p_value = bootstrap_pvalue_with(obs.t, &boot_stats, n, cfg.pvalue_rule);
    let nn_stat = NnStatResult::new(obs.t, n);
    let nn = GofReport {
        n,
        m,
        t_obs: obs.t,
        z_obs: nn_stat.z_score,
        boot_stats,
        p_value,
        alpha: cfg.alpha,
        reject: decide(p_value, cfg.alpha),
        pvalue_rule: cfg.pvalue_rule,
        fitted,
        failed_replicates: failed,
        retried_replicates: retried,
        conforming: cfg.refit && matches!(source, NullSource::Fitted),
        elapsed_secs: start.elapsed().as_secs_f64(),
    };
    let energy = match obs.energy {
        Some(e_obs) => {
            let boot_e: Vec<f64> = boot.iter().map(|s| s.energy.expect("energy computed")).collect();
            let p = energy_pvalue(e_obs, &boot_e);
            EnergyStatResult {
                e_stat: e_obs,
                p_value: p,
                boot_stats: boot_e,
                reject: decide(p, cfg.alpha),
            }
        }
        None => EnergyStatResult {
            e_stat: f64::NAN,
            p_value: f64::NAN,
            boot_stats: Vec::new(),
            reject: false,
        },
    };
    Ok(JointReport { nn, energy })
}

/// The nearest-neighbour test with refitted bootstrap calibration.
pub fn run_test(x: &Sample, cfg: &TestConfig) -> Result<GofReport> {
    Ok(run(x, cfg, NullSource::Fitted, false)?.nn)
}

/// NN and energy tests on one shared set of replicates.
pub fn run_joint(x: &Sample, cfg: &TestConfig) -> Result<JointReport> {
    run(x, cfg, NullSource::Fitted, true)
}

/// Energy test on the same refitted-bootstrap scaffold; large values reject.
pub fn run_energy_gof(x: &Sample, cfg: &TestConfig) -> Result<EnergyStatResult> {
    Ok(run(x, cfg, NullSource::Fitted, true)?.energy)
}

/// Same procedure with the true parameters used in place of every fit.
pub fn run_test_oracle(x: &Sample, params: &MggdParams, cfg: &TestConfig) -> Result<GofReport> {
    if params.dim() != x.m() {
        return Err(GofError::DimensionMismatch {
            expected: params.dim(),
            found: x.m(),
        });
    }
    Ok(run(x, cfg, NullSource::Oracle(Box::new(params.clone())), false)?.nn)
}

/// Observed statistic with oracle whitening and an independent reference
/// draw, without any bootstrap.
pub fn oracle_statistic<R: rand::Rng + ?Sized>(x: &Sample, params: &MggdParams, method: NnMethod, rng: &mut R) -> Result<NnStatResult> {
    let z = WhiteningMap::new(params.mu().clone(), params.sigma())?.whiten(x)?;
    let y = sample_standard(x.m(), params.beta(), x.n(), rng)?;
    cross_edge_statistic(&z, &y, method)
}
