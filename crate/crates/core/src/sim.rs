//! Monte Carlo driver for empirical size, power, shape sensitivity and
//! scale robustness, plus p-value ECDF output.
//!
//! Every trial draws its data and its bootstrap seed from streams keyed by
//! `(base seed, m, data law, trial)`. The scatter model is not part of the
//! key, so scatter model `A` reproduces the plain size and power runs, and
//! results do not depend on the thread count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GofError, Result};
use crate::estimation::{ShapeMode, TylerConfig};
use crate::gof::{decide, run_joint, run_test, TestConfig};
use crate::matrix::SpdMatrix;
use crate::mggd::{sample_multivariate_t, MggdParams, ShapeParam};
use crate::rng::{derive_seed, stream};
use crate::stats::ks_distance_to;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScatterModel {
    /// Identity.
    A,
    /// Diagonal, linearly spaced from 1 to 5.
    B,
    /// Diagonal, linearly spaced from 1 to 20.
    C,
}

impl ScatterModel {
    pub fn diagonal(self, m: usize) -> Vec<f64> {
        let top = match self {
            ScatterModel::A => return vec![1.0; m],
            ScatterModel::B => 5.0,
            ScatterModel::C => 20.0,
        };
        if m == 1 {
            return vec![1.0];
        }
        (0..m).map(|i| 1.0 + (top - 1.0) * i as f64 / (m - 1) as f64).collect()
    }
}

impl fmt::Display for ScatterModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Law of the simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alternative {
    /// The null law `MGGD(μ, Σ, β₀)`.
    #[default]
    Null,
    /// Multivariate t with `nu` degrees of freedom.
    T { nu: f64 },
    /// MGGD with another shape exponent.
    Mggd { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Size,
    Power,
    Sensitivity,
    ScaleRobustness,
}

/// Shape handling of the tested null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NullShape {
    /// `β` estimated from the data (composite MGGD null).
    #[default]
    Estimate,
    /// `β` held at `beta0`.
    Fixed,
}

fn default_scatter_models() -> Vec<ScatterModel> {
    vec![ScatterModel::A, ScatterModel::B, ScatterModel::C]
}

fn default_true() -> bool {
    true
}

fn default_scatter() -> ScatterModel {
    ScatterModel::A
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub n: usize,
    pub m: Vec<usize>,
    pub beta0: f64,
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub n_mc: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_scatter")]
    pub scatter: ScatterModel,
    #[serde(default)]
    pub alternative: Alternative,
    /// Shape exponents for the sensitivity curve.
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    #[serde(default = "default_scatter_models")]
    pub scatter_models: Vec<ScatterModel>,
    #[serde(default)]
    pub null: NullShape,
    #[serde(default)]
    pub rho: Option<f64>,
    /// Also run the energy competitor on the same replicates.
    #[serde(default = "default_true")]
    pub energy: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| GofError::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| GofError::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GofError::InvalidParameter(msg));
        if self.n < 10 {
            return bad(format!("n must be at least 10, got {}", self.n));
        }
        if self.m.is_empty() || self.m.contains(&0) {
            return bad("m list must be non-empty with positive entries".into());
        }
        if self.bootstrap_b == 0 || self.n_mc == 0 {
            return bad("bootstrap_b and n_mc must be at least 1".into());
        }
        ShapeParam::new(self.beta0)?;
        for &b in &self.beta_grid {
            ShapeParam::new(b)?;
        }
        match self.alternative {
            Alternative::T { nu } if !(nu > 0.0) => return bad(format!("nu must be positive, got {nu}")),
            Alternative::Mggd { beta } => {
                ShapeParam::new(beta)?;
            }
            _ => {}
        }
        if self.kind == ExperimentKind::ScaleRobustness && self.scatter_models.is_empty() {
            return bad("scale_robustness needs scatter_models".into());
        }
        self.test_config(0, NullShape::Estimate).validate()
    }

    fn test_config(&self, seed: u64, null: NullShape) -> TestConfig {
        let mut cfg = TestConfig::new(self.alpha, self.bootstrap_b, seed);
        if let Some(rho) = self.rho {
            cfg = cfg.with_tyler(TylerConfig::with_rho(rho));
        }
        match null {
            NullShape::Estimate => cfg,
            NullShape::Fixed => cfg.with_shape(ShapeMode::Fixed(ShapeParam::new(self.beta0).expect("validated"))),
        }
    }

    /// The config with execution-only settings cleared. Results do not
    /// depend on the thread count, so it is left out of hashes and manifests.
    pub fn canonical(&self) -> Self {
        Self {
            threads: 0,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(&self.canonical()).expect("config serialises");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DataLaw {
    Mggd(f64),
    T(f64),
}

impl DataLaw {
    fn key(self) -> [u64; 2] {
        match self {
            DataLaw::Mggd(b) => [1, b.to_bits()],
            DataLaw::T(nu) => [2, nu.to_bits()],
        }
    }

    fn label(self) -> String {
        match self {
            DataLaw::Mggd(b) => format!("mggd(beta={b})"),
            DataLaw::T(nu) => format!("t(nu={nu})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub method: String,
    pub m: usize,
    pub rejection_pct: f64,
    pub mc_se: f64,
    pub scenario: String,
    pub n_trials: usize,
    pub failed: usize,
}

impl RejectionRow {
    fn new(method: &str, m: usize, scenario: &str, rejections: usize, n_trials: usize, failed: usize) -> Self {
        let p = if n_trials == 0 { f64::NAN } else { rejections as f64 / n_trials as f64 };
        Self {
            method: method.into(),
            m,
            rejection_pct: 100.0 * p,
            mc_se: 100.0 * (p * (1.0 - p) / n_trials as f64).sqrt(),
            scenario: scenario.into(),
            n_trials,
            failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn get(&self, method: &str, m: usize, scenario: &str) -> Option<&RejectionRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.m == m && r.scenario == scenario)
    }

    /// Rows for one method and dimension, in insertion order.
    pub fn curve(&self, method: &str, m: usize) -> Vec<&RejectionRow> {
        self.rows.iter().filter(|r| r.method == method && r.m == m).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| GofError::InvalidParameter(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| GofError::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Null-run p-values of one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSet {
    pub method: String,
    pub m: usize,
    pub scenario: String,
    pub pvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub table: RejectionTable,
    pub pvalues: Vec<PValueSet>,
}

struct CellSpec {
    m: usize,
    law: DataLaw,
    scatter: ScatterModel,
    null: NullShape,
    scenario: String,
}

fn simulate_data(cfg: &ExperimentConfig, cell: &CellSpec, trial: u64) -> Result<crate::sample::Sample> {
    let m = cell.m;
    let [k0, k1] = cell.law.key();
    let mut rng = stream(cfg.seed, &[10, m as u64, k0, k1, trial]);
    let mu = DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0));
    let sigma = SpdMatrix::from_diagonal(&cell.scatter.diagonal(m))?;
    match cell.law {
        DataLaw::Mggd(b) => MggdParams::new(mu, sigma, ShapeParam::new(b)?)?.sample(cfg.n, &mut rng),
        DataLaw::T(nu) => sample_multivariate_t(&mu, &sigma, nu, cfg.n, &mut rng),
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: &CellSpec, out: &mut ExperimentOutput) -> Result<()> {
    let [k0, k1] = cell.law.key();
    let results: Vec<Option<(f64, Option<f64>)>> = (0..cfg.n_mc as u64)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(cfg.seed, &[20, cell.m as u64, k0, k1, trial]);
            let tc = cfg.test_config(seed, cell.null);
            let outcome = simulate_data(cfg, cell, trial).and_then(|x| {
                if cfg.energy {
                    run_joint(&x, &tc).map(|r| (r.nn.p_value, Some(r.energy.p_value)))
                } else {
                    run_test(&x, &tc).map(|r| (r.p_value, None))
                }
            });
            match outcome {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("trial {trial} (m={}, {}) failed: {e}", cell.m, cell.scenario);
                    None
                }
            }
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    let ok: Vec<(f64, Option<f64>)> = results.into_iter().flatten().collect();
    let nn_p: Vec<f64> = ok.iter().map(|r| r.0).collect();
    let rej = nn_p.iter().filter(|&&p| decide(p, cfg.alpha)).count();
    out.table
        .rows
        .push(RejectionRow::new("nn", cell.m, &cell.scenario, rej, nn_p.len(), failed));
    out.pvalues.push(PValueSet {
        method: "nn".into(),
        m: cell.m,
        scenario: cell.scenario.clone(),
        pvalues: nn_p,
    });
    if cfg.energy {
        let e_p: Vec<f64> = ok.iter().map(|r| r.1.expect("energy requested")).collect();
        let rej = e_p.iter().filter(|&&p| decide(p, cfg.alpha)).count();
        out.table
            .rows
            .push(RejectionRow::new("energy", cell.m, &cell.scenario, rej, e_p.len(), failed));
        out.pvalues.push(PValueSet {
            method: "energy".into(),
            m: cell.m,
            scenario: cell.scenario.clone(),
            pvalues: e_p,
        });
    }
    log::info!("finished m={} {} ({} trials, {failed} failed)", cell.m, cell.scenario, cfg.n_mc);
    Ok(())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| GofError::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn alternative_law(cfg: &ExperimentConfig) -> DataLaw {
    match cfg.alternative {
        Alternative::Null => DataLaw::Mggd(cfg.beta0),
        Alternative::T { nu } => DataLaw::T(nu),
        Alternative::Mggd { beta } => DataLaw::Mggd(beta),
    }
}

fn run_cells(cfg: &ExperimentConfig, cells: Vec<CellSpec>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    in_pool(cfg.threads, || {
        let mut out = ExperimentOutput::default();
        for cell in &cells {
            run_cell(cfg, cell, &mut out)?;
        }
        Ok(out)
    })?
}

/// Rejection rates under `MGGD(μ, Σ, β₀)` data.
pub fn run_size_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let law = DataLaw::Mggd(cfg.beta0);
    let cells = cfg
        .m
        .iter()
        .map(|&m| CellSpec {
            m,
            law,
            scatter: cfg.scatter,
            null: cfg.null,
            scenario: format!("{};{}", law.label(), cfg.scatter),
        })
        .collect();
    run_cells(cfg, cells)
}

/// Rejection rates under the configured alternative.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.alternative == Alternative::Null {
        return Err(GofError::InvalidParameter("power experiment needs an alternative".into()));
    }
    let law = alternative_law(cfg);
    let cells = cfg
        .m
        .iter()
        .map(|&m| CellSpec {
            m,
            law,
            scatter: cfg.scatter,
            null: cfg.null,
            scenario: format!("{};{}", law.label(), cfg.scatter),
        })
        .collect();
    run_cells(cfg, cells)
}

/// Power of the fixed-`β₀` null against `MGGD(β)` data over a grid of `β`.
/// Scenario labels are `beta=<β>`.
pub fn run_sensitivity(cfg: &ExperimentConfig, beta_grid: &[f64]) -> Result<ExperimentOutput> {
    if beta_grid.is_empty() {
        return Err(GofError::InvalidParameter("empty beta grid".into()));
    }
    let mut cells = Vec::new();
    for &m in &cfg.m {
        for &b in beta_grid {
            ShapeParam::new(b)?;
            cells.push(CellSpec {
                m,
                law: DataLaw::Mggd(b),
                scatter: cfg.scatter,
                null: NullShape::Fixed,
                scenario: format!("beta={b}"),
            });
        }
    }
    run_cells(cfg, cells)
}

/// Size and power under each scatter model. Scenario labels are
/// `size;<model>` and `power;<model>`; power uses the configured t
/// alternative, or `t₃` when none is set.
pub fn run_scale_robustness(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let power_law = match cfg.alternative {
        Alternative::Null => DataLaw::T(3.0),
        _ => alternative_law(cfg),
    };
    let mut cells = Vec::new();
    for &m in &cfg.m {
        for &model in &cfg.scatter_models {
            cells.push(CellSpec {
                m,
                law: DataLaw::Mggd(cfg.beta0),
                scatter: model,
                null: cfg.null,
                scenario: format!("size;{model}"),
            });
            cells.push(CellSpec {
                m,
                law: power_law,
                scatter: model,
                null: cfg.null,
                scenario: format!("power;{model}"),
            });
        }
    }
    run_cells(cfg, cells)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Size => run_size_experiment(cfg),
        ExperimentKind::Power => run_power_experiment(cfg),
        ExperimentKind::Sensitivity => run_sensitivity(cfg, &cfg.beta_grid),
        ExperimentKind::ScaleRobustness => run_scale_robustness(cfg),
    }
}

/// Kolmogorov distance between the ECDF of `pvalues` and the uniform CDF.
pub fn uniform_ks_distance(pvalues: &[f64]) -> f64 {
    let mut ps = pvalues.to_vec();
    ks_distance_to(&mut ps, |p| p.clamp(0.0, 1.0))
}

/// ECDF as CSV text: one `p,ecdf` row per distinct value, sorted.
pub fn ecdf_csv(pvalues: &[f64]) -> String {
    let mut ps = pvalues.to_vec();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let mut out = String::from("p,ecdf\n");
    for (i, &p) in ps.iter().enumerate() {
        if i + 1 < ps.len() && ps[i + 1] == p {
            continue;
        }
        out.push_str(&format!("{p},{}\n", (i + 1) as f64 / n));
    }
    out
}

/// Write the ECDF of `pvalues` to `path` and return its Kolmogorov
/// distance to the uniform law.
pub fn emit_pvalue_ecdf(pvalues: &[f64], path: &Path) -> Result<f64> {
    fs::write(path, ecdf_csv(pvalues)).map_err(|e| io_error(path, e))?;
    Ok(uniform_ks_distance(pvalues))
}

fn io_error(path: &Path, e: std::io::Error) -> GofError {
    GofError::InvalidParameter(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfSummary {
    pub method: String,
    pub m: usize,
    pub scenario: String,
    pub file: String,
    pub ks_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub seed: u64,
    pub config_sha256: String,
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub table: String,
    pub ecdfs: Vec<EcdfSummary>,
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Write the rejection table, one ECDF per cell and `manifest.json`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let table_name = format!("{}_table.csv", file_safe(&cfg.name));
    let table_path = dir.join(&table_name);
    fs::write(&table_path, out.table.to_csv()?).map_err(|e| io_error(&table_path, e))?;
    let mut ecdfs = Vec::new();
    for set in &out.pvalues {
        let file = format!(
            "{}_ecdf_{}_m{}_{}.csv",
            file_safe(&cfg.name),
            set.method,
            set.m,
            file_safe(&set.scenario)
        );
        let path: PathBuf = dir.join(&file);
        let ks = emit_pvalue_ecdf(&set.pvalues, &path)?;
        ecdfs.push(EcdfSummary {
            method: set.method.clone(),
            m: set.m,
            scenario: set.scenario.clone(),
            file,
            ks_distance: ks,
        });
    }
    let manifest = RunManifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.canonical(),
        table: table_name,
        ecdfs,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            name: "tiny".into(),
            kind,
            n: 20,
            m: vec![3],
            beta0: 0.5,
            alpha: 0.05,
            bootstrap_b: 10,
            n_mc: 8,
            seed: 11,
            threads: 0,
            scatter: ScatterModel::A,
            alternative: Alternative::Null,
            beta_grid: vec![],
            scatter_models: default_scatter_models(),
            null: NullShape::Estimate,
            rho: None,
            energy: true,
        }
    }

    #[test]
    fn scatter_diagonals() {
        assert_eq!(ScatterModel::A.diagonal(3), vec![1.0; 3]);
        assert_eq!(ScatterModel::B.diagonal(5), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = ScatterModel::C.diagonal(20);
        assert_eq!(c[0], 1.0);
        assert_eq!(c[19], 20.0);
        assert_eq!(ScatterModel::C.diagonal(1), vec![1.0]);
    }

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
            name = "size-desk"
            kind = "size"
            n = 50
            m = [20, 50]
            beta0 = 0.5
            alpha = 0.05
            bootstrap_b = 100
            n_mc = 200
            seed = 7
            alternative = { kind = "t", nu = 3.0 }
            scatter = "C"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.m, vec![20, 50]);
        assert_eq!(cfg.alternative, Alternative::T { nu: 3.0 });
        assert_eq!(cfg.scatter, ScatterModel::C);
        assert!(cfg.energy);
        assert!(ExperimentConfig::from_toml_str(&text.replace("n = 50", "n = 5")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{text}\nbogus = 1")).is_err());
    }

    #[test]
    fn mc_standard_error() {
        let r = RejectionRow::new("nn", 5, "x", 10, 200, 0);
        assert_eq!(r.rejection_pct, 5.0);
        assert!((r.mc_se - 100.0 * (0.05f64 * 0.95 / 200.0).sqrt()).abs() < 1e-12);
        let all = RejectionRow::new("nn", 5, "x", 200, 200, 0);
        assert_eq!((all.rejection_pct, all.mc_se), (100.0, 0.0));
    }

    #[test]
    fn alpha_one_always_rejects() {
        let mut cfg = tiny(ExperimentKind::Size);
        cfg.alpha = 1.0;
        let out = run_size_experiment(&cfg).unwrap();
        for row in &out.table.rows {
            assert_eq!(row.rejection_pct, 100.0);
        }
    }

    #[test]
    fn csv_header_and_determinism() {
        let cfg = tiny(ExperimentKind::Size);
        let a = run_experiment(&cfg).unwrap();
        let mut one = cfg.clone();
        one.threads = 1;
        let b = run_experiment(&one).unwrap();
        assert_eq!(a.table.to_csv().unwrap(), b.table.to_csv().unwrap());
        assert_eq!(a.pvalues, b.pvalues);
        let csv = a.table.to_csv().unwrap();
        assert!(csv.starts_with("method,m,rejection_pct,mc_se"));
        assert_eq!(a.table.rows.len(), 2);
    }

    #[test]
    fn model_a_matches_size_and_power_runs() {
        let mut cfg = tiny(ExperimentKind::ScaleRobustness);
        cfg.scatter_models = vec![ScatterModel::A];
        cfg.alternative = Alternative::T { nu: 3.0 };
        let robust = run_scale_robustness(&cfg).unwrap();
        let size = run_size_experiment(&cfg).unwrap();
        let power = run_power_experiment(&cfg).unwrap();
        let pv = |o: &ExperimentOutput, method: &str| {
            o.pvalues.iter().filter(|s| s.method == method).map(|s| s.pvalues.clone()).collect::<Vec<_>>()
        };
        let rb = pv(&robust, "nn");
        assert_eq!(rb[0], pv(&size, "nn")[0]);
        assert_eq!(rb[1], pv(&power, "nn")[0]);
    }

    #[test]
    fn single_point_sensitivity_grid() {
        let cfg = tiny(ExperimentKind::Sensitivity);
        let out = run_sensitivity(&cfg, &[0.5]).unwrap();
        assert_eq!(out.table.curve("nn", 3).len(), 1);
        assert!(run_sensitivity(&cfg, &[]).is_err());
    }

    #[test]
    fn ecdf_of_uniform_pvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1000;
        let ps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        assert!(uniform_ks_distance(&ps) < 1.36 / (n as f64).sqrt());
        let csv = ecdf_csv(&ps);
        assert_eq!(csv.lines().count(), n + 1);
    }

    #[test]
    fn ecdf_all_zero_is_a_single_step() {
        assert_eq!(ecdf_csv(&[0.0; 5]), "p,ecdf\n0,1\n");
        assert_eq!(uniform_ks_distance(&[0.0; 5]), 1.0);
    }

    #[test]
    fn outputs_are_written_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(ExperimentKind::Size);
        let out = run_experiment(&cfg).unwrap();
        let manifest = write_outputs(dir.path(), &cfg, &out).unwrap();
        assert_eq!(manifest.config_sha256.len(), 64);
        assert_eq!(manifest.ecdfs.len(), 2);
        for e in &manifest.ecdfs {
            assert!(dir.path().join(&e.file).exists());
        }
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, manifest);
    }
}
