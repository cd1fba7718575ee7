//! `mggd-gof` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mggd_gof::compare::model_comparison;
use mggd_gof::data::{ingest_csv, mahalanobis_qq, qq_csv, Dataset, TestRunReport};
use mggd_gof::estimation::TylerConfig;
use mggd_gof::gof::{run_test, TestConfig};
use mggd_gof::sim::{ecdf_csv, run_experiment, uniform_ks_distance, write_outputs, ExperimentConfig};
use mggd_gof::GofError;

#[derive(Parser)]
#[command(name = "mggd-gof", version, about = "Nearest-neighbour goodness-of-fit test for the MGGD family")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the goodness-of-fit test on a CSV dataset.
    Test(TestArgs),
    /// Run a Monte Carlo experiment described by a TOML config.
    Simulate(SimulateArgs),
    /// Compare Normal, t and MGGD fits by AIC/BIC.
    CompareModels(DataArgs),
    /// Mahalanobis chi-square QQ data.
    Qq(DataArgs),
    /// ECDF of a column of p-values and its distance to the uniform law.
    Ecdf(EcdfArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated column names; all columns when omitted.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NullArg {
    /// Composite MGGD null with β estimated.
    Mggd,
    /// Multivariate normality (β fixed to 1).
    Gaussian,
}

impl NullArg {
    fn name(self) -> &'static str {
        match self {
            NullArg::Mggd => "mggd",
            NullArg::Gaussian => "gaussian",
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tyler shrinkage weight; data-driven default when omitted.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = NullArg::Mggd)]
    null: NullArg,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory; `results/<name>` when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EcdfArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column holding the p-values; the first column when omitted.
    #[arg(long)]
    column: Option<String>,
    /// Output CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn numeric(e: GofError) -> Failure {
    let code = match e {
        GofError::InvalidParameter(_) => 1,
        _ => 3,
    };
    Failure { code, error: e.into() }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CompareModels(a) => cmd_compare(a),
        Command::Qq(a) => cmd_qq(a),
        Command::Ecdf(a) => cmd_ecdf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn set_threads(threads: Option<usize>) -> CmdResult {
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage(anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(anyhow::anyhow!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn load(args: &DataArgs) -> Result<Dataset, Failure> {
    ingest_csv(&args.input, args.columns.as_deref())
        .with_context(|| format!("reading {}", args.input.display()))
        .map_err(data)
}

fn write(path: &Path, contents: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(data)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)
}

fn cmd_test(a: TestArgs) -> CmdResult {
    set_threads(a.threads)?;
    let mut cfg = TestConfig::new(a.alpha, a.bootstrap, a.seed);
    if let Some(rho) = a.rho {
        cfg = cfg.with_tyler(TylerConfig::with_rho(rho));
    }
    if a.null == NullArg::Gaussian {
        cfg = cfg.gaussian_null();
    }
    cfg.validate().map_err(numeric)?;
    let ds = load(&a.data)?;
    log::info!("testing {} rows, {} columns", ds.n(), ds.m());
    let report = run_test(&ds.data, &cfg).map_err(numeric)?;
    log::info!("test finished in {:.2}s", report.elapsed_secs);
    let run = TestRunReport::new(&ds, a.null.name(), a.seed, a.bootstrap, report);
    let text = run.render_text();
    print!("{text}");
    if let Some(dir) = &a.data.out {
        write(&dir.join("test_report.json"), &run.to_json())?;
        write(&dir.join("test_report.txt"), &text)?;
        let mut hist = String::from("t,count\n");
        for b in &run.histogram {
            hist.push_str(&format!("{},{}\n", b.t, b.count));
        }
        write(&dir.join("bootstrap_histogram.csv"), &hist)?;
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut cfg = ExperimentConfig::from_path(&a.config).map_err(data)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    cfg.validate().map_err(numeric)?;
    let dir = a.out.unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
    log::info!("running experiment {} into {}", cfg.name, dir.display());
    let out = run_experiment(&cfg).map_err(numeric)?;
    let manifest = write_outputs(&dir, &cfg, &out).map_err(data)?;
    print!("{}", out.table.to_csv().map_err(numeric)?);
    eprintln!("wrote {} and {} ECDF files to {}", manifest.table, manifest.ecdfs.len(), dir.display());
    Ok(())
}

fn cmd_compare(a: DataArgs) -> CmdResult {
    let ds = load(&a)?;
    let cmp = model_comparison(&ds.data).map_err(numeric)?;
    let text = cmp.render_text();
    print!("{text}");
    if let Some(dir) = &a.out {
        let json = serde_json::to_string_pretty(&cmp).expect("comparison serialises") + "\n";
        write(&dir.join("model_comparison.json"), &json)?;
        write(&dir.join("model_comparison.txt"), &text)?;
        write(&dir.join("beta_profile.csv"), &cmp.profile_csv())?;
    }
    Ok(())
}

fn cmd_qq(a: DataArgs) -> CmdResult {
    let ds = load(&a)?;
    let csv = qq_csv(&mahalanobis_qq(&ds.data).map_err(numeric)?);
    match &a.out {
        Some(dir) => write(&dir.join("mahalanobis_qq.csv"), &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_ecdf(a: EcdfArgs) -> CmdResult {
    let columns = a.column.clone().map(|c| vec![c]);
    let ds = ingest_csv(&a.input, columns.as_deref())
        .with_context(|| format!("reading {}", a.input.display()))
        .map_err(data)?;
    let pvalues: Vec<f64> = ds.data.rows().map(|r| r[0]).collect();
    let csv = ecdf_csv(&pvalues);
    match &a.out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!("KS distance to uniform: {}", uniform_ks_distance(&pvalues));
    Ok(())
}
