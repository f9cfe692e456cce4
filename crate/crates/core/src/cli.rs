//! Command-line interface: `gen-data`, `unlearn`, `fit` and `bench`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 degenerate deletion.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{run_bench, BenchConfig};
use crate::data::{gen_synthetic_sparse, load_numeric_csv, write_numeric_csv};
use crate::error::Error;
use crate::fit::{run_fit_suite_with_workers, FitTrialConfig, FIT_LAMBDA};
use crate::leverage::HatState;
use crate::model::{DeletionRequest, DEFAULT_LAMBDA};
use crate::numerics::distance;
use crate::unlearn::{parse_methods, run_method, Method, MethodOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

/// Seed fallback when `--seed` is absent.
pub const SEED_ENV: &str = "UNLEARN_SEED";

#[derive(Debug, Parser)]
#[command(name = "projres", version, about = "Projection-residual unlearning for ridge models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic sparse dataset as numeric CSV.
    GenData(GenDataArgs),
    /// Delete rows from a dataset with one or more unlearning methods.
    Unlearn(UnlearnArgs),
    /// Run the Feature Injection Test suite.
    Fit(FitArgs),
    /// Time methods across dataset sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Probability that an entry is nonzero, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UnlearnArgs {
    /// Numeric CSV; the last column is the label.
    #[arg(long)]
    pub data: PathBuf,
    /// The first CSV row is a header.
    #[arg(long)]
    pub header: bool,
    /// Comma-separated row indices to delete (0-based).
    #[arg(long, conflicts_with = "delete_random", required_unless_present = "delete_random")]
    pub delete: Option<String>,
    /// Delete this many rows chosen uniformly at random from --seed.
    #[arg(long)]
    pub delete_random: Option<usize>,
    /// retrain, newton, influence, gradient, residual, or all (comma-separated).
    #[arg(long, default_value = "all")]
    pub method: String,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Gradient-baseline step size (default 1/‖Σ x_i x_iᵀ‖).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Rounds of the residual update.
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Include updated parameter vectors in the JSON output.
    #[arg(long)]
    pub with_theta: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.25)]
    pub p: f64,
    #[arg(long, default_value_t = FIT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "retrain,influence,residual")]
    pub methods: String,
    /// Multiplier on the injected column.
    #[arg(long, default_value_t = 1.0)]
    pub signal_scale: f64,
    /// Keep real-valued labels instead of their signs.
    #[arg(long)]
    pub regression_labels: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1)]
    pub parallel_trials: usize,
    /// Write zero for every timing field.
    #[arg(long)]
    pub omit_timings: bool,
    /// Output prefix; writes <out>.csv and <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated dataset sizes.
    #[arg(long, default_value = "1000,10000")]
    pub n_sweep: String,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0.25)]
    pub p: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value = "all")]
    pub methods: String,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Add precomputation time to the reported times.
    #[arg(long)]
    pub include_precompute: bool,
    /// Output prefix; writes <out>.csv and <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::InvalidDeletion(_) => EXIT_USAGE,
            Error::DegenerateDeletion(_) | Error::Singular { .. } => EXIT_DEGENERATE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// human or JSON output to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::GenData(a) => cmd_gen_data(&a, out),
        Command::Unlearn(a) => cmd_unlearn(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn cmd_gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.p > 0.0 && a.p <= 1.0) {
        return Err(usage(format!("--p must lie in (0, 1], got {}", a.p)));
    }
    let data = gen_synthetic_sparse(a.n, a.d, a.p, a.seed)?;
    let mut w = create(&a.out)?;
    write_numeric_csv(&data, &mut w)?;
    w.flush()?;
    writeln!(out, "wrote {} rows x {} features + label to {}", a.n, a.d, a.out.display())?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct UnlearnRow {
    pub method: Method,
    pub theta_delta_norm: f64,
    pub wall_time_ms: f64,
    pub distance_to_retrain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct UnlearnReport {
    pub command: &'static str,
    pub version: &'static str,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub deleted: Vec<usize>,
    pub precompute_ms: f64,
    pub results: Vec<UnlearnRow>,
}

fn parse_indices(list: &str) -> Result<Vec<usize>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| usage(format!("bad row index '{s}'"))))
        .collect()
}

pub fn cmd_unlearn(a: &UnlearnArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let methods = parse_methods(&a.method)?;
    let data = load_numeric_csv(&a.data, a.header)?;
    let n = data.len();
    let indices = match (&a.delete, a.delete_random) {
        (Some(list), _) => parse_indices(list)?,
        (None, Some(k)) => {
            if k == 0 || k >= n {
                return Err(usage(format!("--delete-random must lie in [1, {n}), got {k}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            idx
        }
        (None, None) => return Err(usage("one of --delete or --delete-random is required")),
    };
    if indices.is_empty() {
        return Err(usage("no rows to delete"));
    }
    let req = DeletionRequest::new(indices, n)?;
    let opts = MethodOptions {
        alpha: a.alpha,
        rounds: a.rounds,
    };

    let start = Instant::now();
    let hat = HatState::new(&data, a.lambda)?;
    let precompute_ms = start.elapsed().as_secs_f64() * 1e3;
    let theta_full = hat.model().theta.clone();

    let mut results = Vec::with_capacity(methods.len());
    for &m in &methods {
        results.push(run_method(m, &data, &req, &hat, &opts)?);
    }
    // distances are computed after every timed run
    let reference = match results.iter().find(|r| r.method == Method::Retrain) {
        Some(r) => r.theta.clone(),
        None => run_method(Method::Retrain, &data, &req, &hat, &opts)?.theta,
    };
    let rows: Vec<UnlearnRow> = results
        .into_iter()
        .map(|r| {
            let r = r.with_distance_to(&reference);
            UnlearnRow {
                method: r.method,
                theta_delta_norm: distance(&r.theta, &theta_full),
                wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
                distance_to_retrain: r.distance_to_retrain,
                theta: a.with_theta.then_some(r.theta),
            }
        })
        .collect();
    let report = UnlearnReport {
        command: "unlearn",
        version: env!("CARGO_PKG_VERSION"),
        n,
        d: data.dim(),
        k: req.len(),
        lambda: a.lambda,
        seed: a.seed,
        deleted: req.indices().to_vec(),
        precompute_ms,
        results: rows,
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &report).map_err(Error::from)?;
        writeln!(out)?;
    } else {
        writeln!(
            out,
            "n={} d={} k={} lambda={} precompute={:.3} ms",
            report.n, report.d, report.k, report.lambda, report.precompute_ms
        )?;
        writeln!(out, "{:<10} {:>14} {:>12} {:>18}", "method", "|dtheta|", "time_ms", "dist_to_retrain")?;
        for r in &report.results {
            writeln!(
                out,
                "{:<10} {:>14.6e} {:>12.4} {:>18.6e}",
                r.method.name(),
                r.theta_delta_norm,
                r.wall_time_ms,
                r.distance_to_retrain.unwrap_or(f64::NAN)
            )?;
        }
    }
    Ok(())
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = FitTrialConfig {
        n: a.n,
        d: a.d,
        k: a.k,
        p: a.p,
        lambda: a.lambda,
        seed: a.seed,
        methods: parse_methods(&a.methods)?,
        signal_scale: a.signal_scale,
        binarize: !a.regression_labels,
        options: MethodOptions {
            alpha: a.alpha,
            rounds: 1,
        },
    };
    config.validate()?;
    let mut report = run_fit_suite_with_workers(&config, a.trials, a.parallel_trials.max(1))?;
    if a.omit_timings {
        report = report.without_timings();
    }
    let mut csv = create(&with_ext(&a.out, "csv"))?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    let mut json = create(&with_ext(&a.out, "json"))?;
    serde_json::to_writer_pretty(&mut json, &report).map_err(Error::from)?;
    writeln!(json)?;
    json.flush()?;

    writeln!(
        out,
        "FIT n={} d={} k={} p={} lambda={} trials={} baseline median={:.4e}",
        a.n, a.d, a.k, a.p, a.lambda, report.trials, report.baseline_median
    )?;
    writeln!(out, "{:<10} {:>12} {:>12} {:>12} {:>7}", "method", "mean_fit", "median_fit", "mean_ratio", "failed")?;
    for s in &report.methods {
        writeln!(
            out,
            "{:<10} {:>12.4e} {:>12.4e} {:>12.4e} {:>7}",
            s.method.name(),
            s.mean_fit,
            s.median_fit,
            s.mean_ratio,
            s.failed
        )?;
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let n_sweep = parse_indices(&a.n_sweep)?;
    let config = BenchConfig {
        n_sweep,
        d: a.d,
        k: a.k,
        p: a.p,
        lambda: a.lambda,
        methods: parse_methods(&a.methods)?,
        reps: a.reps,
        seed: a.seed,
        include_precompute: a.include_precompute,
        options: MethodOptions::default(),
    };
    let report = run_bench(&config)?;
    let mut csv = create(&with_ext(&a.out, "csv"))?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    let mut json = create(&with_ext(&a.out, "json"))?;
    serde_json::to_writer_pretty(&mut json, &report).map_err(Error::from)?;
    writeln!(json)?;
    json.flush()?;
    report.write_csv(&mut *out)?;
    Ok(())
}
