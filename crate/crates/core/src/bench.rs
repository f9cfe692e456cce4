//! Timing benchmarks across dataset sizes.
//!
//! Precomputation (θ^full, the hat state and residuals) happens before the
//! timed region. Each reported time is a median over repetitions; a
//! repetition of a fast method is the mean over an inner batch long enough to
//! rise above timer resolution.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::gen_synthetic_sparse;
use crate::error::{Error, Result};
use crate::fit::{fit_score, inject_feature, median};
use crate::leverage::HatState;
use crate::model::{Dataset, DeletionRequest};
use crate::unlearn::{run_method, Method, MethodOptions, UnlearnResult};

/// Minimum duration of one timed sample.
const MIN_SAMPLE: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_sweep: Vec<usize>,
    pub d: usize,
    pub k: usize,
    pub p: f64,
    pub lambda: f64,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    /// Add precomputation time to every method that needs it.
    pub include_precompute: bool,
    pub options: MethodOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_sweep: vec![1_000, 10_000],
            d: 100,
            k: 10,
            p: 0.25,
            lambda: crate::model::DEFAULT_LAMBDA,
            methods: Method::ALL.to_vec(),
            reps: 5,
            seed: 0,
            include_precompute: false,
            options: MethodOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub median_time_ms: f64,
    pub min_time_ms: f64,
    pub max_time_ms: f64,
    pub precompute_ms: f64,
    pub distance_to_retrain: Option<f64>,
    pub fit_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub reps: usize,
    pub include_precompute: bool,
    pub version: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub const CSV_HEADER: &'static str =
        "method,n,d,k,median_time_ms,min_time_ms,max_time_ms,precompute_ms,distance_to_retrain,fit_score";

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.3},{},{}",
                r.method,
                r.n,
                r.d,
                r.k,
                r.median_time_ms,
                r.min_time_ms,
                r.max_time_ms,
                r.precompute_ms,
                opt(r.distance_to_retrain),
                opt(r.fit_score)
            )?;
        }
        Ok(())
    }

    pub fn rows_for(&self, m: Method) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(move |r| r.method == m)
    }
}

/// Timing samples for one method; each sample is the mean per-call wall time
/// of an inner batch.
#[derive(Debug, Clone)]
pub struct Timing {
    pub samples: Vec<Duration>,
    pub last: UnlearnResult,
}

impl Timing {
    pub fn median(&self) -> Duration {
        let secs: Vec<f64> = self.samples.iter().map(Duration::as_secs_f64).collect();
        Duration::from_secs_f64(median(&secs))
    }
}

/// Times `method` over `reps` samples, excluding anything precomputed in `hat`.
pub fn time_method(
    method: Method,
    data: &Dataset,
    req: &DeletionRequest,
    hat: &HatState,
    opts: &MethodOptions,
    reps: usize,
) -> Result<Timing> {
    if reps == 0 {
        return Err(Error::invalid("reps must be >= 1"));
    }
    // warm-up call doubles as batch calibration
    let first = run_method(method, data, req, hat, opts)?;
    let batch = if first.wall_time >= MIN_SAMPLE {
        1
    } else {
        let per = first.wall_time.as_secs_f64().max(1e-8);
        (MIN_SAMPLE.as_secs_f64() / per).ceil() as u32
    };
    let mut samples = Vec::with_capacity(reps);
    let mut last = first;
    for _ in 0..reps {
        let mut total = Duration::ZERO;
        for _ in 0..batch {
            last = run_method(method, data, req, hat, opts)?;
            total += last.wall_time;
        }
        samples.push(total / batch);
    }
    Ok(Timing { samples, last })
}

/// Synthetic instance for one sweep point: data with an injected feature on
/// the deletion group, and the group itself.
pub fn bench_instance(n: usize, d: usize, k: usize, p: f64, seed: u64) -> Result<(Dataset, DeletionRequest)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let base = gen_synthetic_sparse(n, d, p, rng.gen())?;
    let mut group = rand::seq::index::sample(&mut rng, n, k).into_vec();
    group.sort_unstable();
    let req = DeletionRequest::new(group, n)?;
    let data = inject_feature(&base, &req, 1.0)?;
    Ok((data, req))
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.n_sweep.is_empty() || config.methods.is_empty() {
        return Err(Error::invalid("need at least one n and one method"));
    }
    if config.reps == 0 {
        return Err(Error::invalid("reps must be >= 1"));
    }
    let mut rows = Vec::new();
    for &n in &config.n_sweep {
        if config.k == 0 || config.k >= n {
            return Err(Error::invalid(format!("need 1 <= k < n, got k={} n={n}", config.k)));
        }
        let (data, req) = bench_instance(n, config.d, config.k, config.p, config.seed)?;
        let start = Instant::now();
        let hat = HatState::new(&data, config.lambda)?;
        let precompute = start.elapsed();
        let injected = config.d;

        let reference = run_method(Method::Retrain, &data, &req, &hat, &config.options)?.theta;
        for &method in &config.methods {
            let timing = time_method(method, &data, &req, &hat, &config.options, config.reps)?;
            let extra = if config.include_precompute && method != Method::Retrain {
                precompute
            } else {
                Duration::ZERO
            };
            let to_ms = |d: Duration| (d + extra).as_secs_f64() * 1e3;
            let result = timing.last.clone().with_distance_to(&reference);
            rows.push(BenchRow {
                method,
                n,
                d: config.d,
                k: config.k,
                median_time_ms: to_ms(timing.median()),
                min_time_ms: to_ms(*timing.samples.iter().min().expect("reps >= 1")),
                max_time_ms: to_ms(*timing.samples.iter().max().expect("reps >= 1")),
                precompute_ms: precompute.as_secs_f64() * 1e3,
                distance_to_retrain: result.distance_to_retrain,
                fit_score: Some(fit_score(&result.theta, injected)?),
            });
        }
    }
    Ok(BenchReport {
        seed: config.seed,
        reps: config.reps,
        include_precompute: config.include_precompute,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_shape() {
        let cfg = BenchConfig {
            n_sweep: vec![60, 120],
            d: 8,
            k: 3,
            reps: 2,
            ..BenchConfig::default()
        };
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * Method::ALL.len());
        for r in report.rows_for(Method::Newton) {
            assert!(r.distance_to_retrain.unwrap() < 1e-8);
        }
        for r in report.rows_for(Method::Retrain) {
            assert_eq!(r.fit_score, Some(0.0));
            assert_eq!(r.distance_to_retrain, Some(0.0));
        }
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + report.rows.len());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = BenchConfig {
            n_sweep: vec![5],
            k: 5,
            ..BenchConfig::default()
        };
        assert!(run_bench(&cfg).is_err());
        assert!(run_bench(&BenchConfig {
            reps: 0,
            ..BenchConfig::default()
        })
        .is_err());
    }
}
