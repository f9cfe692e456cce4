//! Feature Injection Test.
//!
//! A synthetic feature is added that is zero everywhere except on a target
//! group, where it equals the label. The full model puts weight on it; after
//! deleting the group an exact retrain puts exactly zero weight on it (the
//! column is all zero in the retained rows and ridge shrinks it to 0). The
//! absolute weight a method leaves on the injected feature is its FIT score.

use std::io::Write;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic_sparse, sign_labels};
use crate::error::{Error, Result};
use crate::leverage::HatState;
use crate::model::{Dataset, DeletionRequest};
use crate::numerics::DenseMatrix;
use crate::unlearn::{run_method, Method, MethodOptions};

/// Regularization used by FIT trials. The injected weight only collapses
/// under strong shrinkage, so this is far above the model default.
pub const FIT_LAMBDA: f64 = 100.0;

/// Appends the injected column: `scale·y_i` on `group`, zero elsewhere.
pub fn inject_feature(data: &Dataset, group: &DeletionRequest, scale: f64) -> Result<Dataset> {
    if group.is_empty() {
        return Err(Error::InvalidDeletion("injection group is empty".into()));
    }
    group.validate_for(data.len())?;
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::invalid(format!("signal scale must be finite and nonzero, got {scale}")));
    }
    let d = data.dim();
    let mask = group.mask(data.len());
    let mut out = Vec::with_capacity(data.len() * (d + 1));
    for (i, row) in data.x().row_iter().enumerate() {
        out.extend_from_slice(row);
        out.push(if mask[i] { scale * data.y()[i] } else { 0.0 });
    }
    let x = DenseMatrix::from_row_major(data.len(), d + 1, out)?;
    let injected = Dataset::new(x, data.y().to_vec())?;
    match data.feature_names() {
        Some(names) => {
            let mut names = names.to_vec();
            names.push("__injected__".into());
            injected.with_feature_names(names)
        }
        None => Ok(injected),
    }
}

/// Absolute weight on the injected feature; lower is better.
pub fn fit_score(theta: &[f64], injected_index: usize) -> Result<f64> {
    theta
        .get(injected_index)
        .map(|w| w.abs())
        .ok_or_else(|| Error::invalid(format!("injected index {injected_index} out of range for {}", theta.len())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrialConfig {
    pub n: usize,
    pub d: usize,
    /// Group size.
    pub k: usize,
    /// Probability that a base feature entry is nonzero.
    pub p: f64,
    pub lambda: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Multiplier on the injected column.
    pub signal_scale: f64,
    /// Replace regression labels by their sign before injection.
    pub binarize: bool,
    pub options: MethodOptions,
}

impl Default for FitTrialConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 500,
            k: 5,
            p: 0.25,
            lambda: FIT_LAMBDA,
            seed: 0,
            methods: vec![Method::Retrain, Method::Influence, Method::Residual],
            signal_scale: 1.0,
            binarize: true,
            options: MethodOptions::default(),
        }
    }
}

impl FitTrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(Error::invalid(format!("need 1 <= k < n, got k={} n={}", self.k, self.n)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("FIT needs lambda > 0"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub score: Option<f64>,
    pub time_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    /// Injected-feature weight of the full model, if it could be trained.
    pub baseline_weight: Option<f64>,
    pub scores: Vec<MethodScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_fit: f64,
    pub median_fit: f64,
    /// Mean of per-trial `score / baseline`.
    pub mean_ratio: f64,
    pub median_ratio: f64,
    pub mean_time_ms: f64,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: FitTrialConfig,
    pub trials: usize,
    pub baseline_mean: f64,
    pub baseline_median: f64,
    pub methods: Vec<MethodSummary>,
    pub per_trial: Vec<TrialOutcome>,
}

impl FitReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    /// Zeroes every timing field so reports can be compared byte for byte.
    pub fn without_timings(mut self) -> Self {
        for s in &mut self.methods {
            s.mean_time_ms = 0.0;
        }
        for t in &mut self.per_trial {
            for s in &mut t.scores {
                s.time_ms = 0.0;
            }
        }
        self
    }

    pub const CSV_HEADER: &'static str = "method,d,k,p,trials,mean_fit,median_fit,mean_time_ms";

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for s in &self.methods {
            writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{:.6}",
                s.method, self.config.d, self.config.k, self.config.p, self.trials, s.mean_fit, s.median_fit, s.mean_time_ms
            )?;
        }
        Ok(())
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Generates, injects, trains and unlearns one trial.
pub fn run_trial(config: &FitTrialConfig, trial: usize) -> Result<TrialOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64);
    let data_seed: u64 = rng.gen();
    let mut data = gen_synthetic_sparse(config.n, config.d, config.p, data_seed)?;
    if config.binarize {
        data = sign_labels(&data)?;
    }
    let mut group = rand::seq::index::sample(&mut rng, config.n, config.k).into_vec();
    group.sort_unstable();
    let group = DeletionRequest::new(group, config.n)?;
    let injected = inject_feature(&data, &group, config.signal_scale)?;
    let idx = config.d;

    let hat = match HatState::new(&injected, config.lambda) {
        Ok(h) => h,
        Err(e) => {
            let msg = e.to_string();
            return Ok(TrialOutcome {
                trial,
                baseline_weight: None,
                scores: config
                    .methods
                    .iter()
                    .map(|&method| MethodScore {
                        method,
                        score: None,
                        time_ms: 0.0,
                        error: Some(msg.clone()),
                    })
                    .collect(),
            });
        }
    };
    let baseline = fit_score(&hat.model().theta, idx)?;
    let scores = config
        .methods
        .iter()
        .map(|&method| match run_method(method, &injected, &group, &hat, &config.options) {
            Ok(res) => MethodScore {
                method,
                score: Some(res.theta[idx].abs()),
                time_ms: ms(res.wall_time),
                error: None,
            },
            Err(e) => MethodScore {
                method,
                score: None,
                time_ms: 0.0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(TrialOutcome {
        trial,
        baseline_weight: Some(baseline),
        scores,
    })
}

/// Runs `trials` seeded trials sequentially.
pub fn run_fit_suite(config: &FitTrialConfig, trials: usize) -> Result<FitReport> {
    run_fit_suite_with_workers(config, trials, 1)
}

/// Runs trials on up to `workers` threads. Results are folded in trial order,
/// so the report does not depend on scheduling (timings aside).
pub fn run_fit_suite_with_workers(config: &FitTrialConfig, trials: usize, workers: usize) -> Result<FitReport> {
    config.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let workers = workers.clamp(1, trials);
    let outcomes: Vec<TrialOutcome> = if workers == 1 {
        (0..trials).map(|t| run_trial(config, t)).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<TrialOutcome>>> = (0..trials).map(|_| None).collect();
        thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        (w..trials)
                            .step_by(workers)
                            .map(|t| (t, run_trial(config, t)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (t, r) in h.join().expect("FIT worker panicked") {
                    slots[t] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|r| r.expect("every trial scheduled"))
            .collect::<Result<_>>()?
    };
    Ok(summarize(config, outcomes))
}

fn summarize(config: &FitTrialConfig, per_trial: Vec<TrialOutcome>) -> FitReport {
    let baselines: Vec<f64> = per_trial.iter().filter_map(|t| t.baseline_weight).collect();
    let methods = config
        .methods
        .iter()
        .map(|&method| {
            let mut scores = Vec::new();
            let mut ratios = Vec::new();
            let mut times = Vec::new();
            let mut failed = 0;
            for t in &per_trial {
                let Some(s) = t.scores.iter().find(|s| s.method == method) else {
                    continue;
                };
                match s.score {
                    Some(v) => {
                        scores.push(v);
                        times.push(s.time_ms);
                        if let Some(b) = t.baseline_weight.filter(|b| *b > 0.0) {
                            ratios.push(v / b);
                        }
                    }
                    None => failed += 1,
                }
            }
            MethodSummary {
                method,
                mean_fit: mean(&scores),
                median_fit: median(&scores),
                mean_ratio: mean(&ratios),
                median_ratio: median(&ratios),
                mean_time_ms: mean(&times),
                completed: scores.len(),
                failed,
            }
        })
        .collect();
    FitReport {
        config: config.clone(),
        trials: per_trial.len(),
        baseline_mean: mean(&baselines),
        baseline_median: median(&baselines),
        methods,
        per_trial,
    }
}
