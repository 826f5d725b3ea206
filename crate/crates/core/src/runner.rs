//! Multi-initialization fitting, evaluation and their on-disk records.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::als::{fit_als, AlsConfig};
use crate::error::{Error, Result};
use crate::io::{self, FactorFiles};
use crate::metrics::{fms, relative_sse, FmsOptions};
use crate::report::{FitReport, Termination};
use crate::seed::init_seed;
use crate::solver::{fit_ao_admm, SolverConfig};
use crate::tensor::{Pf2Factors, SliceStack};

pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Fitting method together with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitMethod {
    #[serde(rename = "aoadmm")]
    AoAdmm(SolverConfig),
    Als(AlsConfig),
}

impl FitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FitMethod::AoAdmm(_) => "aoadmm",
            FitMethod::Als(_) => "als",
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            FitMethod::AoAdmm(c) => c.rank,
            FitMethod::Als(c) => c.rank,
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        match self {
            FitMethod::AoAdmm(c) => FitMethod::AoAdmm(c.clone().with_seed(seed)),
            FitMethod::Als(c) => FitMethod::Als(c.clone().with_seed(seed)),
        }
    }

    fn validate(&self, stack: &SliceStack) -> Result<()> {
        match self {
            FitMethod::AoAdmm(c) => c.validate_for(stack),
            FitMethod::Als(c) => {
                c.validate()?;
                crate::solver::check_rank(stack, c.rank)
            }
        }
    }

    /// One fit from the random start drawn from the configured seed.
    pub fn fit(&self, stack: &SliceStack) -> Result<(Pf2Factors, FitReport)> {
        match self {
            FitMethod::AoAdmm(c) => fit_ao_admm(stack, c, None),
            FitMethod::Als(c) => fit_als(stack, c, None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStatus {
    Ok,
    Diverged,
    Failed,
}

/// Outcome of one initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub index: usize,
    pub seed: u64,
    pub status: InitStatus,
    pub error: Option<String>,
    pub final_objective: Option<f64>,
    pub final_relative_sse: Option<f64>,
    pub outer_iterations: usize,
    pub termination: Option<Termination>,
    pub wall_time_secs: f64,
    /// Full trace; omitted for failed inits and when traces are not kept.
    pub trace: Option<FitReport>,
}

/// Contents of `fit_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFitReport {
    pub schema_version: u32,
    pub library_version: String,
    pub config: FitMethod,
    pub base_seed: u64,
    pub n_inits: usize,
    pub chosen_init: usize,
    pub chosen_seed: u64,
    pub final_objective: f64,
    pub final_relative_sse: f64,
    pub total_wall_time_secs: f64,
    pub inits: Vec<InitRecord>,
}

impl MultiFitReport {
    pub fn chosen(&self) -> &InitRecord {
        &self.inits[self.chosen_init]
    }

    /// Outer iterations of the chosen initialization.
    pub fn iterations(&self) -> usize {
        self.chosen().outer_iterations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiFitOptions {
    pub n_inits: usize,
    pub base_seed: u64,
    pub keep_traces: bool,
}

impl MultiFitOptions {
    pub fn new(n_inits: usize, base_seed: u64) -> Self {
        MultiFitOptions {
            n_inits,
            base_seed,
            keep_traces: true,
        }
    }
}

/// Run `options.n_inits` fits with seeds `init_seed(base_seed, i)` and keep
/// the one with the lowest final objective.
///
/// Numerical failures of single inits are recorded and skipped; the call
/// fails with [`Error::AllInitsFailed`] only if no init succeeds.
pub fn fit_multi(
    stack: &SliceStack,
    method: &FitMethod,
    options: MultiFitOptions,
) -> Result<(Pf2Factors, MultiFitReport)> {
    if options.n_inits == 0 {
        return Err(Error::config("at least one initialization is required"));
    }
    method.validate(stack)?;
    let start = Instant::now();
    let mut inits = Vec::with_capacity(options.n_inits);
    let mut best: Option<(usize, f64, Pf2Factors)> = None;

    for index in 0..options.n_inits {
        let seed = init_seed(options.base_seed, index);
        let t = Instant::now();
        match method.with_seed(seed).fit(stack) {
            Ok((factors, report)) => {
                let objective = report.final_objective;
                inits.push(InitRecord {
                    index,
                    seed,
                    status: InitStatus::Ok,
                    error: None,
                    final_objective: Some(objective),
                    final_relative_sse: Some(report.final_relative_sse),
                    outer_iterations: report.outer_iterations,
                    termination: Some(report.termination),
                    wall_time_secs: t.elapsed().as_secs_f64(),
                    trace: options.keep_traces.then_some(report),
                });
                if best.as_ref().is_none_or(|(_, o, _)| objective < *o) {
                    best = Some((index, objective, factors));
                }
            }
            Err(e) if e.is_numerical() => {
                log::warn!("init {index} (seed {seed}) failed: {e}");
                let (status, iterations) = match &e {
                    Error::Diverged { iteration, .. } => (InitStatus::Diverged, *iteration),
                    _ => (InitStatus::Failed, 0),
                };
                inits.push(InitRecord {
                    index,
                    seed,
                    status,
                    error: Some(e.to_string()),
                    final_objective: None,
                    final_relative_sse: None,
                    outer_iterations: iterations,
                    termination: None,
                    wall_time_secs: t.elapsed().as_secs_f64(),
                    trace: None,
                });
            }
            Err(e) => return Err(e),
        }
    }

    let Some((chosen_init, final_objective, factors)) = best else {
        return Err(Error::AllInitsFailed {
            n_inits: options.n_inits,
            last: inits.last().and_then(|r| r.error.clone()).unwrap_or_default(),
        });
    };
    let report = MultiFitReport {
        schema_version: io::SCHEMA_VERSION,
        library_version: crate::VERSION.to_string(),
        config: method.clone(),
        base_seed: options.base_seed,
        n_inits: options.n_inits,
        chosen_init,
        chosen_seed: inits[chosen_init].seed,
        final_objective,
        final_relative_sse: inits[chosen_init].final_relative_sse.unwrap_or(f64::NAN),
        total_wall_time_secs: start.elapsed().as_secs_f64(),
        inits,
    };
    Ok((factors, report))
}

/// Write the chosen factors and `fit_report.json` into `dir`.
pub fn save_fit(dir: &Path, factors: &Pf2Factors, report: &MultiFitReport) -> Result<()> {
    io::save_factors(dir, &FactorFiles::standard(factors.n_slices()), factors)?;
    io::write_json(&dir.join(FIT_REPORT_FILE), report)
}

pub fn load_fit_report(dir: &Path) -> Result<MultiFitReport> {
    io::read_json(&dir.join(FIT_REPORT_FILE))
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub relative_sse: f64,
    pub fms: Option<f64>,
    pub permutation: Option<Vec<usize>>,
    pub per_component: Option<Vec<f64>>,
    pub fms_omitted_reason: Option<String>,
}

/// Relative SSE of `estimate` on `stack`, and its FMS against `truth` when
/// the two are comparable.
pub fn evaluate(stack: &SliceStack, estimate: &Pf2Factors, truth: Option<&Pf2Factors>) -> Result<Metrics> {
    let relative_sse = relative_sse(stack, estimate)?;
    let mut metrics = Metrics {
        relative_sse,
        fms: None,
        permutation: None,
        per_component: None,
        fms_omitted_reason: None,
    };
    match truth {
        None => metrics.fms_omitted_reason = Some("dataset has no true factors".into()),
        Some(t) if t.rank() != estimate.rank() => {
            metrics.fms_omitted_reason = Some(format!(
                "estimated rank {} differs from true rank {}",
                estimate.rank(),
                t.rank()
            ))
        }
        Some(t) => match fms(t, estimate, FmsOptions::default()) {
            Ok(f) => {
                metrics.fms = Some(f.fms);
                metrics.permutation = Some(f.permutation);
                metrics.per_component = Some(f.per_component);
            }
            Err(e @ (Error::ZeroComponent { .. } | Error::Shape(_))) => {
                metrics.fms_omitted_reason = Some(e.to_string())
            }
            Err(e) => return Err(e),
        },
    }
    Ok(metrics)
}
