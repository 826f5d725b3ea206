use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use parafac2::experiment::{run_experiment, ExperimentSpec};
use parafac2::io::{self, DatasetMeta};
use parafac2::runner::{self, FitMethod, MultiFitOptions, METRICS_FILE};
use parafac2::simulate::{simulate, Setup, SimSpec};
use parafac2::solver::EvolvingEstimate;
use parafac2::{AlsConfig, Error, Regularizer, SolverConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

/// Fit regularized PARAFAC2 models and run simulation benchmarks.
#[derive(Debug, Parser)]
#[command(name = "parafac2", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory with its true factors.
    Simulate(SimulateArgs),
    /// Fit a model to a dataset directory with several random starts.
    Fit(FitArgs),
    /// Compare fitted factors with the true factors of a dataset.
    Evaluate(EvaluateArgs),
    /// Run a grid-search experiment described by a JSON file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    /// Blueprint of the evolving mode: 1 truncated normal, 2 smooth spectra,
    /// 3 piecewise constant.
    #[arg(long, default_value = "1")]
    setup: Setup,
    /// Noise level: ‖noise‖ = eta · ‖X‖.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Rows of every slice.
    #[arg(id = "I", long = "I", default_value_t = 30)]
    i: usize,
    /// Columns of every slice.
    #[arg(id = "J", long = "J", default_value_t = 40)]
    j: usize,
    /// Number of slices.
    #[arg(id = "K", long = "K", default_value_t = 15)]
    k: usize,
    /// Number of components.
    #[arg(id = "R", long = "R", default_value_t = 3)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Aoadmm,
    Als,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Evolving {
    Projected,
    Regularized,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "aoadmm")]
    method: Method,
    #[arg(long)]
    rank: usize,
    /// Regularizer of one mode as MODE=KIND[:STRENGTH], e.g. b=tv:10,
    /// a=ridge:1, d=nonneg. Kinds: none, nonneg, ridge, tv, laplacian.
    /// With ALS only a=nonneg, a=none, d=nonneg and d=none are accepted.
    #[arg(long = "reg", value_name = "MODE=KIND[:STRENGTH]")]
    regs: Vec<String>,
    /// Number of random initializations.
    #[arg(long, default_value_t = 5)]
    inits: usize,
    /// Base seed; initialization i uses a seed derived from it, and
    /// initialization 0 uses it unchanged.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rerun only the initialization with this seed (same as --inits 1 --seed S).
    #[arg(long, conflicts_with_all = ["inits", "seed"])]
    replay_seed: Option<u64>,
    /// Dataset directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Result directory.
    #[arg(long)]
    out: PathBuf,
    /// Outer iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Which evolving-mode estimate AO-ADMM returns.
    #[arg(long, value_enum, default_value = "projected")]
    evolving: Evolving,
    /// Leave per-iteration traces out of fit_report.json.
    #[arg(long)]
    no_trace: bool,
}

#[derive(Debug, clap::Args)]
struct EvaluateArgs {
    /// Result directory written by `fit`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Dataset directory the model was fitted to.
    #[arg(long)]
    data: PathBuf,
    /// Output file; defaults to metrics.json in the result directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ExperimentArgs {
    /// Experiment description (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Rerun cells that already have results.
    #[arg(long)]
    force: bool,
    /// Worker threads, overriding the experiment file.
    #[arg(long)]
    jobs: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn parse_reg(text: &str) -> Result<(char, Regularizer), Error> {
    let (mode, reg) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("expected MODE=KIND[:STRENGTH], got '{text}'")))?;
    let mode = match mode.trim().to_ascii_lowercase().as_str() {
        "a" => 'a',
        "b" => 'b',
        "d" | "c" => 'd',
        other => return Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
    };
    let reg: Regularizer = reg.parse()?;
    reg.validate()?;
    Ok((mode, reg))
}

fn fit_method(args: &FitArgs) -> Result<FitMethod, Error> {
    let regs = args.regs.iter().map(|r| parse_reg(r)).collect::<Result<Vec<_>, _>>()?;
    match args.method {
        Method::Aoadmm => {
            let mut cfg = SolverConfig::new(args.rank);
            for (mode, reg) in regs {
                match mode {
                    'a' => cfg.reg_a = reg,
                    'b' => cfg.reg_b = reg,
                    _ => cfg.reg_d = reg,
                }
            }
            if let Some(n) = args.max_iter {
                cfg.outer_max_iter = n;
            }
            cfg.evolving_estimate = match args.evolving {
                Evolving::Projected => EvolvingEstimate::Projected,
                Evolving::Regularized => EvolvingEstimate::Regularized,
            };
            Ok(FitMethod::AoAdmm(cfg))
        }
        Method::Als => {
            let mut cfg = AlsConfig::new(args.rank);
            for (mode, reg) in regs {
                match (mode, reg) {
                    ('a', Regularizer::NonNeg) => cfg.nonneg_a = true,
                    ('a', Regularizer::None) => cfg.nonneg_a = false,
                    ('d', Regularizer::NonNeg) => cfg.nonneg_d = true,
                    ('d', Regularizer::None) => cfg.nonneg_d = false,
                    (mode, reg) => return Err(Error::InvalidConfig(format!("ALS cannot impose {reg} on mode {mode}"))),
                }
            }
            if let Some(n) = args.max_iter {
                cfg.outer_max_iter = n;
            }
            Ok(FitMethod::Als(cfg))
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let spec = SimSpec::new(args.setup, args.eta, args.seed).with_dims(args.i, args.j, args.k, args.r);
    let sim = simulate(&spec)?;
    let meta = DatasetMeta {
        setup: Some(args.setup),
        eta: Some(args.eta),
        seed: Some(args.seed),
    };
    io::save_dataset(&args.out, &sim.noisy, Some(&sim.truth), &meta)?;
    println!("wrote dataset to {}", args.out.display());
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let method = fit_method(args)?;
    let data = io::load_dataset(&args.input)?;
    let (n_inits, seed) = match args.replay_seed {
        Some(s) => (1, s),
        None => (args.inits, args.seed),
    };
    let options = MultiFitOptions {
        n_inits,
        base_seed: seed,
        keep_traces: !args.no_trace,
    };
    let (factors, report) = runner::fit_multi(&data.stack, &method, options)?;
    runner::save_fit(&args.out, &factors, &report)?;
    println!(
        "{}: chose init {} (seed {}) of {}, objective {:.10e}, relative SSE {:.6e}, {} iterations",
        method.name(),
        report.chosen_init,
        report.chosen_seed,
        report.n_inits,
        report.final_objective,
        report.final_relative_sse,
        report.iterations()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let data = io::load_dataset(&args.data)?;
    let factors = io::load_standard_factors(&args.input)?;
    factors.check_compatible(&data.stack)?;
    let metrics = runner::evaluate(&data.stack, &factors, data.truth.as_ref())?;
    let out = args.out.clone().unwrap_or_else(|| args.input.join(METRICS_FILE));
    io::write_json(&out, &metrics)?;
    let text = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    println!("{text}");
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), Error> {
    let mut spec = ExperimentSpec::from_file(&args.spec)?;
    if args.jobs.is_some() {
        spec.jobs = args.jobs;
    }
    let base = args.spec.parent().unwrap_or(Path::new("."));
    let outcome = run_experiment(&spec, base, args.force)?;
    println!("{:<8} {:<48} {:>4} {:>14}", "method", "grid point", "n", "FMS");
    for row in &outcome.summary.rows {
        println!(
            "{:<8} {:<48} {:>4} {:>14}",
            row.method.as_str(),
            row.grid_point,
            row.n,
            row.fms_display
        );
    }
    for best in &outcome.summary.best {
        println!(
            "best {}: {} at {}",
            best.method.as_str(),
            best.fms_display,
            best.grid_point
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
