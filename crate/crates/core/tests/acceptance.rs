//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria. Failed
//! criteria are reported; with `ACCEPTANCE_STRICT=1` they also fail the run.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use common::{max_abs, max_abs_diff, mean, median};
use parafac2::experiment::{run_experiment, ExperimentSpec, MethodName, ModeGrid, RegularizerGrid};
use parafac2::io::{save_dataset, DatasetMeta};
use parafac2::prox::tv::tv_denoise;
use parafac2::runner::{evaluate, fit_multi, load_fit_report, FitMethod, MultiFitOptions, MultiFitReport};
use parafac2::simulate::{add_noise, simulate, Simulation};
use parafac2::solver::{a_loss_prox, b_loss_prox, d_loss_prox};
use parafac2::{
    fms, orthonormal_polar_factor, project_pf2, AlsConfig, FmsOptions, Matrix, Pf2Factors, Pf2ProjectionState,
    Regularizer, Setup, SimSpec, SliceStack, SolverConfig,
};

const N_DATASETS: usize = 10;
const N_INITS: usize = 5;
const RANK: usize = 3;

const C1_ETA: f64 = 0.5;
const C1_MIN_MEDIAN_FMS: f64 = 0.90;
const C2_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
const C2_ETAS: [f64; 2] = [0.33, 0.5];
const C2_MIN_GAIN: f64 = 0.03;
const C2_MIN_MEAN_LOW_NOISE: f64 = 0.90;
const C3_MAX_REL_SSE: f64 = 1e-6;
const C3_MIN_FMS: f64 = 0.999;
const C3_MIN_SEEDS: usize = 9;
const C4_INSTANCES: usize = 100;
const C4_TOL: f64 = 1e-8;
const C5_CROSS_PRODUCT_TOL: f64 = 1e-8;
const C5_ORTHONORMAL_TOL: f64 = 1e-10;
const C5_NOISE_TOL: f64 = 1e-12;
const C6_MAX_TIME_RATIO: f64 = 5.0;
const C7_TOL: f64 = 1e-10;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn dataset(setup: Setup, eta: f64, seed: u64) -> Simulation {
    simulate(&SimSpec::new(setup, eta, seed)).expect("simulate")
}

fn fms_or_zero(truth: &Pf2Factors, est: &Pf2Factors) -> f64 {
    fms(truth, est, FmsOptions::default()).map_or(0.0, |f| f.fms)
}

fn nonneg_aoadmm() -> FitMethod {
    FitMethod::AoAdmm(SolverConfig::new(RANK).with_regularizers(
        Regularizer::NonNeg,
        Regularizer::NonNeg,
        Regularizer::NonNeg,
    ))
}

fn nonneg_als() -> FitMethod {
    let mut cfg = AlsConfig::new(RANK);
    cfg.nonneg_a = true;
    cfg.nonneg_d = true;
    FitMethod::Als(cfg)
}

struct RecoveryRun {
    fms: f64,
    time: f64,
    report: MultiFitReport,
}

struct NonnegStudy {
    aoadmm: Vec<RecoveryRun>,
    als: Vec<RecoveryRun>,
}

fn run_recovery(sim: &Simulation, method: &FitMethod, seed: u64) -> RecoveryRun {
    let start = Instant::now();
    let (est, report) = fit_multi(&sim.noisy, method, MultiFitOptions::new(N_INITS, seed)).expect("fit");
    RecoveryRun {
        time: start.elapsed().as_secs_f64(),
        fms: fms_or_zero(&sim.truth, &est),
        report,
    }
}

fn nonneg_study() -> &'static NonnegStudy {
    static STUDY: OnceLock<NonnegStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let mut study = NonnegStudy {
            aoadmm: Vec::new(),
            als: Vec::new(),
        };
        for i in 0..N_DATASETS as u64 {
            let sim = dataset(Setup::TruncatedNormal, C1_ETA, 100 + i);
            study.aoadmm.push(run_recovery(&sim, &nonneg_aoadmm(), i));
            study.als.push(run_recovery(&sim, &nonneg_als(), i));
        }
        study
    })
}

fn criterion_1() -> Outcome {
    let study = nonneg_study();
    let ao: Vec<f64> = study.aoadmm.iter().map(|r| r.fms).collect();
    let als: Vec<f64> = study.als.iter().map(|r| r.fms).collect();
    let (m_ao, m_als) = (median(&ao), median(&als));
    Outcome::new(
        m_ao >= C1_MIN_MEDIAN_FMS && m_ao > m_als,
        format!("median FMS nonneg AO-ADMM {m_ao:.4} (need >= {C1_MIN_MEDIAN_FMS}), nonneg ALS {m_als:.4}"),
    )
}

fn structure_grid(kind: &str) -> RegularizerGrid {
    let strengths = C2_GRID.to_vec();
    RegularizerGrid {
        a: ModeGrid {
            kinds: vec!["ridge".into()],
            strengths: strengths.clone(),
        },
        b: ModeGrid {
            kinds: vec![kind.into()],
            strengths: strengths.clone(),
        },
        d: ModeGrid {
            kinds: vec!["ridge".into()],
            strengths,
        },
        link_a_d: true,
    }
}

struct GridResult {
    best_point: String,
    best_mean: f64,
    als_mean: f64,
}

fn grid_search(setup: Setup, kind: &str, eta: f64, seed: u64) -> GridResult {
    let dir = tempfile::tempdir().expect("tempdir");
    for i in 0..N_DATASETS as u64 {
        let sim = dataset(setup, eta, seed + i);
        let meta = DatasetMeta {
            setup: Some(setup),
            eta: Some(eta),
            seed: Some(seed + i),
        };
        save_dataset(
            &dir.path().join(format!("data/s{i:02}")),
            &sim.noisy,
            Some(&sim.truth),
            &meta,
        )
        .expect("save");
    }
    let spec = ExperimentSpec {
        schema_version: parafac2::io::SCHEMA_VERSION,
        datasets: vec!["data/*".into()],
        methods: vec![MethodName::AoAdmm, MethodName::Als],
        rank: RANK,
        n_inits: N_INITS,
        seed,
        grid: structure_grid(kind),
        als_nonneg_a: false,
        outer_max_iter: None,
        keep_traces: false,
        jobs: None,
        output: "out".into(),
    };
    let outcome = run_experiment(&spec, dir.path(), false).expect("experiment");
    // Failed cells and omitted scores count as zero.
    let mean_of = |method: MethodName, point: &str| {
        let values: Vec<f64> = outcome
            .rows
            .iter()
            .filter(|r| r.method == method && r.grid_point == point)
            .map(|r| r.fms.unwrap_or(0.0))
            .collect();
        assert_eq!(values.len(), N_DATASETS);
        mean(&values)
    };
    let als_point = outcome
        .rows
        .iter()
        .find(|r| r.method == MethodName::Als)
        .map(|r| r.grid_point.clone())
        .expect("als rows");
    let mut best_point = String::new();
    let mut best_mean = f64::NEG_INFINITY;
    let mut points: Vec<&str> = outcome
        .rows
        .iter()
        .filter(|r| r.method == MethodName::AoAdmm)
        .map(|r| r.grid_point.as_str())
        .collect();
    points.dedup();
    for point in points {
        let m = mean_of(MethodName::AoAdmm, point);
        if m > best_mean {
            best_mean = m;
            best_point = point.to_string();
        }
    }
    GridResult {
        best_point,
        best_mean,
        als_mean: mean_of(MethodName::Als, &als_point),
    }
}

fn criterion_2() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (setup, kind) in [(Setup::PiecewiseConstant, "tv"), (Setup::SmoothSpectra, "laplacian")] {
        for (e, &eta) in C2_ETAS.iter().enumerate() {
            let seed = 10_000 * setup as u64 + 1000 * e as u64;
            let g = grid_search(setup, kind, eta, seed);
            let mut ok = g.best_mean >= g.als_mean + C2_MIN_GAIN;
            if eta == C2_ETAS[0] {
                ok &= g.best_mean >= C2_MIN_MEAN_LOW_NOISE;
            }
            passed &= ok;
            let line = format!(
                "setup {setup} {kind} eta={eta}: AO-ADMM best {:.4} at {} vs ALS {:.4} [{}]",
                g.best_mean,
                g.best_point,
                g.als_mean,
                if ok { "ok" } else { "short" }
            );
            println!("    {line}");
            parts.push(line);
        }
    }
    Outcome::new(passed, parts.join("; "))
}

fn noise_free_recovery(method: &FitMethod) -> (usize, f64, f64) {
    let mut hits = 0;
    let mut worst_sse: f64 = 0.0;
    let mut worst_fms: f64 = 1.0;
    for i in 0..N_DATASETS as u64 {
        let sim = dataset(Setup::TruncatedNormal, 0.0, 500 + i);
        let (est, _) = fit_multi(&sim.noisy, method, MultiFitOptions::new(N_INITS, i)).expect("fit");
        let m = evaluate(&sim.noisy, &est, Some(&sim.truth)).expect("evaluate");
        let f = m.fms.unwrap_or(0.0);
        worst_sse = worst_sse.max(m.relative_sse);
        worst_fms = worst_fms.min(f);
        if m.relative_sse <= C3_MAX_REL_SSE && f >= C3_MIN_FMS {
            hits += 1;
        }
    }
    (hits, worst_sse, worst_fms)
}

fn criterion_3() -> Outcome {
    let (ao, ao_sse, ao_fms) = noise_free_recovery(&FitMethod::AoAdmm(SolverConfig::new(RANK)));
    let (als, als_sse, als_fms) = noise_free_recovery(&FitMethod::Als(AlsConfig::new(RANK)));
    Outcome::new(
        ao >= C3_MIN_SEEDS && als >= C3_MIN_SEEDS,
        format!(
            "AO-ADMM {ao}/{N_DATASETS} (worst rel SSE {ao_sse:.1e}, FMS {ao_fms:.6}), \
             ALS {als}/{N_DATASETS} (worst rel SSE {als_sse:.1e}, FMS {als_fms:.6}); need {C3_MIN_SEEDS}"
        ),
    )
}

struct ProxCheck {
    name: &'static str,
    worst_error: f64,
    worst_kkt: f64,
}

fn prox_checks() -> Vec<ProxCheck> {
    use common::{
        mat, minimize_quadratic, quadratic_gradient, sq_fro, tv_dual_oracle, tv_kkt_residual, uniform_matrix,
    };
    let mut rng = common::rng(4242);
    let mut checks: Vec<ProxCheck> = Vec::new();
    let mut record = |name: &'static str, err: f64, kkt: f64| match checks.iter_mut().find(|c| c.name == name) {
        Some(c) => {
            c.worst_error = c.worst_error.max(err);
            c.worst_kkt = c.worst_kkt.max(kkt);
        }
        None => checks.push(ProxCheck {
            name,
            worst_error: err,
            worst_kkt: kkt,
        }),
    };
    use rand::Rng;
    for _ in 0..C4_INSTANCES {
        let rows = rng.random_range(2..=12);
        let cols = rng.random_range(1..=3);
        let rho = rng.random_range(0.1..10.0);
        let gamma = rng.random_range(0.01..5.0);
        let scale = rng.random_range(0.5..4.0);
        let y = uniform_matrix(&mut rng, rows, cols, -scale, scale);
        let n = rows * cols;

        let x = Regularizer::NonNeg.prox(&y, rho).unwrap();
        let oracle: Vec<f64> = y.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect();
        let kkt = x
            .iter()
            .zip(y.iter())
            .map(|(x, y)| (-x).max(0.0).max((y - x).max(0.0)).max((x * (x - y)).abs()))
            .fold(0.0, f64::max);
        record("nonneg", max_abs_diff(x.as_slice(), &oracle), kkt);

        for (name, reg) in [
            ("ridge", Regularizer::Ridge(gamma)),
            ("laplacian", Regularizer::GraphLaplacian(gamma)),
        ] {
            let q = |v: &[f64]| {
                let m = mat(rows, cols, v);
                reg.penalty(&m) + 0.5 * rho * sq_fro(&(m - &y))
            };
            let x = reg.prox(&y, rho).unwrap();
            let oracle = minimize_quadratic(n, q);
            let grad = quadratic_gradient(x.as_slice(), q);
            record(
                name,
                max_abs_diff(x.as_slice(), &oracle) / (1.0 + max_abs(&oracle)),
                max_abs(&grad) / (1.0 + rho * max_abs(y.as_slice())),
            );
        }

        let reg = Regularizer::TotalVariation(gamma);
        let x = reg.prox(&y, rho).unwrap();
        let lambda = gamma / rho;
        let (mut err, mut kkt) = (0.0f64, 0.0f64);
        for c in 0..cols {
            let yc: Vec<f64> = y.column(c).iter().copied().collect();
            let xc: Vec<f64> = x.column(c).iter().copied().collect();
            let oracle = tv_dual_oracle(&yc, lambda);
            err = err.max(max_abs_diff(&xc, &oracle) / (1.0 + max_abs(&yc)));
            kkt = kkt.max(tv_kkt_residual(&yc, &xc, lambda) / (1.0 + lambda));
            let direct = tv_denoise(&yc, lambda);
            err = err.max(max_abs_diff(&direct, &oracle) / (1.0 + max_abs(&yc)));
        }
        record("tv", err, kkt);

        // Data-term proxes of the three modes.
        let rank = rng.random_range(1..=3);
        let i_dim = rng.random_range(2..=6);
        let j_dim = rng.random_range(rank..=6);
        let a = uniform_matrix(&mut rng, i_dim, rank, -1.0, 1.0);
        let bk = uniform_matrix(&mut rng, j_dim, rank, -1.0, 1.0);
        let xk = uniform_matrix(&mut rng, i_dim, j_dim, -1.0, 1.0);
        let dk: Vec<f64> = (0..rank).map(|_| rng.random_range(0.1..1.5)).collect();
        let fit = |a: &Matrix, d: &[f64], b: &Matrix| {
            let mut s = 0.0;
            for p in 0..i_dim {
                for q in 0..j_dim {
                    let model: f64 = (0..rank).map(|r| a[(p, r)] * d[r] * b[(q, r)]).sum();
                    s += (model - xk[(p, q)]).powi(2);
                }
            }
            s
        };

        let m1 = uniform_matrix(&mut rng, j_dim, rank, -1.0, 1.0);
        let m2 = uniform_matrix(&mut rng, j_dim, rank, -1.0, 1.0);
        let qb = |v: &[f64]| {
            let b = mat(j_dim, rank, v);
            fit(&a, &dk, &b) + 0.5 * rho * (sq_fro(&(&b - &m1)) + sq_fro(&(&b - &m2)))
        };
        let got = b_loss_prox(&xk, &a, &dk, &(&m1 + &m2), rho).unwrap();
        let oracle = minimize_quadratic(j_dim * rank, qb);
        let grad = quadratic_gradient(got.as_slice(), qb);
        record(
            "evolving-mode data prox",
            max_abs_diff(got.as_slice(), &oracle) / (1.0 + max_abs(&oracle)),
            max_abs(&grad) / (1.0 + rho),
        );

        let slices = vec![xk.clone()];
        let stack = SliceStack::new(slices).unwrap();
        let d_mat = Matrix::from_row_slice(1, rank, &dk);
        let ma = uniform_matrix(&mut rng, i_dim, rank, -1.0, 1.0);
        let qa = |v: &[f64]| {
            let am = mat(i_dim, rank, v);
            fit(&am, &dk, &bk) + 0.5 * rho * sq_fro(&(am - &ma))
        };
        let got = a_loss_prox(&stack, std::slice::from_ref(&bk), &d_mat, &ma, rho).unwrap();
        let oracle = minimize_quadratic(i_dim * rank, qa);
        let grad = quadratic_gradient(got.as_slice(), qa);
        record(
            "first-mode data prox",
            max_abs_diff(got.as_slice(), &oracle) / (1.0 + max_abs(&oracle)),
            max_abs(&grad) / (1.0 + rho),
        );

        let v: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        let qd = |w: &[f64]| fit(&a, w, &bk) + 0.5 * rho * w.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let got = d_loss_prox(&xk, &a, &bk, &v, rho).unwrap();
        let oracle = minimize_quadratic(rank, qd);
        let grad = quadratic_gradient(&got, qd);
        record(
            "slice-weight data prox",
            max_abs_diff(&got, &oracle) / (1.0 + max_abs(&oracle)),
            max_abs(&grad) / (1.0 + rho),
        );

        let r = rng.random_range(1..=5);
        let truth = random_factors(&mut rng, r, &[5, 6, 4]);
        let est = random_factors(&mut rng, r, &[5, 6, 4]);
        let f = fms(&truth, &est, FmsOptions::default()).unwrap().fms;
        record(
            "factor match score",
            (f - common::brute_force_fms(&truth, &est)).abs(),
            0.0,
        );
    }
    checks
}

fn random_factors(rng: &mut rand_chacha::ChaCha8Rng, rank: usize, cols: &[usize]) -> Pf2Factors {
    let a = common::uniform_matrix(rng, 4, rank, -1.0, 1.0);
    let d = common::uniform_matrix(rng, cols.len(), rank, 0.1, 1.0);
    let b = cols
        .iter()
        .map(|&c| common::uniform_matrix(rng, c, rank, -1.0, 1.0))
        .collect();
    Pf2Factors::new(a, d, b).unwrap()
}

fn criterion_4() -> Outcome {
    let checks = prox_checks();
    let passed = checks.iter().all(|c| c.worst_error <= C4_TOL && c.worst_kkt <= C4_TOL);
    let detail = checks
        .iter()
        .map(|c| format!("{} err {:.1e} kkt {:.1e}", c.name, c.worst_error, c.worst_kkt))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(passed, format!("{C4_INSTANCES} instances each: {detail}"))
}

fn orthonormality_error(p: &Matrix) -> f64 {
    (p.tr_mul(p) - Matrix::identity(p.ncols(), p.ncols())).abs().max()
}

fn criterion_5() -> Outcome {
    let mut checks = Vec::new();

    let mut worst_gap: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let configs = [
        (
            Setup::PiecewiseConstant,
            Regularizer::TotalVariation(1.0),
            Regularizer::Ridge(1.0),
        ),
        (
            Setup::SmoothSpectra,
            Regularizer::GraphLaplacian(1.0),
            Regularizer::Ridge(1.0),
        ),
        (Setup::TruncatedNormal, Regularizer::NonNeg, Regularizer::NonNeg),
    ];
    for (i, (setup, reg_b, reg_ad)) in configs.into_iter().enumerate() {
        let sim = dataset(setup, 0.33, 700 + i as u64);
        let cfg = SolverConfig::new(RANK).with_regularizers(reg_ad, reg_b, reg_ad);
        let (est, _) = fit_multi(&sim.noisy, &FitMethod::AoAdmm(cfg), MultiFitOptions::new(2, i as u64)).unwrap();
        let scale = est.b[0].tr_mul(&est.b[0]).norm();
        worst_gap = worst_gap.max(est.cross_product_gap() / scale);
        let mut state = Pf2ProjectionState::from_factors(&est.b, vec![1.0; est.n_slices()]);
        project_pf2(&est.b, &mut state, 3).unwrap();
        for p in state
            .p
            .iter()
            .chain(est.b.iter().map(orthonormal_polar_factor).collect::<Vec<_>>().iter())
        {
            worst_orth = worst_orth.max(orthonormality_error(p));
        }
    }
    checks.push((
        worst_gap <= C5_CROSS_PRODUCT_TOL,
        format!("relative cross-product gap {worst_gap:.1e}"),
    ));
    checks.push((
        worst_orth <= C5_ORTHONORMAL_TOL,
        format!("P_k orthonormality {worst_orth:.1e}"),
    ));

    let mut worst_rise: f64 = 0.0;
    for run in &nonneg_study().als {
        for init in &run.report.inits {
            let trace = init.trace.as_ref().expect("traces kept");
            let objectives: Vec<f64> = std::iter::once(trace.initial_objective.unwrap_or(f64::INFINITY))
                .chain(trace.objectives())
                .collect();
            for w in objectives.windows(2) {
                if w[0].is_finite() {
                    worst_rise = worst_rise.max((w[1] - w[0]) / w[0]);
                }
            }
        }
    }
    // Round-off allowance on a relative scale.
    checks.push((
        worst_rise <= 1e-12,
        format!("ALS largest relative SSE increase {worst_rise:.1e}"),
    ));

    let mut worst_noise: f64 = 0.0;
    for (i, eta) in [0.01, 0.1, 0.33, 0.5, 1.0, 2.5].into_iter().enumerate() {
        let sim = dataset(Setup::SmoothSpectra, 0.0, 800 + i as u64);
        let noisy = add_noise(&sim.clean, eta, 900 + i as u64).unwrap();
        let diff: f64 = noisy
            .slices()
            .iter()
            .zip(sim.clean.slices())
            .map(|(n, c)| (n - c).norm_squared())
            .sum();
        worst_noise = worst_noise.max(((diff / sim.clean.sq_norm()).sqrt() - eta).abs());
    }
    checks.push((
        worst_noise <= C5_NOISE_TOL,
        format!("noise ratio error {worst_noise:.1e}"),
    ));

    Outcome::new(
        checks.iter().all(|c| c.0),
        checks.into_iter().map(|c| c.1).collect::<Vec<_>>().join(", "),
    )
}

fn criterion_6() -> Outcome {
    let study = nonneg_study();
    let ao: Vec<f64> = study.aoadmm.iter().map(|r| r.time).collect();
    let als: Vec<f64> = study.als.iter().map(|r| r.time).collect();
    let ratio = median(&ao) / median(&als);
    Outcome::new(
        ratio <= C6_MAX_TIME_RATIO,
        format!(
            "median wall time AO-ADMM {:.3}s, ALS {:.3}s, ratio {ratio:.2} (need <= {C6_MAX_TIME_RATIO})",
            median(&ao),
            median(&als)
        ),
    )
}

fn cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_parafac2"))
        .args(args)
        .output()
        .expect("run cli");
    assert!(
        status.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (setup, seed, method, regs) in [
        ("1", "11", "aoadmm", vec!["a=nonneg", "b=nonneg", "d=nonneg"]),
        ("3", "12", "aoadmm", vec!["a=ridge:1", "b=tv:1", "d=ridge:1"]),
        ("2", "13", "aoadmm", vec!["a=ridge:1", "b=laplacian:10", "d=ridge:1"]),
        ("1", "14", "als", vec![]),
    ] {
        let data = p(&format!("d{seed}"));
        cli(&[
            "simulate", "--setup", setup, "--eta", "0.33", "--seed", seed, "--out", &data,
        ]);
        let mut fit = vec!["fit", "--method", method, "--rank", "3", "--no-trace"];
        for r in &regs {
            fit.extend(["--reg", r]);
        }
        let first = p(&format!("r{seed}"));
        let replayed = p(&format!("r{seed}_replay"));
        let mut run = fit.clone();
        run.extend(["--inits", "5", "--seed", seed, "--in", &data, "--out", &first]);
        cli(&run);
        let report = load_fit_report(Path::new(&first)).unwrap();
        let chosen = report.chosen_seed.to_string();
        let mut replay = fit.clone();
        replay.extend(["--replay-seed", &chosen, "--in", &data, "--out", &replayed]);
        cli(&replay);
        let again = load_fit_report(Path::new(&replayed)).unwrap();
        worst =
            worst.max((again.final_objective - report.final_objective).abs() / report.final_objective.abs().max(1.0));
        cases += 1;
    }
    Outcome::new(
        worst <= C7_TOL,
        format!("{cases} replayed fits, largest relative objective difference {worst:.1e}"),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "nonnegative recovery", criterion_1),
        (2, "structured regularization grid search", criterion_2),
        (3, "noise-free exact recovery", criterion_3),
        (4, "prox oracle suite", criterion_4),
        (5, "structural invariants", criterion_5),
        (6, "speed parity", criterion_6),
        (7, "replay determinism", criterion_7),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        ran += 1;
        println!(
            "[{}] criterion {id} ({name}): {} ({:.1}s)",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.passed {
            failed.push(id);
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        return ExitCode::SUCCESS;
    }
    println!("failed criteria: {failed:?}");
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
