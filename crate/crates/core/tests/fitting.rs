mod common;

use parafac2::runner::{fit_multi, FitMethod, MultiFitOptions};
use parafac2::simulate::{simulate, Simulation};
use parafac2::solver::EvolvingEstimate;
use parafac2::{
    fit_als, fit_ao_admm, fms, relative_sse, AlsConfig, FmsOptions, Matrix, Regularizer, Setup, SimSpec, SliceStack,
    SolverConfig, Termination,
};

fn small(setup: Setup, eta: f64, seed: u64) -> Simulation {
    simulate(&SimSpec::new(setup, eta, seed).with_dims(10, 12, 8, 2)).unwrap()
}

fn best_of_five(sim: &Simulation, method: FitMethod) -> (f64, f64) {
    let (est, _) = fit_multi(&sim.noisy, &method, MultiFitOptions::new(5, 1)).unwrap();
    let score = fms(&sim.truth, &est, FmsOptions::default()).unwrap().fms;
    (relative_sse(&sim.noisy, &est).unwrap(), score)
}

#[test]
fn nonnegative_aoadmm_recovers_noise_free_data() {
    let sim = small(Setup::TruncatedNormal, 0.0, 21);
    let cfg = SolverConfig::new(2).with_regularizers(Regularizer::NonNeg, Regularizer::NonNeg, Regularizer::NonNeg);
    let (sse, score) = best_of_five(&sim, FitMethod::AoAdmm(cfg));
    assert!(sse <= 1e-6, "relative SSE {sse:e}");
    assert!(score >= 0.999, "FMS {score}");
}

#[test]
fn als_recovers_noise_free_data() {
    let sim = small(Setup::TruncatedNormal, 0.0, 22);
    let (sse, score) = best_of_five(&sim, FitMethod::Als(AlsConfig::new(2)));
    assert!(sse <= 1e-6, "relative SSE {sse:e}");
    assert!(score >= 0.999, "FMS {score}");
}

#[test]
fn unregularized_solvers_agree_on_noise_free_data() {
    let sim = small(Setup::TruncatedNormal, 0.0, 23);
    let (ao, _) = best_of_five(&sim, FitMethod::AoAdmm(SolverConfig::new(2)));
    let (als, _) = best_of_five(&sim, FitMethod::Als(AlsConfig::new(2)));
    assert!((ao - als).abs() <= 1e-4, "{ao:e} vs {als:e}");
}

#[test]
fn returned_evolving_factors_share_their_cross_product() {
    let sim = small(Setup::PiecewiseConstant, 0.3, 24);
    let cfg = SolverConfig::new(2)
        .with_regularizers(
            Regularizer::Ridge(1.0),
            Regularizer::TotalVariation(1.0),
            Regularizer::Ridge(1.0),
        )
        .with_seed(4);
    let (est, _) = fit_ao_admm(&sim.noisy, &cfg, None).unwrap();
    let scale = est.b[0].tr_mul(&est.b[0]).norm();
    for k1 in 0..est.n_slices() {
        for k2 in 0..k1 {
            let gap = (est.b[k1].tr_mul(&est.b[k1]) - est.b[k2].tr_mul(&est.b[k2])).norm();
            assert!(gap <= 1e-8 * scale);
        }
    }
}

#[test]
fn regularized_estimate_honours_the_penalty() {
    let sim = small(Setup::TruncatedNormal, 0.2, 25);
    let mut cfg = SolverConfig::new(2).with_regularizers(Regularizer::NonNeg, Regularizer::NonNeg, Regularizer::NonNeg);
    cfg.evolving_estimate = EvolvingEstimate::Regularized;
    let (est, report) = fit_ao_admm(&sim.noisy, &cfg, None).unwrap();
    assert!(est.a.iter().chain(est.d.iter()).all(|v| *v >= 0.0));
    assert!(est.b.iter().all(|bk| bk.iter().all(|v| *v >= 0.0)));
    let last = report.iterations.last().unwrap();
    assert!(last.gaps.b_pf2.is_finite() && last.gaps.b_reg.is_finite());
}

#[test]
fn converged_fits_meet_both_stopping_conditions() {
    let sim = small(Setup::TruncatedNormal, 0.1, 26);
    let cfg = SolverConfig::new(2).with_regularizers(Regularizer::NonNeg, Regularizer::NonNeg, Regularizer::NonNeg);
    let (_, report) = fit_ao_admm(&sim.noisy, &cfg, None).unwrap();
    assert_eq!(report.termination, Termination::Converged);
    let n = report.iterations.len();
    assert!(n >= 2 && report.outer_iterations == n);
    let (prev, last) = (&report.iterations[n - 2], &report.iterations[n - 1]);
    assert!((prev.objective - last.objective).abs() <= cfg.outer_tol * prev.objective.abs());
    assert!(last.max_gap <= cfg.feasibility_tol);
    for rec in &report.iterations {
        let g = rec.gaps;
        assert!([g.a, g.b_reg, g.b_pf2, g.d].iter().all(|v| *v >= 0.0 && v.is_finite()));
        assert!(
            rec.inner.a <= cfg.inner_max_iter && rec.inner.b <= cfg.inner_max_iter && rec.inner.d <= cfg.inner_max_iter
        );
    }
}

#[test]
fn fits_are_deterministic_in_the_seed() {
    let sim = small(Setup::SmoothSpectra, 0.2, 27);
    let cfg = SolverConfig::new(2)
        .with_regularizers(
            Regularizer::Ridge(0.5),
            Regularizer::GraphLaplacian(2.0),
            Regularizer::Ridge(0.5),
        )
        .with_seed(99);
    let (f1, r1) = fit_ao_admm(&sim.noisy, &cfg, None).unwrap();
    let (f2, r2) = fit_ao_admm(&sim.noisy, &cfg, None).unwrap();
    assert_eq!(f1, f2);
    assert_eq!(r1.outer_iterations, r2.outer_iterations);
    assert!(r1.objectives().eq(r2.objectives()));
    let (_, r3) = fit_ao_admm(&sim.noisy, &cfg.clone().with_seed(100), None).unwrap();
    assert_ne!(r1.final_objective, r3.final_objective);
}

#[test]
fn unregularized_fit_is_scale_equivariant() {
    let sim = small(Setup::TruncatedNormal, 0.05, 28);
    let c = 7.5;
    let cfg = SolverConfig::new(2);
    let mut r = common::rng(5);
    let mut start = sim.truth.clone();
    start.a += common::uniform_matrix(&mut r, 10, 2, -0.3, 0.3);
    for bk in &mut start.b {
        *bk += common::uniform_matrix(&mut r, 12, 2, -0.3, 0.3);
    }
    let (f1, r1) = fit_ao_admm(&sim.noisy, &cfg, Some(&start)).unwrap();
    let mut scaled_start = start.clone();
    scaled_start.a *= c;
    let (f2, r2) = fit_ao_admm(&sim.noisy.scaled(c), &cfg, Some(&scaled_start)).unwrap();
    let ratio = r2.final_objective / (c * c * r1.final_objective);
    assert!((ratio - 1.0).abs() <= 1e-6, "objective ratio {ratio}");
    let mut truth = sim.truth.clone();
    truth.a *= c;
    let s1 = fms(&sim.truth, &f1, FmsOptions::default()).unwrap().fms;
    let s2 = fms(&truth, &f2, FmsOptions::default()).unwrap().fms;
    assert!((s1 - s2).abs() <= 1e-6, "{s1} vs {s2}");
}

#[test]
fn ragged_slices_are_supported() {
    let sim = small(Setup::TruncatedNormal, 0.0, 29);
    let slices: Vec<Matrix> = sim
        .noisy
        .slices()
        .iter()
        .enumerate()
        .map(|(k, x)| x.columns(0, 6 + k % 4).into_owned())
        .collect();
    let stack = SliceStack::new(slices).unwrap();
    let cfg = SolverConfig::new(2).with_regularizers(Regularizer::NonNeg, Regularizer::NonNeg, Regularizer::NonNeg);
    let (est, _) = fit_ao_admm(&stack, &cfg, None).unwrap();
    for (k, bk) in est.b.iter().enumerate() {
        assert_eq!(bk.nrows(), 6 + k % 4);
    }
    let (als, _) = fit_als(&stack, &AlsConfig::new(2), None).unwrap();
    assert!(relative_sse(&stack, &als).unwrap().is_finite());
}

#[test]
fn als_sse_never_increases() {
    for seed in 0..4 {
        let sim = small(Setup::PiecewiseConstant, 0.4, 30 + seed);
        for rank in [1, 2, 3] {
            let mut cfg = AlsConfig::new(rank).with_seed(seed);
            cfg.nonneg_d = seed % 2 == 0;
            let (est, report) = fit_als(&sim.noisy, &cfg, None).unwrap();
            let mut prev = report.initial_objective.unwrap_or(f64::INFINITY);
            for obj in report.objectives() {
                assert!(obj <= prev * (1.0 + 1e-12), "rank {rank}: {obj} after {prev}");
                prev = obj;
            }
            assert!(est.cross_product_gap() <= 1e-10 * est.b[0].tr_mul(&est.b[0]).norm());
        }
    }
}

#[test]
fn rank_above_slice_width_is_rejected() {
    let sim = small(Setup::TruncatedNormal, 0.0, 31);
    assert!(fit_ao_admm(&sim.noisy, &SolverConfig::new(13), None).is_err());
    assert!(fit_als(&sim.noisy, &AlsConfig::new(13), None).is_err());
}
