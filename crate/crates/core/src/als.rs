//! Classical PARAFAC2 ALS on the implicit form `B_k = P_k Δ`.
//!
//! Each iteration solves an orthogonal Procrustes problem per slice for
//! `P_k`, projects the data to the `I × R` slices `X_k P_k`, and performs one
//! cycle of CP least-squares updates `A → Δ → D` on the projected tensor.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraint::{orthonormal_polar_factor, Pf2ProjectionState};
use crate::error::{Error, Result};
use crate::linalg::{nnls_gram, SpdFactor};
use crate::report::{FitReport, IterationRecord, Termination};
use crate::solver::{check_rank, random_init, relative, relative_change};
use crate::tensor::{scale_columns, sq_frobenius, Matrix, Pf2Factors, SliceStack, STRUCTURE_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlsConfig {
    pub rank: usize,
    pub nonneg_a: bool,
    pub nonneg_d: bool,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub seed: u64,
}

impl AlsConfig {
    /// Defaults: nonnegative `D`, unconstrained `A`.
    pub fn new(rank: usize) -> Self {
        AlsConfig {
            rank,
            nonneg_a: false,
            nonneg_d: true,
            outer_max_iter: 1000,
            outer_tol: 1e-10,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::config("rank must be at least one"));
        }
        if !(self.outer_tol > 0.0 && self.outer_tol.is_finite()) {
            return Err(Error::config("outer_tol must be positive"));
        }
        Ok(())
    }
}

/// CP factors of the projected tensor: `Y_k ≈ A diag(d_k) Δᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    pub a: Matrix,
    pub delta: Matrix,
    pub d: Matrix,
}

impl CpFactors {
    /// `Σ_k ‖A diag(d_k) Δᵀ − Y_k‖²`.
    pub fn sse(&self, y: &[Matrix]) -> f64 {
        let delta_t = self.delta.transpose();
        y.iter()
            .enumerate()
            .map(|(k, yk)| {
                let model = scale_columns(&self.a, self.d.row(k).iter().copied()) * &delta_t;
                sq_frobenius(&(model - yk))
            })
            .sum()
    }
}

/// ALS iterate: the implicit evolving factors plus `A` and `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsState {
    pub a: Matrix,
    pub delta: Matrix,
    pub p: Vec<Matrix>,
    pub d: Matrix,
}

impl AlsState {
    pub fn factors(&self) -> Pf2Factors {
        Pf2Factors {
            a: self.a.clone(),
            d: self.d.clone(),
            b: self.p.iter().map(|pk| pk * &self.delta).collect(),
        }
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        let rank = self.delta.nrows();
        let eye = Matrix::identity(rank, rank);
        self.p
            .iter()
            .map(|pk| (pk.tr_mul(pk) - &eye).norm())
            .fold(0.0, f64::max)
    }
}

fn least_squares_rows(rhs: &Matrix, gram: Matrix, nonneg: bool) -> Matrix {
    if nonneg {
        let mut out = Matrix::zeros(rhs.nrows(), rhs.ncols());
        for i in 0..rhs.nrows() {
            let f = DVector::from_iterator(rhs.ncols(), rhs.row(i).iter().copied());
            out.set_row(i, &nnls_gram(&gram, &f).transpose());
        }
        out
    } else {
        SpdFactor::with_jitter(gram).solve_right(rhs)
    }
}

/// One round of least-squares updates of `A`, then `Δ`, then `D` on the
/// projected slices `y`. Nonnegativity on `A` or `D` is handled by NNLS.
pub fn cp_cycle(y: &[Matrix], f: &mut CpFactors, nonneg_a: bool, nonneg_d: bool) -> Result<()> {
    let rank = f.delta.nrows();
    if y.len() != f.d.nrows() || y.iter().any(|yk| yk.nrows() != f.a.nrows() || yk.ncols() != rank) {
        return Err(Error::shape("projected slices do not match the CP factors"));
    }

    // A: Σ_k Y_k Δ D_k against (ΔᵀΔ) ∗ (DᵀD)
    let dtd = f.d.tr_mul(&f.d);
    let mut rhs = Matrix::zeros(f.a.nrows(), rank);
    for (k, yk) in y.iter().enumerate() {
        rhs += scale_columns(&(yk * &f.delta), f.d.row(k).iter().copied());
    }
    let gram = f.delta.tr_mul(&f.delta).component_mul(&dtd);
    f.a = least_squares_rows(&rhs, gram, nonneg_a);

    // Δ: Σ_k Y_kᵀ A D_k against (AᵀA) ∗ (DᵀD)
    let mut rhs = Matrix::zeros(rank, rank);
    for (k, yk) in y.iter().enumerate() {
        rhs += scale_columns(&yk.tr_mul(&f.a), f.d.row(k).iter().copied());
    }
    let ata = f.a.tr_mul(&f.a);
    f.delta = SpdFactor::with_jitter(ata.component_mul(&dtd)).solve_right(&rhs);

    // D: row k solves (AᵀA ∗ ΔᵀΔ) d_k = diag(Aᵀ Y_k Δ)
    let gram = ata.component_mul(&f.delta.tr_mul(&f.delta));
    let mut rhs = Matrix::zeros(y.len(), rank);
    for (k, yk) in y.iter().enumerate() {
        let yd = yk * &f.delta;
        for r in 0..rank {
            rhs[(k, r)] = f.a.column(r).dot(&yd.column(r));
        }
    }
    f.d = least_squares_rows(&rhs, gram, nonneg_d);
    Ok(())
}

/// Fit an unregularized PARAFAC2 model by ALS.
///
/// Starts from `init` or from the same random scheme as the AO-ADMM solver.
pub fn fit_als(stack: &SliceStack, config: &AlsConfig, init: Option<&Pf2Factors>) -> Result<(Pf2Factors, FitReport)> {
    config.validate()?;
    check_rank(stack, config.rank)?;
    let start = Instant::now();
    let (mut cp, mut p) = match init {
        Some(f) => {
            if f.rank() != config.rank {
                return Err(Error::shape("initial factors have the wrong rank"));
            }
            f.check_compatible(stack)?;
            let mut proj = Pf2ProjectionState::from_factors(&f.b, vec![1.0; f.b.len()]);
            let mut delta = Matrix::zeros(f.rank(), f.rank());
            for (pk, bk) in proj.p.iter().zip(&f.b) {
                delta += pk.tr_mul(bk);
            }
            proj.delta = delta / f.b.len() as f64;
            (
                CpFactors {
                    a: f.a.clone(),
                    delta: proj.delta,
                    d: f.d.clone(),
                },
                proj.p,
            )
        }
        None => {
            let r = random_init(stack, config.rank, config.seed);
            (
                CpFactors {
                    a: r.a,
                    delta: r.delta,
                    d: r.d,
                },
                r.p,
            )
        }
    };

    let data_norm = stack.sq_norm();
    let slice_norms: Vec<f64> = stack.slices().iter().map(sq_frobenius).collect();
    let mut report = FitReport::new("als", config.seed);
    let initial = crate::solver::sse(
        stack,
        &AlsState {
            a: cp.a.clone(),
            delta: cp.delta.clone(),
            p: p.clone(),
            d: cp.d.clone(),
        }
        .factors(),
    );
    report.initial_objective = Some(initial);
    let mut previous = initial;
    let mut current = initial;

    for iteration in 1..=config.outer_max_iter {
        let delta_t = cp.delta.transpose();
        for (k, xk) in stack.slices().iter().enumerate() {
            let ad = scale_columns(&cp.a, cp.d.row(k).iter().copied());
            p[k] = orthonormal_polar_factor(&(xk.tr_mul(&ad) * &delta_t));
        }
        let y: Vec<Matrix> = stack.slices().iter().zip(&p).map(|(xk, pk)| xk * pk).collect();
        cp_cycle(&y, &mut cp, config.nonneg_a, config.nonneg_d)?;

        // ‖X_k − M P_kᵀ‖² = ‖X_k‖² − ‖X_k P_k‖² + ‖X_k P_k − M‖² for orthonormal P_k
        let projected_norm: f64 = y.iter().map(sq_frobenius).sum();
        current = (slice_norms.iter().sum::<f64>() - projected_norm + cp.sse(&y)).max(0.0);
        if !current.is_finite() {
            report.wall_time_secs = start.elapsed().as_secs_f64();
            return Err(Error::Diverged {
                iteration,
                report: Box::new(report),
            });
        }
        report.iterations.push(IterationRecord {
            iteration,
            objective: current,
            relative_sse: relative(current, data_norm),
            gaps: Default::default(),
            max_gap: 0.0,
            inner: Default::default(),
        });
        report.outer_iterations = iteration;
        let change = relative_change(previous, current);
        previous = current;
        if change <= config.outer_tol {
            report.termination = Termination::Converged;
            break;
        }
    }

    let state = AlsState {
        a: cp.a,
        delta: cp.delta,
        p,
        d: cp.d,
    };
    debug_assert!(state.max_orthonormality_error() <= STRUCTURE_TOL);
    let factors = state.factors();
    report.final_objective = current;
    report.final_relative_sse = relative(current, data_norm);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((factors, report))
}
