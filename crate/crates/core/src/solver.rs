//! AO-ADMM for regularized PARAFAC2.
//!
//! Each outer iteration updates the evolving mode `{B_k}`, then `A`, then
//! `{D_k}`, each by a few ADMM sweeps that alternate a closed-form
//! least-squares step on the data term with proximal steps on the split
//! variables. The evolving mode carries two splits: `Z_Bk` for the penalty on
//! `B_k` and `Y_Bk = P_k Δ` for the PARAFAC2 constraint.

use std::time::Instant;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::constraint::{orthonormal_polar_factor, project_pf2, Pf2ProjectionState};
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::prox::Regularizer;
pub use crate::report::{FeasibilityGaps, FitReport, InnerCounts, IterationRecord, Termination};
use crate::seed::rng_from_seed;
use crate::tensor::{scale_columns, sq_frobenius, Matrix, Pf2Factors, SliceStack};

/// Objective growth beyond this multiple of the reference counts as divergence.
const DIVERGENCE_FACTOR: f64 = 1e12;

/// Which estimate of `B_k` a fit returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvolvingEstimate {
    /// `Y_Bk = P_k Δ`, exactly satisfying the PARAFAC2 constraint.
    #[default]
    Projected,
    /// `Z_Bk`, exactly feasible for the penalty on `B`.
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub reg_a: Regularizer,
    pub reg_b: Regularizer,
    /// Nonnegativity is always enforced on `D` in addition to this penalty.
    pub reg_d: Regularizer,
    pub inner_max_iter: usize,
    pub inner_tol_abs: f64,
    pub inner_tol_rel: f64,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    /// Largest relative split gap accepted at convergence.
    pub feasibility_tol: f64,
    pub projection_sweeps: usize,
    pub seed: u64,
    pub evolving_estimate: EvolvingEstimate,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        SolverConfig {
            rank,
            reg_a: Regularizer::None,
            reg_b: Regularizer::None,
            reg_d: Regularizer::None,
            inner_max_iter: 5,
            inner_tol_abs: 1e-5,
            inner_tol_rel: 1e-5,
            outer_max_iter: 1000,
            outer_tol: 1e-10,
            feasibility_tol: 1e-4,
            projection_sweeps: 1,
            seed: 0,
            evolving_estimate: EvolvingEstimate::Projected,
        }
    }

    pub fn with_regularizers(mut self, a: Regularizer, b: Regularizer, d: Regularizer) -> Self {
        self.reg_a = a;
        self.reg_b = b;
        self.reg_d = d;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::config("rank must be at least one"));
        }
        if self.inner_max_iter == 0 {
            return Err(Error::config("inner_max_iter must be positive"));
        }
        if self.projection_sweeps == 0 {
            return Err(Error::config("projection_sweeps must be positive"));
        }
        for (name, tol) in [
            ("inner_tol_abs", self.inner_tol_abs),
            ("inner_tol_rel", self.inner_tol_rel),
            ("outer_tol", self.outer_tol),
            ("feasibility_tol", self.feasibility_tol),
        ] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {tol}")));
            }
        }
        self.reg_a.validate()?;
        self.reg_b.validate()?;
        self.reg_d.validate()
    }

    /// Validate against a dataset: every slice needs at least `rank` columns.
    pub fn validate_for(&self, stack: &SliceStack) -> Result<()> {
        self.validate()?;
        check_rank(stack, self.rank)
    }
}

pub(crate) fn check_rank(stack: &SliceStack, rank: usize) -> Result<()> {
    if rank == 0 {
        return Err(Error::config("rank must be at least one"));
    }
    let min_cols = stack.min_cols();
    if rank > min_cols {
        return Err(Error::config(format!(
            "rank {rank} exceeds the smallest slice width {min_cols}"
        )));
    }
    Ok(())
}

/// Splits and duals of the `A` mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AModeState {
    pub primal: Matrix,
    pub aux: Matrix,
    pub dual: Matrix,
    pub rho: f64,
}

/// Splits and duals of the evolving mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeState {
    pub primal: Vec<Matrix>,
    /// `Z_Bk`, the penalty split.
    pub aux: Vec<Matrix>,
    pub dual_aux: Vec<Matrix>,
    /// `Y_Bk = P_k Δ`, the PARAFAC2 split.
    pub projected: Vec<Matrix>,
    pub dual_pf2: Vec<Matrix>,
    /// Holds `P_k`, `Δ` and the per-slice `ρ_Bk`.
    pub projection: Pf2ProjectionState,
}

impl BModeState {
    pub fn rho(&self) -> &[f64] {
        &self.projection.rho
    }

    pub fn set_rho(&mut self, rho: Vec<f64>) {
        self.projection.rho = rho;
    }
}

/// Splits and duals of the `D` mode; row `k` is `D_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DModeState {
    pub primal: Matrix,
    pub aux: Matrix,
    pub dual: Matrix,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub a: AModeState,
    pub b: BModeState,
    pub d: DModeState,
}

/// A random starting point drawn by [`random_init`].
pub(crate) struct RandomInit {
    pub a: Matrix,
    pub delta: Matrix,
    pub p: Vec<Matrix>,
    pub d: Matrix,
}

/// Draw starting factors: `A` and `Δ` standard normal, `P_k` the polar
/// factor of a standard normal draw, `D` uniform on `[0.1, 1.1)`.
pub(crate) fn random_init(stack: &SliceStack, rank: usize, seed: u64) -> RandomInit {
    let mut rng = rng_from_seed(seed);
    let mut normal = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let a = normal(stack.n_rows(), rank);
    let delta = normal(rank, rank);
    let p = stack
        .col_counts()
        .into_iter()
        .map(|j| orthonormal_polar_factor(&normal(j, rank)))
        .collect();
    let uniform = Uniform::new(0.1, 1.1).expect("valid range");
    let d = Matrix::from_fn(stack.n_slices(), rank, |_, _| uniform.sample(&mut rng));
    RandomInit { a, delta, p, d }
}

impl AdmmState {
    fn from_parts(a: Matrix, d: Matrix, projection: Pf2ProjectionState, b: Vec<Matrix>) -> Self {
        let zeros_like = |m: &Matrix| Matrix::zeros(m.nrows(), m.ncols());
        let k = b.len();
        AdmmState {
            a: AModeState {
                dual: zeros_like(&a),
                aux: a.clone(),
                primal: a,
                rho: 1.0,
            },
            b: BModeState {
                dual_aux: b.iter().map(zeros_like).collect(),
                dual_pf2: b.iter().map(zeros_like).collect(),
                aux: b.clone(),
                projected: projection.materialize(),
                primal: b,
                projection,
            },
            d: DModeState {
                dual: zeros_like(&d),
                aux: d.clone(),
                primal: d,
                rho: vec![1.0; k],
            },
        }
    }

    /// Initialize every split from given factors, with zero duals.
    ///
    /// `P_k` is the polar factor of `B_k` and `Δ` the mean of `P_kᵀB_k`, so a
    /// collection that already satisfies the constraint is reproduced.
    pub fn from_factors(f: &Pf2Factors) -> Self {
        let k = f.b.len();
        let mut projection = Pf2ProjectionState::from_factors(&f.b, vec![1.0; k]);
        let mut delta = Matrix::zeros(f.rank(), f.rank());
        for (pk, bk) in projection.p.iter().zip(&f.b) {
            delta += pk.tr_mul(bk);
        }
        projection.delta = delta / k as f64;
        AdmmState::from_parts(f.a.clone(), f.d.clone(), projection, f.b.clone())
    }

    pub(crate) fn from_random(init: RandomInit) -> Self {
        let k = init.p.len();
        let projection = Pf2ProjectionState {
            p: init.p,
            delta: init.delta,
            rho: vec![1.0; k],
        };
        let b = projection.materialize();
        AdmmState::from_parts(init.a, init.d, projection, b)
    }

    /// The constraint-satisfying estimate: `A ← Z_A`, `D ← Z_D` and `B`
    /// chosen by `which`.
    pub fn estimate(&self, which: EvolvingEstimate) -> Pf2Factors {
        let b = match which {
            EvolvingEstimate::Projected => self.b.projected.clone(),
            EvolvingEstimate::Regularized => self.b.aux.clone(),
        };
        Pf2Factors {
            a: self.a.aux.clone(),
            d: self.d.aux.clone(),
            b,
        }
    }

    pub fn gaps(&self) -> FeasibilityGaps {
        FeasibilityGaps {
            a: relative_gap(std::slice::from_ref(&self.a.primal), std::slice::from_ref(&self.a.aux)),
            b_reg: relative_gap(&self.b.primal, &self.b.aux),
            b_pf2: relative_gap(&self.b.primal, &self.b.projected),
            d: relative_gap(std::slice::from_ref(&self.d.primal), std::slice::from_ref(&self.d.aux)),
        }
    }
}

fn relative_gap(primal: &[Matrix], aux: &[Matrix]) -> f64 {
    let diff: f64 = primal.iter().zip(aux).map(|(p, z)| sq_frobenius(&(p - z))).sum();
    let norm: f64 = aux.iter().map(sq_frobenius).sum();
    if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    }
}

/// Adaptive ADMM penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhos {
    pub a: f64,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
}

fn positive_rho(value: f64, what: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Degenerate(format!(
            "{what} is {value}; the factors feeding it are zero"
        )))
    }
}

/// `ρ_Bk = ‖A diag(d_k)‖²/R`.
pub fn rho_b(a: &Matrix, d: &Matrix) -> Result<Vec<f64>> {
    let rank = a.ncols() as f64;
    let col_sq: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    (0..d.nrows())
        .map(|k| {
            let v: f64 = d.row(k).iter().zip(&col_sq).map(|(dk, c)| dk * dk * c).sum();
            positive_rho(v / rank, &format!("ρ_B{k}"))
        })
        .collect()
}

/// `ρ_A = Σ_k ‖B_k diag(d_k)‖²/R`.
pub fn rho_a(b: &[Matrix], d: &Matrix) -> Result<f64> {
    let rank = d.ncols() as f64;
    let mut total = 0.0;
    for (k, bk) in b.iter().enumerate() {
        for (r, col) in bk.column_iter().enumerate() {
            total += d[(k, r)].powi(2) * col.norm_squared();
        }
    }
    positive_rho(total / rank, "ρ_A")
}

/// `ρ_Dk = trace(AᵀA ∗ B_kᵀB_k)/R`.
pub fn rho_d(a: &Matrix, b: &[Matrix]) -> Result<Vec<f64>> {
    let rank = a.ncols() as f64;
    let col_sq: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    b.iter()
        .enumerate()
        .map(|(k, bk)| {
            let v: f64 = bk.column_iter().zip(&col_sq).map(|(c, a2)| c.norm_squared() * a2).sum();
            positive_rho(v / rank, &format!("ρ_D{k}"))
        })
        .collect()
}

pub fn compute_rhos(a: &Matrix, b: &[Matrix], d: &Matrix) -> Result<Rhos> {
    Ok(Rhos {
        a: rho_a(b, d)?,
        b: rho_b(a, d)?,
        d: rho_d(a, b)?,
    })
}

/// Data-term prox for one evolving factor, factored once per outer iteration.
///
/// The Gram matrix `D_k AᵀA D_k + ρI` has condition number at most `R + 1`
/// for the adaptive `ρ`, so its explicit inverse is used.
struct BLossProx {
    data: Matrix,
    half_rho: f64,
    gram_inv: Matrix,
}

impl BLossProx {
    fn new(xta: &Matrix, ata: &Matrix, d_k: &[f64], rho: f64) -> Result<Self> {
        let rank = ata.nrows();
        let data = scale_columns(xta, d_k.iter().copied());
        let mut gram = Matrix::from_fn(rank, rank, |r, s| d_k[r] * ata[(r, s)] * d_k[s]);
        for r in 0..rank {
            gram[(r, r)] += rho;
        }
        Ok(BLossProx {
            data,
            half_rho: 0.5 * rho,
            gram_inv: SpdFactor::new(gram)?.inverse(),
        })
    }

    fn apply(&self, m: &Matrix) -> Matrix {
        let mut rhs = self.data.clone();
        rhs.zip_apply(m, |r, v| *r += self.half_rho * v);
        rhs * &self.gram_inv
    }
}

/// Minimizer of `‖A D_k B_kᵀ − X_k‖² + (ρ/2)‖B_k − M₁‖² + (ρ/2)‖B_k − M₂‖²`
/// given `M = M₁ + M₂`:
/// `(X_kᵀ A D_k + (ρ/2) M)(D_k AᵀA D_k + ρI)⁻¹`.
pub fn b_loss_prox(x_k: &Matrix, a: &Matrix, d_k: &[f64], m: &Matrix, rho: f64) -> Result<Matrix> {
    check_loss_shapes(a.ncols(), d_k.len(), rho)?;
    if x_k.nrows() != a.nrows() || m.nrows() != x_k.ncols() || m.ncols() != a.ncols() {
        return Err(Error::shape("b_loss_prox operands disagree"));
    }
    let prox = BLossProx::new(&x_k.tr_mul(a), &a.tr_mul(a), d_k, rho)?;
    Ok(prox.apply(m))
}

struct ALossProx {
    data: Matrix,
    half_rho: f64,
    factor: SpdFactor,
}

impl ALossProx {
    fn new(stack: &SliceStack, b: &[Matrix], d: &Matrix, rho: f64) -> Result<Self> {
        let rank = d.ncols();
        let mut data = Matrix::zeros(stack.n_rows(), rank);
        let mut gram = Matrix::zeros(rank, rank);
        for (k, (xk, bk)) in stack.slices().iter().zip(b).enumerate() {
            let gamma = scale_columns(bk, d.row(k).iter().copied());
            data += xk * &gamma;
            gram += gamma.tr_mul(&gamma);
        }
        for r in 0..rank {
            gram[(r, r)] += 0.5 * rho;
        }
        Ok(ALossProx {
            data,
            half_rho: 0.5 * rho,
            factor: SpdFactor::new(gram)?,
        })
    }

    fn apply(&self, m: &Matrix) -> Matrix {
        self.factor.solve_right(&(&self.data + m * self.half_rho))
    }
}

/// Minimizer of `Σ_k ‖A D_k B_kᵀ − X_k‖² + (ρ/2)‖A − M‖²`:
/// `(Σ X_kΓ_k + (ρ/2)M)(Σ Γ_kᵀΓ_k + (ρ/2)I)⁻¹` with `Γ_k = B_k D_k`.
pub fn a_loss_prox(stack: &SliceStack, b: &[Matrix], d: &Matrix, m: &Matrix, rho: f64) -> Result<Matrix> {
    check_loss_shapes(d.ncols(), m.ncols(), rho)?;
    let factors = Pf2Factors::new(m.clone(), d.clone(), b.to_vec())?;
    factors.check_compatible(stack)?;
    Ok(ALossProx::new(stack, b, d, rho)?.apply(m))
}

struct DLossProx {
    xi: DVector<f64>,
    half_rho: f64,
    factor: SpdFactor,
}

impl DLossProx {
    fn new(x_k: &Matrix, a: &Matrix, ata: &Matrix, b_k: &Matrix, rho: f64) -> Result<Self> {
        let rank = a.ncols();
        let btb = b_k.tr_mul(b_k);
        let mut gram = ata.component_mul(&btb);
        for r in 0..rank {
            gram[(r, r)] += 0.5 * rho;
        }
        // ξ_r = a_rᵀ X_k b_r
        let xb = x_k * b_k;
        let xi = DVector::from_fn(rank, |r, _| a.column(r).dot(&xb.column(r)));
        Ok(DLossProx {
            xi,
            half_rho: 0.5 * rho,
            factor: SpdFactor::new(gram)?,
        })
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(&(&self.xi + v * self.half_rho))
    }
}

/// Minimizer over the diagonal `d` of `‖A diag(d) B_kᵀ − X_k‖² + (ρ/2)‖d − v‖²`:
/// `(AᵀA ∗ B_kᵀB_k + (ρ/2)I)⁻¹(ξ + (ρ/2)v)` with `ξ = diag(AᵀX_kB_k)`.
pub fn d_loss_prox(x_k: &Matrix, a: &Matrix, b_k: &Matrix, v: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_loss_shapes(a.ncols(), v.len(), rho)?;
    if b_k.ncols() != a.ncols() || x_k.nrows() != a.nrows() || x_k.ncols() != b_k.nrows() {
        return Err(Error::shape("d_loss_prox operands disagree"));
    }
    let prox = DLossProx::new(x_k, a, &a.tr_mul(a), b_k, rho)?;
    Ok(prox.apply(&DVector::from_column_slice(v)).as_slice().to_vec())
}

fn check_loss_shapes(rank: usize, other: usize, rho: f64) -> Result<()> {
    if rank != other {
        return Err(Error::shape(format!("rank {rank} does not match {other}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Degenerate(format!("ADMM penalty must be positive, got {rho}")));
    }
    Ok(())
}

/// Residual-based inner stopping test for one split.
struct SplitResiduals {
    primal: f64,
    dual: f64,
    primal_scale: f64,
    dual_scale: f64,
    entries: usize,
}

impl SplitResiduals {
    fn satisfied(&self, abs: f64, rel: f64) -> bool {
        let root_n = (self.entries as f64).sqrt();
        self.primal <= root_n * abs + rel * self.primal_scale && self.dual <= root_n * abs + rel * self.dual_scale
    }
}

/// Inner ADMM sweeps for the evolving mode. Returns the number of sweeps run.
///
/// Uses `state.b.projection.rho` as the per-slice penalties.
pub fn admm_b(
    stack: &SliceStack,
    a: &Matrix,
    d: &Matrix,
    state: &mut BModeState,
    config: &SolverConfig,
) -> Result<usize> {
    let k_count = stack.n_slices();
    if state.primal.len() != k_count || state.projection.rho.len() != k_count || d.nrows() != k_count {
        return Err(Error::shape("evolving-mode state does not match the data"));
    }
    let ata = a.tr_mul(a);
    let rho = state.projection.rho.clone();
    let losses = stack
        .slices()
        .iter()
        .enumerate()
        .map(|(k, xk)| {
            let dk: Vec<f64> = d.row(k).iter().copied().collect();
            BLossProx::new(&xk.tr_mul(a), &ata, &dk, rho[k])
        })
        .collect::<Result<Vec<_>>>()?;
    let entries: usize = state.primal.iter().map(|b| b.len()).sum();
    let mut rhs: Vec<Matrix> = state.primal.clone();
    let mut scratch: Vec<Matrix> = state.primal.clone();
    let mut targets: Vec<Matrix> = state.primal.clone();
    let (tol_abs, tol_rel) = (config.inner_tol_abs, config.inner_tol_rel);

    let mut sweeps = 0;
    for _ in 0..config.inner_max_iter {
        sweeps += 1;
        let mut aux_change = 0.0;
        for k in 0..k_count {
            let loss = &losses[k];
            let h = loss.half_rho;
            let out = rhs[k].as_mut_slice();
            let parts = (
                loss.data.as_slice(),
                state.aux[k].as_slice(),
                state.dual_aux[k].as_slice(),
                state.projected[k].as_slice(),
                state.dual_pf2[k].as_slice(),
            );
            for (i, o) in out.iter_mut().enumerate() {
                *o = parts.0[i] + h * (parts.1[i] - parts.2[i] + parts.3[i] - parts.4[i]);
            }
            state.primal[k].gemm(1.0, &rhs[k], &loss.gram_inv, 0.0);

            scratch[k].copy_from(&state.primal[k]);
            scratch[k] += &state.dual_aux[k];
            config.reg_b.prox_into(&scratch[k], rho[k], &mut rhs[k]);
            aux_change += rho[k] * rho[k] * sq_distance(&rhs[k], &state.aux[k]);
            std::mem::swap(&mut state.aux[k], &mut rhs[k]);

            targets[k].copy_from(&state.primal[k]);
            targets[k] += &state.dual_pf2[k];
        }
        project_pf2(&targets, &mut state.projection, config.projection_sweeps)?;

        let mut projected_change = 0.0;
        let (mut primal_sq, mut aux_sq, mut projected_sq) = (0.0, 0.0, 0.0);
        let (mut reg_res, mut pf2_res, mut dual_aux_sq, mut dual_pf2_sq) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..k_count {
            scratch[k].gemm(1.0, &state.projection.p[k], &state.projection.delta, 0.0);
            projected_change += rho[k] * rho[k] * sq_distance(&scratch[k], &state.projected[k]);
            std::mem::swap(&mut state.projected[k], &mut scratch[k]);

            let primal = state.primal[k].as_slice();
            let aux = state.aux[k].as_slice();
            let projected = state.projected[k].as_slice();
            let dual_aux = state.dual_aux[k].as_mut_slice();
            let dual_pf2 = state.dual_pf2[k].as_mut_slice();
            let (mut ra, mut rp, mut da, mut dp) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..primal.len() {
                let ga = primal[i] - aux[i];
                let gp = primal[i] - projected[i];
                dual_aux[i] += ga;
                dual_pf2[i] += gp;
                ra += ga * ga;
                rp += gp * gp;
                da += dual_aux[i] * dual_aux[i];
                dp += dual_pf2[i] * dual_pf2[i];
                primal_sq += primal[i] * primal[i];
                aux_sq += aux[i] * aux[i];
                projected_sq += projected[i] * projected[i];
            }
            let r2 = rho[k] * rho[k];
            reg_res += ra;
            pf2_res += rp;
            dual_aux_sq += r2 * da;
            dual_pf2_sq += r2 * dp;
        }

        let primal_norm = primal_sq.sqrt();
        let reg = SplitResiduals {
            primal: reg_res.sqrt(),
            dual: aux_change.sqrt(),
            primal_scale: primal_norm.max(aux_sq.sqrt()),
            dual_scale: dual_aux_sq.sqrt(),
            entries,
        };
        let pf2 = SplitResiduals {
            primal: pf2_res.sqrt(),
            dual: projected_change.sqrt(),
            primal_scale: primal_norm.max(projected_sq.sqrt()),
            dual_scale: dual_pf2_sq.sqrt(),
            entries,
        };
        if reg.satisfied(tol_abs, tol_rel) && pf2.satisfied(tol_abs, tol_rel) {
            break;
        }
    }
    Ok(sweeps)
}

fn sq_distance(x: &Matrix, y: &Matrix) -> f64 {
    x.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum()
}

/// Inner ADMM sweeps for `A`, with penalty `state.rho`.
pub fn admm_a(
    stack: &SliceStack,
    b: &[Matrix],
    d: &Matrix,
    state: &mut AModeState,
    config: &SolverConfig,
) -> Result<usize> {
    if state.primal.nrows() != stack.n_rows() || b.len() != stack.n_slices() {
        return Err(Error::shape("A-mode state does not match the data"));
    }
    let rho = state.rho;
    let loss = ALossProx::new(stack, b, d, rho)?;
    let entries = state.primal.len();
    let mut sweeps = 0;
    for _ in 0..config.inner_max_iter {
        sweeps += 1;
        let old_aux = state.aux.clone();
        state.primal = loss.apply(&(&state.aux - &state.dual));
        state.aux = config.reg_a.prox_unchecked(&(&state.primal + &state.dual), rho);
        state.dual += &state.primal - &state.aux;

        let res = SplitResiduals {
            primal: (&state.primal - &state.aux).norm(),
            dual: rho * (&state.aux - &old_aux).norm(),
            primal_scale: state.primal.norm().max(state.aux.norm()),
            dual_scale: rho * state.dual.norm(),
            entries,
        };
        if res.satisfied(config.inner_tol_abs, config.inner_tol_rel) {
            break;
        }
    }
    Ok(sweeps)
}

/// Inner ADMM sweeps for the `D_k`, with penalties `state.rho`.
///
/// The penalty split is always intersected with `D ≥ 0`.
pub fn admm_d(
    stack: &SliceStack,
    a: &Matrix,
    b: &[Matrix],
    state: &mut DModeState,
    config: &SolverConfig,
) -> Result<usize> {
    let k_count = stack.n_slices();
    if state.primal.nrows() != k_count || state.rho.len() != k_count || b.len() != k_count {
        return Err(Error::shape("D-mode state does not match the data"));
    }
    let ata = a.tr_mul(a);
    let losses = stack
        .slices()
        .iter()
        .zip(b)
        .zip(&state.rho)
        .map(|((xk, bk), &rho)| DLossProx::new(xk, a, &ata, bk, rho))
        .collect::<Result<Vec<_>>>()?;
    let rank = state.primal.ncols();
    let entries = state.primal.len();

    let mut sweeps = 0;
    for _ in 0..config.inner_max_iter {
        sweeps += 1;
        let old_aux = state.aux.clone();
        for (k, loss) in losses.iter().enumerate() {
            let rho = state.rho[k];
            let target = DVector::from_iterator(
                rank,
                state
                    .aux
                    .row(k)
                    .iter()
                    .zip(state.dual.row(k).iter())
                    .map(|(z, mu)| z - mu),
            );
            let dk = loss.apply(&target);
            state.primal.set_row(k, &dk.transpose());
            let shifted = Matrix::from_fn(1, rank, |_, r| dk[r] + state.dual[(k, r)]);
            let zk = config.reg_d.prox_nonneg_unchecked(&shifted, rho);
            state.aux.set_row(k, &zk.row(0));
        }
        state.dual += &state.primal - &state.aux;

        let mut dual_res = 0.0;
        let mut dual_scale = 0.0;
        for k in 0..k_count {
            let rho2 = state.rho[k].powi(2);
            dual_res += rho2 * (state.aux.row(k) - old_aux.row(k)).norm_squared();
            dual_scale += rho2 * state.dual.row(k).norm_squared();
        }
        let res = SplitResiduals {
            primal: (&state.primal - &state.aux).norm(),
            dual: dual_res.sqrt(),
            primal_scale: state.primal.norm().max(state.aux.norm()),
            dual_scale: dual_scale.sqrt(),
            entries,
        };
        if res.satisfied(config.inner_tol_abs, config.inner_tol_rel) {
            break;
        }
    }
    Ok(sweeps)
}

/// Sum of squared residuals `Σ_k ‖A D_k B_kᵀ − X_k‖²`.
pub fn sse(stack: &SliceStack, factors: &Pf2Factors) -> f64 {
    stack
        .slices()
        .iter()
        .enumerate()
        .map(|(k, xk)| sq_frobenius(&(factors.a_scaled(k) * factors.b[k].transpose() - xk)))
        .sum()
}

/// `Σ_k ‖A D_k B_kᵀ − X_k‖² + g_A(A) + Σ_k [g_B(B_k) + g_D(D_k)]`.
pub fn regularized_objective(
    stack: &SliceStack,
    factors: &Pf2Factors,
    reg_a: &Regularizer,
    reg_b: &Regularizer,
    reg_d: &Regularizer,
) -> Result<f64> {
    factors.check_compatible(stack)?;
    Ok(sse(stack, factors) + penalties(&factors.a, &factors.b, &factors.d, reg_a, reg_b, reg_d))
}

fn penalties(
    a: &Matrix,
    b: &[Matrix],
    d: &Matrix,
    reg_a: &Regularizer,
    reg_b: &Regularizer,
    reg_d: &Regularizer,
) -> f64 {
    let pa = reg_a.penalty(a);
    let pb: f64 = b.iter().map(|bk| reg_b.penalty(bk)).sum();
    let pd: f64 = (0..d.nrows())
        .map(|k| reg_d.penalty(&Matrix::from_fn(1, d.ncols(), |_, r| d[(k, r)])))
        .sum();
    pa + pb + pd
}

/// Objective monitored by the outer loop: data fit of the returned estimate
/// plus the penalties evaluated on the penalty splits.
fn monitored_objective(sse: f64, state: &AdmmState, config: &SolverConfig) -> f64 {
    sse + penalties(
        &state.a.aux,
        &state.b.aux,
        &state.d.aux,
        &config.reg_a,
        &config.reg_b,
        &config.reg_d,
    )
}

/// Fit a regularized PARAFAC2 model by AO-ADMM.
///
/// Without `init`, the starting point is drawn from `config.seed`. Returned
/// factors are the split variables: `A ← Z_A`, `D ← Z_D` and `B_k` per
/// `config.evolving_estimate`.
pub fn fit_ao_admm(
    stack: &SliceStack,
    config: &SolverConfig,
    init: Option<&Pf2Factors>,
) -> Result<(Pf2Factors, FitReport)> {
    config.validate_for(stack)?;
    let start = Instant::now();
    let mut state = match init {
        Some(f) => {
            if f.rank() != config.rank {
                return Err(Error::shape(format!(
                    "initial factors have rank {}, config asks for {}",
                    f.rank(),
                    config.rank
                )));
            }
            f.check_compatible(stack)?;
            AdmmState::from_factors(f)
        }
        None => AdmmState::from_random(random_init(stack, config.rank, config.seed)),
    };
    let data_norm = stack.sq_norm();
    let mut report = FitReport::new("aoadmm", config.seed);

    let mut estimate = state.estimate(config.evolving_estimate);
    let mut current_sse = sse(stack, &estimate);
    let initial = monitored_objective(current_sse, &state, config);
    report.initial_objective = initial.is_finite().then_some(initial);
    let mut reference = report.initial_objective.unwrap_or(current_sse);
    let mut previous = initial;
    let mut objective = initial;

    for iteration in 1..=config.outer_max_iter {
        state.b.set_rho(rho_b(&state.a.primal, &state.d.primal)?);
        let inner_b = admm_b(stack, &state.a.primal, &state.d.primal, &mut state.b, config)?;
        state.a.rho = rho_a(&state.b.primal, &state.d.primal)?;
        let inner_a = admm_a(stack, &state.b.primal, &state.d.primal, &mut state.a, config)?;
        state.d.rho = rho_d(&state.a.primal, &state.b.primal)?;
        let inner_d = admm_d(stack, &state.a.primal, &state.b.primal, &mut state.d, config)?;

        estimate = state.estimate(config.evolving_estimate);
        current_sse = sse(stack, &estimate);
        objective = monitored_objective(current_sse, &state, config);
        let gaps = state.gaps();
        report.iterations.push(IterationRecord {
            iteration,
            objective,
            relative_sse: relative(current_sse, data_norm),
            gaps,
            max_gap: gaps.max(),
            inner: InnerCounts {
                b: inner_b,
                a: inner_a,
                d: inner_d,
            },
        });
        report.outer_iterations = iteration;

        if !reference.is_finite() || reference <= 0.0 {
            reference = objective;
        }
        if !objective.is_finite() || objective > DIVERGENCE_FACTOR * reference.max(f64::MIN_POSITIVE) {
            report.final_objective = objective;
            report.final_relative_sse = relative(current_sse, data_norm);
            report.wall_time_secs = start.elapsed().as_secs_f64();
            return Err(Error::Diverged {
                iteration,
                report: Box::new(report),
            });
        }

        let change = relative_change(previous, objective);
        previous = objective;
        if change <= config.outer_tol && gaps.max() <= config.feasibility_tol {
            report.termination = Termination::Converged;
            break;
        }
    }

    report.final_objective = objective;
    report.final_relative_sse = relative(current_sse, data_norm);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((estimate, report))
}

pub(crate) fn relative(value: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        value / norm
    } else {
        value
    }
}

pub(crate) fn relative_change(previous: f64, current: f64) -> f64 {
    if !previous.is_finite() || !current.is_finite() {
        return f64::INFINITY;
    }
    if previous == current {
        return 0.0;
    }
    (previous - current).abs() / previous.abs()
}
