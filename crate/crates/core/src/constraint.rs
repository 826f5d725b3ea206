//! Approximate projection onto collections with a constant cross product.
//!
//! The PARAFAC2 constraint `B_iᵀB_i = B_jᵀB_j` is parameterized as
//! `Y_k = P_k Δ` with orthonormal-column `P_k`. Projecting a collection
//! `{W_k}` under per-slice weights `ρ_k` is done by block coordinate descent
//! on `Σ_k (ρ_k/2)‖P_k Δ − W_k‖²`: each `P_k` is an orthogonal Procrustes
//! solution and `Δ` is the weighted mean of `P_kᵀW_k`.

use crate::error::{Error, Result};
use crate::tensor::{sq_frobenius, Matrix};

/// `UVᵀ` from the economy SVD `M = UΣVᵀ`.
///
/// This maximizes `trace(PᵀM)` over all `P` with orthonormal columns. The
/// SVD is computed by one-sided Jacobi rotations, which is fast and accurate
/// for the tall, thin matrices met here. Null directions of `M` are filled
/// with an orthonormal completion, so the result always has orthonormal
/// columns.
pub fn orthonormal_polar_factor(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols, "polar factor needs a tall matrix");
    let mut u = m.clone();
    let mut v = Matrix::identity(cols, cols);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (cp, cq) = (u.column(p), u.column(q));
                let alpha = cp.norm_squared();
                let beta = cq.norm_squared();
                let gamma = cp.dot(&cq);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate_columns(&mut u, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let mut deficient = Vec::new();
    for (i, &s) in sigma.iter().enumerate() {
        if s > NULL_DIRECTION * sigma_max && s.is_finite() {
            u.column_mut(i).unscale_mut(s);
        } else {
            deficient.push(i);
        }
    }
    let mut settled: Vec<usize> = (0..cols).filter(|c| !deficient.contains(c)).collect();
    for &i in &deficient {
        complete_column(&mut u, i, &settled);
        settled.push(i);
    }
    u * v.transpose()
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Columns whose norm falls below this fraction of the largest are treated as null.
const NULL_DIRECTION: f64 = 1e-100;

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Replace column `i` by a unit vector orthogonal to the `settled` columns.
fn complete_column(u: &mut Matrix, i: usize, settled: &[usize]) {
    let rows = u.nrows();
    for e in 0..rows {
        let mut cand = nalgebra::DVector::zeros(rows);
        cand[e] = 1.0;
        for _ in 0..2 {
            for &c in settled {
                let proj = u.column(c).dot(&cand);
                cand.axpy(-proj, &u.column(c), 1.0);
            }
        }
        let n = cand.norm();
        if n > 0.5 {
            u.set_column(i, &(cand / n));
            return;
        }
    }
    unreachable!("a tall matrix always admits an orthonormal completion");
}

/// Carried state of the projection: `P_k`, `Δ` and the weights `ρ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pf2ProjectionState {
    pub p: Vec<Matrix>,
    pub delta: Matrix,
    pub rho: Vec<f64>,
}

impl Pf2ProjectionState {
    /// Start from `Δ = I` and `P_k` the polar factor of `B_k`.
    pub fn from_factors(b: &[Matrix], rho: Vec<f64>) -> Self {
        let rank = b.first().map_or(0, |m| m.ncols());
        Pf2ProjectionState {
            p: b.iter().map(orthonormal_polar_factor).collect(),
            delta: Matrix::identity(rank, rank),
            rho,
        }
    }

    /// `Y_k = P_k Δ`.
    pub fn materialize(&self) -> Vec<Matrix> {
        self.p.iter().map(|pk| pk * &self.delta).collect()
    }

    /// `Σ_k (ρ_k/2)‖P_k Δ − W_k‖²`.
    pub fn weighted_objective(&self, w: &[Matrix]) -> f64 {
        self.p
            .iter()
            .zip(w)
            .zip(&self.rho)
            .map(|((pk, wk), &rho)| 0.5 * rho * sq_frobenius(&(pk * &self.delta - wk)))
            .sum()
    }

    fn check(&self, w: &[Matrix]) -> Result<()> {
        let rank = self.delta.nrows();
        if self.delta.ncols() != rank {
            return Err(Error::shape("Δ must be square"));
        }
        if w.len() != self.p.len() || w.len() != self.rho.len() {
            return Err(Error::shape(format!(
                "projection of {} matrices with state for {} slices and {} weights",
                w.len(),
                self.p.len(),
                self.rho.len()
            )));
        }
        for (k, wk) in w.iter().enumerate() {
            if wk.ncols() != rank || wk.nrows() < rank {
                return Err(Error::shape(format!(
                    "W_{k} is {}×{}, need J_k ≥ R = {rank} columns",
                    wk.nrows(),
                    wk.ncols()
                )));
            }
        }
        if self.rho.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Degenerate("projection weights must be positive".into()));
        }
        Ok(())
    }
}

/// Run `sweeps` rounds of the alternating `P_k` / `Δ` updates for targets `w`.
///
/// `state.delta` is used as the warm start. The caller forms the projected
/// collection with [`Pf2ProjectionState::materialize`].
pub fn project_pf2(w: &[Matrix], state: &mut Pf2ProjectionState, sweeps: usize) -> Result<()> {
    state.check(w)?;
    let total: f64 = state.rho.iter().sum();
    for _ in 0..sweeps.max(1) {
        let delta_t = state.delta.transpose();
        for (pk, wk) in state.p.iter_mut().zip(w) {
            *pk = orthonormal_polar_factor(&(wk * &delta_t));
        }
        let mut acc = Matrix::zeros(state.delta.nrows(), state.delta.ncols());
        for ((pk, wk), &rho) in state.p.iter().zip(w).zip(&state.rho) {
            acc += pk.tr_mul(wk) * rho;
        }
        state.delta = acc / total;
    }
    Ok(())
}
