//! Fit and recovery metrics.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::sse;
use crate::tensor::{Pf2Factors, SliceStack};

/// `Σ_k ‖A D_k B_kᵀ − X_k‖² / Σ_k ‖X_k‖²`.
pub fn relative_sse(stack: &SliceStack, factors: &Pf2Factors) -> Result<f64> {
    factors.check_compatible(stack)?;
    let norm = stack.sq_norm();
    if norm == 0.0 {
        return Err(Error::ZeroData);
    }
    Ok(sse(stack, factors) / norm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FmsOptions {
    /// Use absolute congruences (diagnostics only; hides sign flips).
    pub absolute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmsResult {
    pub fms: f64,
    /// `permutation[s]` is the true component matched to estimated component `s`.
    pub permutation: Vec<usize>,
    /// Matched congruence product for each true component.
    pub per_component: Vec<f64>,
}

fn unit_components(f: &Pf2Factors, mode_name: &str) -> Result<[Vec<DVector<f64>>; 3]> {
    let rank = f.rank();
    let mut modes: [Vec<DVector<f64>>; 3] = Default::default();
    for r in 0..rank {
        let a: DVector<f64> = f.a.column(r).into_owned();
        let b = DVector::from_iterator(
            f.b.iter().map(|bk| bk.nrows()).sum(),
            f.b.iter()
                .flat_map(|bk| bk.column(r).iter().copied().collect::<Vec<_>>()),
        );
        let c: DVector<f64> = f.d.column(r).into_owned();
        for (m, (v, tag)) in [(a, 'A'), (b, 'B'), (c, 'D')].into_iter().enumerate() {
            let n = v.norm();
            if !(n > 0.0) {
                log::debug!("zero component {r} in mode {tag} of {mode_name} factors");
                return Err(Error::ZeroComponent {
                    mode: tag,
                    component: r,
                });
            }
            modes[m].push(v / n);
        }
    }
    Ok(modes)
}

/// Score matrix `S[r][s] = (a_rᵀâ_s)(b_rᵀb̂_s)(c_rᵀĉ_s)` on normalized vectors.
pub fn congruence_matrix(truth: &Pf2Factors, est: &Pf2Factors, options: FmsOptions) -> Result<Vec<Vec<f64>>> {
    if truth.rank() != est.rank() {
        return Err(Error::shape(format!(
            "rank mismatch: truth has {}, estimate has {}",
            truth.rank(),
            est.rank()
        )));
    }
    if truth.a.nrows() != est.a.nrows()
        || truth.d.nrows() != est.d.nrows()
        || truth.b.iter().zip(&est.b).any(|(x, y)| x.nrows() != y.nrows())
    {
        return Err(Error::shape("truth and estimate have different shapes"));
    }
    let t = unit_components(truth, "true")?;
    let e = unit_components(est, "estimated")?;
    let rank = truth.rank();
    let score = (0..rank)
        .map(|r| {
            (0..rank)
                .map(|s| {
                    let parts = (0..3).map(|m| t[m][r].dot(&e[m][s]));
                    if options.absolute {
                        parts.map(f64::abs).product()
                    } else {
                        parts.product()
                    }
                })
                .collect()
        })
        .collect();
    Ok(score)
}

/// Factor match score after optimal matching of estimated to true components.
pub fn fms(truth: &Pf2Factors, est: &Pf2Factors, options: FmsOptions) -> Result<FmsResult> {
    let score = congruence_matrix(truth, est, options)?;
    let rank = score.len();
    let cost: Vec<Vec<f64>> = score.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
    let assignment = hungarian_min(&cost);
    let mut permutation = vec![0; rank];
    let mut per_component = vec![0.0; rank];
    for (r, &s) in assignment.iter().enumerate() {
        permutation[s] = r;
        per_component[r] = score[r][s];
    }
    let fms = per_component.iter().sum::<f64>() / rank as f64;
    Ok(FmsResult {
        fms,
        permutation,
        per_component,
    })
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method).
///
/// Returns `assignment[row] = column`.
pub fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; p[j] is the row matched to column j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}
