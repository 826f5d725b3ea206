//! Independent reference solvers used by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use parafac2::{Matrix, Pf2Factors, SliceStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizer of a strictly convex quadratic known only through its values.
///
/// The Hessian and gradient at the origin are recovered from unit-step
/// differences, which are exact for quadratics up to rounding.
pub fn minimize_quadratic(n: usize, q: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let unit = |i: usize, s: f64| {
        let mut x = vec![0.0; n];
        x[i] = s;
        x
    };
    let q0 = q(&vec![0.0; n]);
    let plus: Vec<f64> = (0..n).map(|i| q(&unit(i, 1.0))).collect();
    let minus: Vec<f64> = (0..n).map(|i| q(&unit(i, -1.0))).collect();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = plus[i] + minus[i] - 2.0 * q0;
        for j in 0..i {
            let mut x = vec![0.0; n];
            x[i] = 1.0;
            x[j] = 1.0;
            let v = q(&x) - plus[i] - plus[j] + q0;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let g = DVector::from_fn(n, |i, _| 0.5 * (plus[i] - minus[i]));
    let x = h.lu().solve(&(-g)).expect("quadratic is strictly convex");
    x.as_slice().to_vec()
}

/// Central-difference gradient of a quadratic at `x` (exact up to rounding).
pub fn quadratic_gradient(x: &[f64], q: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += 1.0;
            m[i] -= 1.0;
            0.5 * (q(&p) - q(&m))
        })
        .collect()
}

/// Column-major matrix from a flat vector.
pub fn mat(rows: usize, cols: usize, v: &[f64]) -> Matrix {
    Matrix::from_column_slice(rows, cols, v)
}

pub fn sq_fro(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// `argmin_x λ Σ|x_{i+1} − x_i| + ½‖x − y‖²` through projected coordinate
/// descent on the dual `min_{|u|≤λ} ½‖y − Dᵀu‖²`, iterated to stagnation.
pub fn tv_dual_oracle(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return y.to_vec();
    }
    let m = n - 1;
    let mut u = vec![0.0; m];
    // x = y − Dᵀu with (Dᵀu)_j = u_{j−1} − u_j.
    let mut x = y.to_vec();
    for _ in 0..2_000_000 {
        let mut change: f64 = 0.0;
        for i in 0..m {
            // dual gradient in u_i is −(x_{i+1} − x_i); curvature 2.
            let target = (u[i] + 0.5 * (x[i + 1] - x[i])).clamp(-lambda, lambda);
            let delta = target - u[i];
            if delta != 0.0 {
                u[i] = target;
                x[i] += delta;
                x[i + 1] -= delta;
                change = change.max(delta.abs());
            }
        }
        if change <= 1e-16 * (1.0 + lambda) {
            break;
        }
    }
    x
}

/// Largest violation of the optimality conditions of 1-D TV denoising.
pub fn tv_kkt_residual(y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return max_abs_diff(x, y);
    }
    let mut worst: f64 = 0.0;
    let mut u = 0.0;
    for j in 0..n - 1 {
        u -= y[j] - x[j];
        worst = worst.max(u.abs() - lambda);
        let jump = x[j + 1] - x[j];
        if jump.abs() > 1e-9 * (1.0 + max_abs(y)) {
            worst = worst.max((u - lambda * jump.signum()).abs());
        }
    }
    u -= y[n - 1] - x[n - 1];
    worst.max(u.abs()).max(0.0)
}

/// `Σ_k ‖A diag(d_k) B_kᵀ − X_k‖²` with explicit loops.
pub fn sse_loops(stack: &SliceStack, f: &Pf2Factors) -> f64 {
    let mut total = 0.0;
    for (k, xk) in stack.slices().iter().enumerate() {
        let bk = &f.b[k];
        for i in 0..xk.nrows() {
            for j in 0..xk.ncols() {
                let model: f64 = (0..f.rank()).map(|r| f.a[(i, r)] * f.d[(k, r)] * bk[(j, r)]).sum();
                total += (model - xk[(i, j)]).powi(2);
            }
        }
    }
    total
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn components(f: &Pf2Factors, r: usize) -> [Vec<f64>; 3] {
    let a = f.a.column(r).iter().copied().collect();
    let b =
        f.b.iter()
            .flat_map(|bk| bk.column(r).iter().copied().collect::<Vec<_>>())
            .collect();
    let d = f.d.column(r).iter().copied().collect();
    [a, b, d]
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// FMS by enumerating every matching of estimated to true components.
pub fn brute_force_fms(truth: &Pf2Factors, est: &Pf2Factors) -> f64 {
    let rank = truth.rank();
    let t: Vec<_> = (0..rank).map(|r| components(truth, r)).collect();
    let e: Vec<_> = (0..rank).map(|r| components(est, r)).collect();
    permutations(rank)
        .into_iter()
        .map(|p| {
            (0..rank)
                .map(|r| (0..3).map(|m| cosine(&t[r][m], &e[p[r]][m])).product::<f64>())
                .sum::<f64>()
                / rank as f64
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
