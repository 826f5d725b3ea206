//! Small dense solvers shared by the fitting routines.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Cholesky factor of a symmetric positive definite Gram matrix.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(gram: Matrix) -> Result<Self> {
        Cholesky::new(gram)
            .map(|chol| SpdFactor { chol })
            .ok_or_else(|| Error::Degenerate("Gram matrix is not positive definite".into()))
    }

    /// Factor `gram`, adding a small ridge on the diagonal if it is singular.
    pub fn with_jitter(gram: Matrix) -> Self {
        if let Some(chol) = Cholesky::new(gram.clone()) {
            return SpdFactor { chol };
        }
        let n = gram.nrows();
        let mean_diag = (gram.trace() / n as f64).abs();
        let mut jitter = 1e-12 * mean_diag.max(1.0);
        loop {
            let mut g = gram.clone();
            for i in 0..n {
                g[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(g) {
                log::debug!("singular normal equations regularized with jitter {jitter:e}");
                return SpdFactor { chol };
            }
            jitter *= 10.0;
        }
    }

    pub fn inverse(&self) -> Matrix {
        self.chol.inverse()
    }

    /// Solve `G x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Solve `X G = rhs` for `X`, using the symmetry of `G`.
    pub fn solve_right(&self, rhs: &Matrix) -> Matrix {
        self.chol.solve(&rhs.transpose()).transpose()
    }
}

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i]` in row `i + 1`, `upper[i]` multiplies
/// `x[i + 1]` in row `i`. The matrix must be diagonally dominant or
/// otherwise safe to eliminate without pivoting.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    debug_assert_eq!(rhs.len(), n);
    debug_assert!(n == 0 || (lower.len() == n - 1 && upper.len() == n - 1));
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Nonnegative least squares in normal-equation form.
///
/// Minimizes `½ xᵀG x − fᵀx` subject to `x ≥ 0` with the active-set method
/// of Lawson and Hanson, operating on the Gram matrix `G = EᵀE` and
/// `f = Eᵀy` directly.
pub fn nnls_gram(gram: &Matrix, f: &DVector<f64>) -> DVector<f64> {
    let n = f.len();
    let scale = gram.diagonal().amax().max(f.amax()).max(f64::MIN_POSITIVE);
    let tol = 1e3 * f64::EPSILON * scale * n as f64;
    let mut passive = vec![false; n];
    let mut x = DVector::zeros(n);
    let mut w = f - gram * &x;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        let mut inner = 0;
        loop {
            let s = solve_passive(gram, f, &passive);
            let blocking: Vec<usize> = (0..n).filter(|&i| passive[i] && s[i] <= 0.0).collect();
            if blocking.is_empty() {
                x = s;
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += (&s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            inner += 1;
            if inner > 3 * n + 10 {
                break;
            }
        }
        w = f - gram * &x;
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}

fn solve_passive(gram: &Matrix, f: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..f.len()).filter(|&i| passive[i]).collect();
    let m = idx.len();
    let sub = Matrix::from_fn(m, m, |a, b| gram[(idx[a], idx[b])]);
    let rhs = DVector::from_iterator(m, idx.iter().map(|&i| f[i]));
    let sol = SpdFactor::with_jitter(sub).solve(&rhs);
    let mut out = DVector::zeros(f.len());
    for (a, &i) in idx.iter().enumerate() {
        out[i] = sol[a];
    }
    out
}
