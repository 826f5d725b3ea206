//! Ragged slice stacks and PARAFAC2 factor sets.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Tolerance used for orthonormality and constant cross-product checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Sum of squared entries.
pub fn sq_frobenius(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// An ordered collection of `K` matrices `X_k` of shape `I × J_k`.
///
/// All slices share the row count; the column count may vary per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceStack {
    slices: Vec<Matrix>,
}

impl SliceStack {
    pub fn new(slices: Vec<Matrix>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::shape("a slice stack needs at least one slice"))?;
        let rows = first.nrows();
        if rows == 0 {
            return Err(Error::shape("slices must have at least one row"));
        }
        for (k, x) in slices.iter().enumerate() {
            if x.nrows() != rows {
                return Err(Error::shape(format!(
                    "slice {k} has {} rows, expected {rows}",
                    x.nrows()
                )));
            }
            if x.ncols() == 0 {
                return Err(Error::shape(format!("slice {k} has no columns")));
            }
            if !all_finite(x) {
                return Err(Error::NonFinite("slice stack"));
            }
        }
        Ok(SliceStack { slices })
    }

    /// Shared row count `I`.
    pub fn n_rows(&self) -> usize {
        self.slices[0].nrows()
    }

    /// Number of slices `K`.
    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    /// Column counts `J_k`.
    pub fn col_counts(&self) -> Vec<usize> {
        self.slices.iter().map(|x| x.ncols()).collect()
    }

    pub fn min_cols(&self) -> usize {
        self.slices.iter().map(|x| x.ncols()).min().unwrap_or(0)
    }

    pub fn slice(&self, k: usize) -> Result<&Matrix> {
        self.slices.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.slices.len(),
        })
    }

    pub fn slices(&self) -> &[Matrix] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<Matrix> {
        self.slices
    }

    /// Squared Frobenius norm of the whole stack.
    pub fn sq_norm(&self) -> f64 {
        self.slices.iter().map(sq_frobenius).sum()
    }

    /// Multiply every entry by `c`.
    pub fn scaled(&self, c: f64) -> SliceStack {
        SliceStack {
            slices: self.slices.iter().map(|x| x * c).collect(),
        }
    }
}

/// A PARAFAC2 decomposition `{A, D, B_k}`.
///
/// Row `k` of `d` holds the diagonal of `D_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pf2Factors {
    pub a: Matrix,
    pub d: Matrix,
    pub b: Vec<Matrix>,
}

impl Pf2Factors {
    pub fn new(a: Matrix, d: Matrix, b: Vec<Matrix>) -> Result<Self> {
        let rank = a.ncols();
        if rank == 0 {
            return Err(Error::shape("rank must be at least one"));
        }
        if d.ncols() != rank {
            return Err(Error::shape(format!("D has {} columns, A has {rank}", d.ncols())));
        }
        if d.nrows() != b.len() {
            return Err(Error::shape(format!(
                "D has {} rows but there are {} evolving factors",
                d.nrows(),
                b.len()
            )));
        }
        for (k, bk) in b.iter().enumerate() {
            if bk.ncols() != rank {
                return Err(Error::shape(format!("B_{k} has {} columns, A has {rank}", bk.ncols())));
            }
        }
        let finite = all_finite(&a) && all_finite(&d) && b.iter().all(all_finite);
        if !finite {
            return Err(Error::NonFinite("factors"));
        }
        Ok(Pf2Factors { a, d, b })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_slices(&self) -> usize {
        self.b.len()
    }

    /// All-zero factors shaped like `stack` at the given rank.
    pub fn zeros_like(stack: &SliceStack, rank: usize) -> Self {
        Pf2Factors {
            a: Matrix::zeros(stack.n_rows(), rank),
            d: Matrix::zeros(stack.n_slices(), rank),
            b: stack.col_counts().into_iter().map(|j| Matrix::zeros(j, rank)).collect(),
        }
    }

    /// Check that these factors can model `stack`.
    pub fn check_compatible(&self, stack: &SliceStack) -> Result<()> {
        if self.a.nrows() != stack.n_rows() {
            return Err(Error::shape(format!(
                "A has {} rows, data has {}",
                self.a.nrows(),
                stack.n_rows()
            )));
        }
        if self.b.len() != stack.n_slices() {
            return Err(Error::shape(format!(
                "{} evolving factors for {} slices",
                self.b.len(),
                stack.n_slices()
            )));
        }
        for (k, (bk, xk)) in self.b.iter().zip(stack.slices()).enumerate() {
            if bk.nrows() != xk.ncols() {
                return Err(Error::shape(format!(
                    "B_{k} has {} rows, X_{k} has {} columns",
                    bk.nrows(),
                    xk.ncols()
                )));
            }
        }
        Ok(())
    }

    /// `A · diag(d_k) · B_kᵀ`.
    pub fn reconstruct_slice(&self, k: usize) -> Result<Matrix> {
        let bk = self.b.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.b.len(),
        })?;
        Ok(self.a_scaled(k) * bk.transpose())
    }

    pub fn reconstruct(&self) -> Vec<Matrix> {
        (0..self.b.len())
            .map(|k| self.a_scaled(k) * self.b[k].transpose())
            .collect()
    }

    /// `A · diag(d_k)`.
    pub(crate) fn a_scaled(&self, k: usize) -> Matrix {
        scale_columns(&self.a, self.d.row(k).iter().copied())
    }

    /// Largest `‖B_kᵀB_k − B_0ᵀB_0‖_F` over slices.
    pub fn cross_product_gap(&self) -> f64 {
        cross_product_gap(&self.b)
    }
}

/// Multiply column `r` of `m` by `scale[r]`.
pub(crate) fn scale_columns(m: &Matrix, scale: impl IntoIterator<Item = f64>) -> Matrix {
    let mut out = m.clone();
    for (mut col, s) in out.column_iter_mut().zip(scale) {
        col *= s;
    }
    out
}

/// Largest Frobenius distance between any `B_kᵀB_k` and `B_0ᵀB_0`.
pub fn cross_product_gap(b: &[Matrix]) -> f64 {
    let Some(first) = b.first() else {
        return 0.0;
    };
    let reference = first.tr_mul(first);
    b.iter()
        .map(|bk| (bk.tr_mul(bk) - &reference).norm())
        .fold(0.0, f64::max)
}

/// The implicit parameterization `B_k = P_k · Δ` with orthonormal `P_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitEvolving {
    pub p: Vec<Matrix>,
    pub delta: Matrix,
}

impl ImplicitEvolving {
    pub fn new(p: Vec<Matrix>, delta: Matrix) -> Result<Self> {
        let rank = delta.nrows();
        if delta.ncols() != rank {
            return Err(Error::shape("Δ must be square"));
        }
        for (k, pk) in p.iter().enumerate() {
            if pk.ncols() != rank {
                return Err(Error::shape(format!(
                    "P_{k} has {} columns, Δ is {rank}×{rank}",
                    pk.ncols()
                )));
            }
            let gap = (pk.tr_mul(pk) - Matrix::identity(rank, rank)).norm();
            if gap > STRUCTURE_TOL {
                return Err(Error::shape(format!(
                    "P_{k} columns are not orthonormal (‖PᵀP − I‖ = {gap:e})"
                )));
            }
        }
        Ok(ImplicitEvolving { p, delta })
    }

    pub fn materialize(&self) -> Vec<Matrix> {
        self.p.iter().map(|pk| pk * &self.delta).collect()
    }
}
