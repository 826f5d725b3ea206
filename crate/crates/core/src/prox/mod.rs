//! Scaled proximal operators for the supported penalties.
//!
//! For a penalty `g` and scale `ρ > 0`, the scaled proximal operator is
//! `prox(Y) = argmin_X g(X) + (ρ/2)‖X − Y‖_F²`. Structured penalties (total
//! variation and the chain graph Laplacian) act on each column separately,
//! so the row index of a factor matrix is the axis along which smoothness or
//! piecewise constancy is imposed.

pub mod tv;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::tensor::{sq_frobenius, Matrix};

/// A penalty with a cheap scaled proximal operator.
///
/// The textual form is `kind` or `kind:strength`, e.g. `nonneg`,
/// `ridge:10`, `tv:0.5`, `laplacian:1000`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(into = "String", try_from = "String")]
pub enum Regularizer {
    #[default]
    None,
    /// Indicator of the nonnegative orthant.
    NonNeg,
    /// `γ‖X‖_F²`.
    Ridge(f64),
    /// `γ Σ_r TV(x_r)` over the columns of `X`.
    TotalVariation(f64),
    /// `γ Σ_{j,r} (X_{jr} − X_{j+1,r})²`, the chain graph Laplacian form.
    GraphLaplacian(f64),
}

impl Regularizer {
    pub fn strength(&self) -> f64 {
        match *self {
            Regularizer::None | Regularizer::NonNeg => 0.0,
            Regularizer::Ridge(g) | Regularizer::TotalVariation(g) | Regularizer::GraphLaplacian(g) => g,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::NonNeg => "nonneg",
            Regularizer::Ridge(_) => "ridge",
            Regularizer::TotalVariation(_) => "tv",
            Regularizer::GraphLaplacian(_) => "laplacian",
        }
    }

    /// Build from a kind name and a strength.
    pub fn from_kind(kind: &str, strength: f64) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::config(format!(
                "regularization strength must be finite and nonnegative, got {strength}"
            )));
        }
        Ok(match kind {
            "none" => Regularizer::None,
            "nonneg" | "nonnegative" => Regularizer::NonNeg,
            "ridge" => Regularizer::Ridge(strength),
            "tv" | "total_variation" => Regularizer::TotalVariation(strength),
            "laplacian" | "graph_laplacian" | "graph_laplacian_chain" => Regularizer::GraphLaplacian(strength),
            other => return Err(Error::config(format!("unknown regularizer kind '{other}'"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.strength();
        if g >= 0.0 && g.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("invalid strength {g} for {}", self.kind())))
        }
    }

    /// `argmin_X g(X) + (ρ/2)‖X − Y‖_F²`.
    pub fn prox(&self, y: &Matrix, rho: f64) -> Result<Matrix> {
        check_prox_args(y, rho)?;
        Ok(self.prox_unchecked(y, rho))
    }

    pub(crate) fn prox_unchecked(&self, y: &Matrix, rho: f64) -> Matrix {
        let mut out = Matrix::zeros(y.nrows(), y.ncols());
        self.prox_into(y, rho, &mut out);
        out
    }

    /// Write the prox of `y` into `out`, which must have the shape of `y`.
    pub(crate) fn prox_into(&self, y: &Matrix, rho: f64, out: &mut Matrix) {
        debug_assert_eq!(y.shape(), out.shape());
        let rows = y.nrows();
        match *self {
            Regularizer::None => out.copy_from(y),
            Regularizer::NonNeg => out.zip_apply(y, |o, v| *o = v.max(0.0)),
            Regularizer::Ridge(g) => {
                let scale = rho / (2.0 * g + rho);
                out.zip_apply(y, |o, v| *o = v * scale);
            }
            Regularizer::TotalVariation(g) => {
                let lambda = g / rho;
                let src = y.as_slice();
                let dst = out.as_mut_slice();
                for c in 0..y.ncols() {
                    let range = c * rows..(c + 1) * rows;
                    tv::tv_denoise_into(&src[range.clone()], lambda, &mut dst[range]);
                }
            }
            Regularizer::GraphLaplacian(g) => {
                if rows < 2 || g == 0.0 {
                    out.copy_from(y);
                    return;
                }
                // (2γL + ρI) x = ρ y with L the path-graph Laplacian
                let off = vec![-2.0 * g; rows - 1];
                let mut diag = vec![4.0 * g + rho; rows];
                diag[0] = 2.0 * g + rho;
                diag[rows - 1] = 2.0 * g + rho;
                let mut rhs = vec![0.0; rows];
                for (src, mut dst) in y.column_iter().zip(out.column_iter_mut()) {
                    for (r, v) in rhs.iter_mut().zip(src.iter()) {
                        *r = rho * v;
                    }
                    dst.copy_from_slice(&solve_tridiagonal(&off, &diag, &off, &rhs));
                }
            }
        }
    }

    /// Prox of `g + ι_{X ≥ 0}`, computed as the clamped prox of `g`.
    ///
    /// Exact for every kind except the chain Laplacian on columns longer
    /// than one entry, where it is a projection of the unconstrained step.
    pub fn prox_nonneg(&self, y: &Matrix, rho: f64) -> Result<Matrix> {
        check_prox_args(y, rho)?;
        Ok(self.prox_nonneg_unchecked(y, rho))
    }

    pub(crate) fn prox_nonneg_unchecked(&self, y: &Matrix, rho: f64) -> Matrix {
        let mut out = self.prox_unchecked(y, rho);
        out.apply(|v| *v = v.max(0.0));
        out
    }

    /// Value of `g(X)`; indicator penalties return `+∞` outside their set.
    pub fn penalty(&self, x: &Matrix) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::NonNeg => nonneg_indicator(x),
            Regularizer::Ridge(g) => g * sq_frobenius(x),
            Regularizer::TotalVariation(g) => {
                if g == 0.0 {
                    return 0.0;
                }
                g * x.column_iter().map(|c| tv::tv_seminorm(c.as_slice())).sum::<f64>()
            }
            Regularizer::GraphLaplacian(g) => {
                if g == 0.0 {
                    return 0.0;
                }
                g * x
                    .column_iter()
                    .map(|c| c.as_slice().windows(2).map(|w| (w[0] - w[1]).powi(2)).sum::<f64>())
                    .sum::<f64>()
            }
        }
    }

    /// `g(X) + ι_{X ≥ 0}(X)`.
    pub fn penalty_nonneg(&self, x: &Matrix) -> f64 {
        self.penalty(x) + nonneg_indicator(x)
    }
}

fn nonneg_indicator(x: &Matrix) -> f64 {
    if x.iter().all(|&v| v >= 0.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

fn check_prox_args(y: &Matrix, rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::config(format!("prox scale must be positive, got {rho}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prox input"));
    }
    Ok(())
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::None | Regularizer::NonNeg => f.write_str(self.kind()),
            _ => write!(f, "{}:{}", self.kind(), self.strength()),
        }
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, strength) = match s.split_once(':') {
            Some((k, v)) => {
                let g: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad regularizer strength in '{s}'")))?;
                (k.trim(), Some(g))
            }
            None => (s, None),
        };
        match (kind, strength) {
            ("none" | "nonneg" | "nonnegative", _) => Regularizer::from_kind(kind, 0.0),
            (_, Some(g)) => Regularizer::from_kind(kind, g),
            (_, None) => Err(Error::config(format!("regularizer '{s}' needs a strength, e.g. {s}:1"))),
        }
    }
}

impl From<Regularizer> for String {
    fn from(r: Regularizer) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Regularizer {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
