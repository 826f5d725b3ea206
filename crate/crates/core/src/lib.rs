//! Regularized PARAFAC2 decompositions.
//!
//! A PARAFAC2 model approximates each slice of a ragged stack of matrices as
//! `X_k ≈ A · diag(d_k) · B_kᵀ`, where the evolving factors `B_k` share a
//! common cross product `B_kᵀB_k`. This crate fits such models with
//! alternating optimization where every mode is updated by a few ADMM
//! iterations ([`solver::fit_ao_admm`]), so any proximable penalty can be
//! placed on `A`, on the `B_k` and on the `D_k`. The classical implicit
//! ALS fit ([`als::fit_als`]) is provided as a baseline, together with a
//! simulator for synthetic benchmark data ([`simulate`]) and the usual
//! recovery metrics ([`metrics`]).

pub mod als;
pub mod constraint;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod prox;
pub mod report;
pub mod runner;
pub mod seed;
pub mod simulate;
pub mod solver;
pub mod tensor;

pub use als::{fit_als, AlsConfig};
pub use constraint::{orthonormal_polar_factor, project_pf2, Pf2ProjectionState};
pub use error::{Error, Result};
pub use metrics::{fms, relative_sse, FmsOptions, FmsResult};
pub use prox::Regularizer;
pub use simulate::{Setup, SimSpec};
pub use solver::{fit_ao_admm, FitReport, SolverConfig, Termination};
pub use tensor::{sq_frobenius, ImplicitEvolving, Matrix, Pf2Factors, SliceStack};

/// Library version recorded in every file this crate writes.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
