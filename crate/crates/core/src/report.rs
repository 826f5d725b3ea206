//! Convergence traces shared by both fitting methods.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The outer stopping rule was met.
    Converged,
    /// The outer iteration budget ran out first.
    MaxIter,
}

/// Relative gaps `‖primal − aux‖_F / ‖aux‖_F` for every ADMM split.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityGaps {
    pub a: f64,
    pub b_reg: f64,
    pub b_pf2: f64,
    pub d: f64,
}

impl FeasibilityGaps {
    pub fn max(&self) -> f64 {
        self.a.max(self.b_reg).max(self.b_pf2).max(self.d)
    }
}

/// Inner ADMM sweeps spent on each mode during one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InnerCounts {
    pub b: usize,
    pub a: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Regularized objective (plain SSE for ALS).
    pub objective: f64,
    pub relative_sse: f64,
    pub gaps: FeasibilityGaps,
    pub max_gap: f64,
    pub inner: InnerCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub seed: u64,
    /// Objective of the initialization; `None` when it is infinite.
    pub initial_objective: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub outer_iterations: usize,
    pub termination: Termination,
    pub final_objective: f64,
    pub final_relative_sse: f64,
    pub wall_time_secs: f64,
}

impl FitReport {
    pub(crate) fn new(method: &str, seed: u64) -> Self {
        FitReport {
            method: method.to_string(),
            seed,
            initial_objective: None,
            iterations: Vec::new(),
            outer_iterations: 0,
            termination: Termination::MaxIter,
            final_objective: f64::NAN,
            final_relative_sse: f64::NAN,
            wall_time_secs: 0.0,
        }
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterations.iter().map(|r| r.objective)
    }
}
