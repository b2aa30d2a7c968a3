//! Penalty plus semismooth Newton for the truncated QVI, backward recursion
//! for finite horizons, and a value-iteration fixed-point oracle.

mod direct;
mod finite;
mod jacobian;
mod newton;
mod oracle;

use alloc::string::String;
use alloc::vec::Vec;

pub use direct::{solve_selected, Selection};
pub use finite::{finite_horizon_policy, finite_initial_value, solve_finite_horizon, FinitePolicy};
pub use jacobian::{generalized_jacobian, penalised_residual, CsrMatrix};
pub use newton::{assemble_initial_guess, newton_solve, solve_qvi, solve_qvi_with, NewtonOutcome};
pub use oracle::{classical_value_iteration, value_iteration_oracle};

use crate::qvi::QviError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Qvi(#[from] QviError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("Newton did not converge at rho = {rho} after {iterations} iterations (last relative increment {last_increment:.3e}, residual {residual:.3e})")]
    NotConverged {
        rho: f64,
        iterations: usize,
        last_increment: f64,
        residual: f64,
    },
    #[error("singular linear system at rho = {rho}, Newton iteration {iteration}")]
    Singular { rho: f64, iteration: usize },
}

/// Linear solver used for each Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Back-substitution in `n` per `(x, a)` chain, reduced to a dense LU of
    /// the `n = 1` block.
    #[default]
    StructuredDirect,
    /// Dense LU of the full generalized Jacobian. Small systems only.
    DenseLu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub rho: f64,
    /// Number of doublings after the first solve; `rho·2^k`, `k = 0..=doublings`.
    pub doublings: usize,
    pub rel_tol: f64,
    pub max_newton_iters: usize,
    pub linear_solver: LinearSolver,
    /// Start each `rho` from the previous solution instead of the `rho = 0`
    /// guess. Off by default: restarting keeps the iteration count per `rho`
    /// constant.
    pub warm_start: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            rho: 1e3,
            doublings: 6,
            rel_tol: 1e-8,
            max_newton_iters: 200,
            linear_solver: LinearSolver::StructuredDirect,
            warm_start: false,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SolverError::Config(alloc::format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.rel_tol > 0.0) {
            return Err(SolverError::Config(alloc::format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_newton_iters == 0 {
            return Err(SolverError::Config("max_newton_iters must be >= 1".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        (0..=self.doublings).map(|k| self.rho * (1u64 << k) as f64).collect()
    }
}

/// Per-schedule record of a penalty solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub rhos: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    /// `‖v^ρ - v^{2ρ}‖∞`, one per doubling.
    pub increments: Vec<f64>,
    /// `‖min{F, u - Mu}‖∞` of the final iterate.
    pub final_residual: f64,
    /// Filled in by callers that have a clock.
    pub wall_seconds: Option<f64>,
}

/// Values and report of [`solve_qvi`].
#[derive(Debug, Clone)]
pub struct PenaltySolution {
    pub values: Vec<f64>,
    pub report: SolveReport,
    /// Solution at every `rho` of the schedule, when requested.
    pub family: Option<Vec<Vec<f64>>>,
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn diff_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
