//! Parameter uncertainty: conjugate Beta-binomial updates for random-walk
//! drift, finite-Θ filtering, simplex-grid kernels, and the Beta lattice
//! backward recursion.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{ModelError, DRIFT_UP};
use crate::special::beta_binomial_pmf_unchecked;

mod finite;
mod lattice;

pub use finite::{
    bayes_update_finite, grid_kernel, predictive_finite, solve_grid_value_iteration, FiniteThetaBelief, GridKernel,
    GridSolution, SimplexGrid, ThetaFamily,
};
pub use lattice::{solve_bayes_finite, BayesOcmModel, BayesPolicy, LatticeEntry, DEFAULT_MAX_ENTRIES};

#[derive(Debug, thiserror::Error)]
pub enum BayesError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("observation has zero likelihood under every parameter with positive weight")]
    DegenerateObservation,
    #[error("lattice needs {required} entries, cap is {cap}")]
    Resource { required: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Beta distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BayesError> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(BayesError::Argument(alloc::format!(
                "Beta parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Parameters after `u` successes and `w` failures.
    pub fn shifted(&self, u: usize, w: usize) -> Self {
        BetaParams {
            alpha: self.alpha + u as f64,
            beta: self.beta + w as f64,
        }
    }
}

/// `g(k | n, α, β)`, the Beta-binomial mass.
pub fn beta_binomial_pmf(k: usize, n: usize, alpha: f64, beta: f64) -> Result<f64, BayesError> {
    if k > n {
        return Err(BayesError::Argument(alloc::format!("k = {k} exceeds n = {n}")));
    }
    BetaParams::new(alpha, beta)?;
    Ok(beta_binomial_pmf_unchecked(k as u64, n as u64, alpha, beta))
}

/// Masses `g(0..=n | n, α, β)` by the ratio recurrence.
pub(crate) fn beta_binomial_row(n: usize, p: BetaParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut g = beta_binomial_pmf_unchecked(0, n as u64, p.alpha, p.beta);
    out.push(g);
    for j in 0..n {
        let jf = j as f64;
        let nf = n as f64;
        g *= (nf - jf) / (jf + 1.0) * (p.alpha + jf) / (p.beta + nf - jf - 1.0);
        out.push(g);
    }
    out
}

/// Conjugate update after `n` steps under drift action `a`, `k` of them up.
/// An up step counts as a success under [`DRIFT_UP`] and as a failure under
/// the downward drift.
pub fn posterior_update_beta(prior: BetaParams, a: usize, n: usize, k: usize) -> Result<BetaParams, BayesError> {
    if k > n {
        return Err(BayesError::Argument(alloc::format!("k = {k} exceeds n = {n}")));
    }
    Ok(if a == DRIFT_UP {
        prior.shifted(k, n - k)
    } else {
        prior.shifted(n - k, k)
    })
}

/// Prior-predictive law of the position `n` steps after `x` under constant
/// drift `a`: pairs `(x', mass)` over `x' = x - n, x - n + 2, ..., x + n`.
pub fn predictive_nstep(x: i64, a: usize, n: usize, prior: BetaParams) -> Result<Vec<(i64, f64)>, BayesError> {
    if n == 0 {
        return Err(BayesError::Argument("predictive horizon must be >= 1".into()));
    }
    BetaParams::new(prior.alpha, prior.beta)?;
    let row = beta_binomial_row(n, prior);
    Ok((0..=n)
        .map(|up| {
            let successes = if a == DRIFT_UP { up } else { n - up };
            (x + 2 * up as i64 - n as i64, row[successes])
        })
        .collect())
}
