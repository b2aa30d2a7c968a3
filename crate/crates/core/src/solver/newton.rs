use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::direct::{solve_selected, Selection};
use super::jacobian::{generalized_jacobian, penalised_residual};
use super::{diff_inf, norm_inf, LinearSolver, PenaltyConfig, PenaltySolution, SolveReport, SolverError};
use crate::qvi::QviSystem;

/// Result of a single-`rho` Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub last_increment: f64,
}

/// The `rho = 0` system with the uncoupled terminal condition: the
/// post-observation control is frozen to the current one.
pub fn assemble_initial_guess(sys: &QviSystem) -> Result<Vec<f64>, SolverError> {
    let d = sys.num_controls();
    let active = vec![false; sys.len()];
    let argmax: Vec<usize> = (0..sys.block_len()).map(|i| i % d).collect();
    solve_selected(
        sys,
        &Selection {
            rho: 0.0,
            active: &active,
            argmax: &argmax,
            exact: None,
        },
        0,
    )
}

fn dense_step(sys: &QviSystem, u: &[f64], rho: f64, iteration: usize) -> Result<Vec<f64>, SolverError> {
    let j = generalized_jacobian(sys, u, rho)?.to_dense();
    let g = penalised_residual(sys, u, rho)?;
    let delta = j
        .lu()
        .solve(&DVector::from_vec(g))
        .ok_or(SolverError::Singular { rho, iteration })?;
    Ok(u.iter().zip(delta.iter()).map(|(a, b)| a - b).collect())
}

/// Semismooth Newton on `G^ρ(u) = 0` from `u0`.
///
/// Stops once `‖u_{k+1} - u_k‖∞ / max(1, ‖u_{k+1}‖∞) <= rel_tol`; the
/// reported count includes that final step.
pub fn newton_solve(sys: &QviSystem, u0: &[f64], rho: f64, config: &PenaltyConfig) -> Result<NewtonOutcome, SolverError> {
    config.validate()?;
    if u0.len() != sys.len() {
        return Err(crate::qvi::QviError::Layout {
            expected: sys.len(),
            got: u0.len(),
        }
        .into());
    }
    let mut u = u0.to_vec();
    let mut last = f64::INFINITY;
    let mut active = vec![false; sys.len()];
    for k in 1..=config.max_newton_iters {
        let next = match config.linear_solver {
            LinearSolver::StructuredDirect => {
                let inner = sys.inner_max(&u);
                let mu = sys.obstacle_from(&inner);
                for (i, act) in active.iter_mut().enumerate() {
                    *act = mu[i] - u[i] > 0.0;
                }
                solve_selected(
                    sys,
                    &Selection {
                        rho,
                        active: &active,
                        argmax: &inner.argmax,
                        exact: None,
                    },
                    k,
                )?
            }
            LinearSolver::DenseLu => dense_step(sys, &u, rho, k)?,
        };
        last = diff_inf(&next, &u) / norm_inf(&next).max(1.0);
        u = next;
        if last <= config.rel_tol {
            return Ok(NewtonOutcome {
                values: u,
                iterations: k,
                last_increment: last,
            });
        }
    }
    let residual = norm_inf(&penalised_residual(sys, &u, rho)?);
    Err(SolverError::NotConverged {
        rho,
        iterations: config.max_newton_iters,
        last_increment: last,
        residual,
    })
}

/// Penalty solves over the geometric schedule `rho·2^k`.
pub fn solve_qvi(sys: &QviSystem, config: &PenaltyConfig) -> Result<PenaltySolution, SolverError> {
    solve_qvi_with(sys, config, false)
}

/// As [`solve_qvi`], optionally keeping the solution at every `rho`.
pub fn solve_qvi_with(sys: &QviSystem, config: &PenaltyConfig, keep_family: bool) -> Result<PenaltySolution, SolverError> {
    config.validate()?;
    let guess = assemble_initial_guess(sys)?;
    let rhos = config.schedule();
    let mut report = SolveReport {
        rhos: rhos.clone(),
        ..SolveReport::default()
    };
    let mut family = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for &rho in &rhos {
        let start = match (&prev, config.warm_start) {
            (Some(p), true) => p.as_slice(),
            _ => guess.as_slice(),
        };
        let out = newton_solve(sys, start, rho, config)?;
        report.newton_iterations.push(out.iterations);
        if let Some(p) = &prev {
            report.increments.push(diff_inf(p, &out.values));
        }
        if keep_family {
            family.push(out.values.clone());
        }
        prev = Some(out.values);
    }
    let values = prev.expect("schedule is nonempty");
    report.final_residual = sys.qvi_residual(&values)?.norm_inf();
    Ok(PenaltySolution {
        values,
        report,
        family: keep_family.then_some(family),
    })
}
