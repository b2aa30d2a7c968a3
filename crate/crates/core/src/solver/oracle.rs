use alloc::vec;
use alloc::vec::Vec;

use super::diff_inf;
use crate::model::OcmModel;
use crate::qvi::QviSystem;

/// Fixed point of `u ← max(γ u(n+1) + P^n r_a, Mu)` (`Mu` alone at `n = N`)
/// by Jacobi iteration. Stops when `γ/(1-γ)·‖Δ‖∞ <= tol`, which bounds the
/// distance to the fixed point by `tol`.
pub fn value_iteration_oracle(sys: &QviSystem, tol: f64) -> Vec<f64> {
    let gamma = sys.discount();
    let factor = gamma / (1.0 - gamma);
    let mut u = vec![0.0; sys.len()];
    loop {
        let next = dp_step(sys, &u);
        let inc = diff_inf(&next, &u);
        u = next;
        if factor * inc <= tol {
            return u;
        }
    }
}

fn dp_step(sys: &QviSystem, u: &[f64]) -> Vec<f64> {
    let mu = sys.obstacle(u);
    let gamma = sys.discount();
    (0..sys.len())
        .map(|i| {
            let (n, x, a) = sys.decompose(i);
            if let Some(p) = sys.pinned(x) {
                p
            } else if n == sys.horizon() {
                mu[i]
            } else {
                let cont = gamma * u[sys.index(n + 1, x, a)] + sys.continuation_reward(a, n)[x];
                cont.max(mu[i])
            }
        })
        .collect()
}

/// Fully observed discounted value `V = max_a (r_a + γ P_a V)` by value
/// iteration, to distance `tol` from the fixed point.
pub fn classical_value_iteration(model: &OcmModel, tol: f64) -> Vec<f64> {
    let (l, d, gamma) = (model.num_states(), model.num_actions(), model.discount());
    let factor = gamma / (1.0 - gamma);
    let mut v = nalgebra::DVector::<f64>::zeros(l);
    loop {
        let mut next = nalgebra::DVector::from_element(l, f64::NEG_INFINITY);
        for a in 0..d {
            let q = model.reward().column(a) + &model.transitions()[a] * &v * gamma;
            for x in 0..l {
                next[x] = next[x].max(q[x]);
            }
        }
        let inc = (&next - &v).amax();
        v = next;
        if factor * inc <= tol {
            return v.iter().copied().collect();
        }
    }
}
