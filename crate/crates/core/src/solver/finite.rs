use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::policy::INSPECT_MARGIN;
use crate::qvi::FiniteHorizonSystem;

/// Exact backward recursion of the finite-horizon QVI. Values are laid out
/// by [`FiniteHorizonSystem::index`].
pub fn solve_finite_horizon(sys: &FiniteHorizonSystem) -> Vec<f64> {
    let (l, d, kk) = (sys.num_states(), sys.num_actions(), sys.horizon());
    let c = sys.c_obs();
    let mut v = vec![0.0; sys.len()];
    for k in 0..kk {
        for a in 0..d {
            let r = sys.step_reward(a, kk - k);
            for x in 0..l {
                v[sys.index(kk, k, x, a)] = r[x];
            }
        }
    }
    for n in (1..kk).rev() {
        let inner = sys.inner_max(&v, n);
        for a in 0..d {
            let col = DVector::from_fn(l, |y, _| inner[y * d + a]);
            for k in 0..n {
                let obs = sys.kernel(a, n - k) * &col;
                let r = sys.step_reward(a, n - k);
                for x in 0..l {
                    let cont = v[sys.index(n + 1, k, x, a)] + r[x];
                    v[sys.index(n, k, x, a)] = cont.max(obs[x] - c);
                }
            }
        }
    }
    v
}

/// Value at time 0 after the free initial observation of `x`:
/// `max_a (r(x, a) + v(1, 0, x, a))`, with the maximizing action.
pub fn finite_initial_value(sys: &FiniteHorizonSystem, v: &[f64], x: usize) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for a in 0..sys.num_actions() {
        let val = sys.reward()[(x, a)] + v[sys.index(1, 0, x, a)];
        if val > best {
            best = val;
            arg = a;
        }
    }
    (best, arg)
}

/// Decisions read off a finite-horizon solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePolicy {
    /// Inspect flags in the value layout; false on the terminal layer.
    pub inspect: Vec<bool>,
    /// `post_action[(n L + x') d + a]`: action after observing `x'` at time
    /// `n < K` with `a` applied before; `n = 0` is the free start.
    pub post_action: Vec<usize>,
}

/// Inspection wherever the observation branch beats continuation by more
/// than [`INSPECT_MARGIN`].
pub fn finite_horizon_policy(sys: &FiniteHorizonSystem, v: &[f64]) -> FinitePolicy {
    let (l, d, kk) = (sys.num_states(), sys.num_actions(), sys.horizon());
    let c = sys.c_obs();
    let mut inspect = vec![false; sys.len()];
    let mut post_action = vec![0; kk * l * d];
    for x in 0..l {
        let (_, a0) = finite_initial_value(sys, v, x);
        for a in 0..d {
            post_action[x * d + a] = a0;
        }
    }
    for n in 1..kk {
        let (inner, arg) = sys.inner_argmax(v, n);
        post_action[n * l * d..(n + 1) * l * d].copy_from_slice(&arg);
        for a in 0..d {
            let col = DVector::from_fn(l, |y, _| inner[y * d + a]);
            for k in 0..n {
                let obs = sys.kernel(a, n - k) * &col;
                let r = sys.step_reward(a, n - k);
                for x in 0..l {
                    let cont = v[sys.index(n + 1, k, x, a)] + r[x];
                    inspect[sys.index(n, k, x, a)] = obs[x] - c - cont > INSPECT_MARGIN;
                }
            }
        }
    }
    FinitePolicy { inspect, post_action }
}
