//! Direct solve of the linear system selected by an active set and an inner
//! argmax.
//!
//! Rows, with `K = P_a^n`, `z = u(1, ·, ·)` and `h(y) = r(y, a*) - g(a, a*)`:
//!
//! ```text
//! inactive:  u(n) - γ u(n+1)                          = P^n r_a
//! active:    (1+ρ) u(n) - γ u(n+1) - ργ K z(·, a*)   = P^n r_a + ρ (K h - c_obs)
//! terminal:  u(N) - γ K z(·, a*)                      = K h - c_obs
//! exact:     u(n) - γ K z(·, a*)                      = K h - c_obs
//! pinned:    u = value
//! ```
//!
//! Exact rows impose the obstacle equation at `n < N`; they evaluate a fixed
//! inspection policy.
//!
//! Each `(x, a)` chain is substituted backward from `n = N` to `n = 1`,
//! expressing `u(n, x, a)` as an affine function of `z`. The `n = 1` rows
//! then form a dense `L d × L d` system.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::SolverError;
use crate::qvi::QviSystem;
use crate::Matrix;

/// Active-set and argmax selection defining one linear system.
#[derive(Debug, Clone)]
pub struct Selection<'a> {
    pub rho: f64,
    /// Obstacle rows penalised, indexed like the value layout (terminal and
    /// pinned entries are ignored).
    pub active: &'a [bool],
    /// Post-observation control per `(y, a)`, indexed `y d + a`.
    pub argmax: &'a [usize],
    /// Rows where the obstacle equation holds with equality, if any.
    pub exact: Option<&'a [bool]>,
}

/// Solves the selected system; `iteration` is only used for error context.
pub fn solve_selected(sys: &QviSystem, sel: &Selection<'_>, iteration: usize) -> Result<Vec<f64>, SolverError> {
    let (l, d, big_n) = (sys.num_states(), sys.num_controls(), sys.horizon());
    let b = l * d;
    let gamma = sys.discount();
    let c = sys.c_obs();
    let rho = sel.rho;

    let h: Vec<DVector<f64>> = (0..d)
        .map(|a| {
            DVector::from_fn(l, |y, _| {
                let s = sel.argmax[y * d + a];
                sys.observation_reward()[(y, s)] - sys.switching()[(a, s)]
            })
        })
        .collect();
    let is_exact = |n: usize, x: usize, a: usize| n == big_n || sel.exact.is_some_and(|e| e[sys.index(n, x, a)]);
    let needs = |n: usize, x: usize, a: usize| is_exact(n, x, a) || sel.active[sys.index(n, x, a)];
    let any_active = |n: usize, a: usize| (0..l).any(|x| needs(n, x, a));

    // kh[a][n-1] = K h_a where some row of (n, ·, a) needs it
    let kh: Vec<Vec<Option<DVector<f64>>>> = (0..d)
        .map(|a| {
            (1..=big_n)
                .map(|n| any_active(n, a).then(|| sys.kernel(a, n) * &h[a]))
                .collect()
        })
        .collect();

    let mut s = Matrix::zeros(b, b);
    let mut rhs = DVector::zeros(b);
    let mut beta = vec![0.0; b];
    for x in 0..l {
        for a in 0..d {
            let row = x * d + a;
            if let Some(p) = sys.pinned(x) {
                s[(row, row)] = 1.0;
                rhs[row] = p;
                continue;
            }
            beta.iter_mut().for_each(|v| *v = 0.0);
            let k = sys.kernel(a, big_n);
            let mut alpha = kh[a][big_n - 1].as_ref().expect("terminal layer")[x] - c;
            for y in 0..l {
                beta[y * d + sel.argmax[y * d + a]] += gamma * k[(x, y)];
            }
            for n in (1..big_n).rev() {
                let cont = sys.continuation_reward(a, n)[x];
                if is_exact(n, x, a) {
                    alpha = kh[a][n - 1].as_ref().expect("exact layer")[x] - c;
                    beta.iter_mut().for_each(|v| *v = 0.0);
                    let k = sys.kernel(a, n);
                    for y in 0..l {
                        beta[y * d + sel.argmax[y * d + a]] += gamma * k[(x, y)];
                    }
                } else if needs(n, x, a) {
                    let scale = 1.0 / (1.0 + rho);
                    alpha = (cont + rho * (kh[a][n - 1].as_ref().expect("active layer")[x] - c) + gamma * alpha)
                        * scale;
                    beta.iter_mut().for_each(|v| *v *= gamma * scale);
                    let k = sys.kernel(a, n);
                    let w = rho * gamma * scale;
                    for y in 0..l {
                        beta[y * d + sel.argmax[y * d + a]] += w * k[(x, y)];
                    }
                } else {
                    alpha = cont + gamma * alpha;
                    beta.iter_mut().for_each(|v| *v *= gamma);
                }
            }
            for (j, bj) in beta.iter().enumerate() {
                s[(row, j)] = -bj;
            }
            s[(row, row)] += 1.0;
            rhs[row] = alpha;
        }
    }

    let z = s
        .lu()
        .solve(&rhs)
        .filter(|z| z.iter().all(|v| v.is_finite()))
        .ok_or(SolverError::Singular { rho, iteration })?;

    let mut u = vec![0.0; sys.len()];
    for a in 0..d {
        let w = DVector::from_fn(l, |y, _| z[y * d + sel.argmax[y * d + a]]);
        let kz: Vec<Option<DVector<f64>>> = (1..=big_n)
            .map(|n| any_active(n, a).then(|| sys.kernel(a, n) * &w))
            .collect();
        for x in 0..l {
            if let Some(p) = sys.pinned(x) {
                for n in 1..=big_n {
                    u[sys.index(n, x, a)] = p;
                }
                continue;
            }
            let khn = kh[a][big_n - 1].as_ref().expect("terminal layer");
            let mut next = khn[x] - c + gamma * kz[big_n - 1].as_ref().expect("terminal layer")[x];
            u[sys.index(big_n, x, a)] = next;
            for n in (1..big_n).rev() {
                let cont = sys.continuation_reward(a, n)[x];
                let val = if is_exact(n, x, a) {
                    kh[a][n - 1].as_ref().expect("exact layer")[x] - c
                        + gamma * kz[n - 1].as_ref().expect("exact layer")[x]
                } else if needs(n, x, a) {
                    let obs = kh[a][n - 1].as_ref().expect("active layer")[x] - c
                        + gamma * kz[n - 1].as_ref().expect("active layer")[x];
                    (cont + gamma * next + rho * obs) / (1.0 + rho)
                } else {
                    cont + gamma * next
                };
                u[sys.index(n, x, a)] = val;
                next = val;
            }
        }
    }
    Ok(u)
}
