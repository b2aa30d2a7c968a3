//! Augmented-state QVI systems.
//!
//! The infinite-horizon system lives on indices `(n, x, a)` with
//! `n ∈ 1..=N` the time elapsed since the last observation, `x` the state
//! seen then and `a` the action applied since. Each row is
//!
//! ```text
//! min { u(n,x,a) - γ u(n+1,x,a) - (P_a^n r_a)(x),  u(n,x,a) - Mu(n,x,a) } = 0   (n < N)
//! u(N,x,a) = Mu(N,x,a)
//! Mu(n,x,a) = Σ_x' P_a^n(x,x') max_a' ( γ u(1,x',a') + r(x',a') - g(a,a') ) - c_obs
//! ```
//!
//! Values are stored flat, n-major: `ι(n,x,a) = ((n-1) L + x) d + a`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::model::{ModelError, OcmModel, OpenLoopActionSet};
use crate::powers::{open_loop_products, TransitionPowers};
use crate::Matrix;

/// Branch values closer than this are treated as tied; ties resolve to the
/// continuation branch.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QviError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("continuation branch is undefined at the terminal layer n = {0}")]
    TerminalContinuation(usize),
    #[error("value array has length {got}, expected {expected}")]
    Layout { expected: usize, got: usize },
}

/// The truncated infinite-horizon QVI of an observation-cost model.
///
/// "Controls" are the objects frozen between observations: base actions for
/// a plain model, open-loop parameters θ for an open-loop extension.
#[derive(Debug, Clone)]
pub struct QviSystem {
    num_states: usize,
    num_controls: usize,
    horizon: usize,
    discount: f64,
    c_obs: f64,
    // kernels[c][n - 1]: n-step transition under control c
    kernels: Vec<Vec<Matrix>>,
    // cont_reward[c][n - 1] = kernels[c][n - 1] * r_{control c at step n}
    cont_reward: Vec<Vec<DVector<f64>>>,
    // reward collected at the observation instant when switching to c'
    obs_reward: Matrix,
    switching: Matrix,
    pinned: Vec<Option<f64>>,
}

/// `max_{a'} (γ u(1,x',a') + r(x',a') - g(a,a'))` for every `(x', a)`, with
/// the lowest-index maximizer.
#[derive(Debug, Clone)]
pub struct InnerMax {
    // indexed x' * d + a (a = previous control)
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Elementwise `min{F, u - Mu}` together with the active-obstacle mask.
#[derive(Debug, Clone)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    /// `true` where the obstacle branch attains the minimum strictly (or at
    /// the terminal layer, where the obstacle equation is imposed).
    pub obstacle_active: Vec<bool>,
}

impl ResidualVector {
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl QviSystem {
    /// Assembles the system for a model, truncated at `model.horizon()`.
    pub fn new(model: &OcmModel) -> Self {
        let horizon = model.horizon();
        let mut powers = TransitionPowers::new(model);
        powers.fill(horizon);
        let kernels = powers.into_lists();
        let d = model.num_actions();
        let reward = model.effective_reward();
        let cont_reward = (0..d)
            .map(|a| {
                let r = reward.column(a).into_owned();
                kernels[a].iter().map(|k| k * &r).collect()
            })
            .collect();
        Self::assemble(model, kernels, cont_reward, reward, model.effective_switching_cost())
    }

    /// Open-loop extension: controls are the parameters θ, the n-step kernel
    /// is `Q_θ^n = P_{f_θ(1)} ⋯ P_{f_θ(n)}`, the step-`n` reward uses
    /// `r_{f_θ(n)}` and the reward at the observation instant uses
    /// `r_{f_θ(1)}`. Switching costs of the base model are not carried over.
    pub fn open_loop(model: &OcmModel, actions: &OpenLoopActionSet) -> Result<Self, QviError> {
        let horizon = model.horizon();
        let kernels = open_loop_products(model, actions, horizon)?;
        let l = model.num_states();
        let reward = model.effective_reward();
        let cont_reward = (0..actions.len())
            .map(|theta| {
                kernels[theta]
                    .iter()
                    .enumerate()
                    .map(|(i, k)| {
                        let r = reward.column(actions.action(theta, i + 1)).into_owned();
                        k * r
                    })
                    .collect()
            })
            .collect();
        let obs_reward =
            Matrix::from_fn(l, actions.len(), |x, theta| reward[(x, actions.action(theta, 1))]);
        let switching = Matrix::zeros(actions.len(), actions.len());
        Ok(Self::assemble(model, kernels, cont_reward, obs_reward, switching))
    }

    fn assemble(
        model: &OcmModel,
        kernels: Vec<Vec<Matrix>>,
        cont_reward: Vec<Vec<DVector<f64>>>,
        obs_reward: Matrix,
        switching: Matrix,
    ) -> Self {
        let l = model.num_states();
        let mut pinned = vec![None; l];
        for &(s, v) in model.absorbing() {
            pinned[s] = Some(v);
        }
        QviSystem {
            num_states: l,
            num_controls: kernels.len(),
            horizon: model.horizon(),
            discount: model.discount(),
            c_obs: model.c_obs(),
            kernels,
            cont_reward,
            obs_reward,
            switching,
            pinned,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_controls(&self) -> usize {
        self.num_controls
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn c_obs(&self) -> f64 {
        self.c_obs
    }

    /// Monotonicity constant of the continuation operator, `1 - γ`.
    pub fn beta(&self) -> f64 {
        1.0 - self.discount
    }

    pub fn len(&self) -> usize {
        self.horizon * self.num_states * self.num_controls
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of the `n = 1` block, `L d`.
    pub fn block_len(&self) -> usize {
        self.num_states * self.num_controls
    }

    #[inline]
    pub fn index(&self, n: usize, x: usize, a: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.horizon);
        ((n - 1) * self.num_states + x) * self.num_controls + a
    }

    #[inline]
    pub fn decompose(&self, i: usize) -> (usize, usize, usize) {
        let a = i % self.num_controls;
        let rest = i / self.num_controls;
        (rest / self.num_states + 1, rest % self.num_states, a)
    }

    /// The n-step kernel of control `a` (`1 <= n <= N`).
    pub fn kernel(&self, a: usize, n: usize) -> &Matrix {
        &self.kernels[a][n - 1]
    }

    /// `(P_a^n r_a)`, the expected reward `n` steps after an observation.
    pub fn continuation_reward(&self, a: usize, n: usize) -> &DVector<f64> {
        &self.cont_reward[a][n - 1]
    }

    pub fn observation_reward(&self) -> &Matrix {
        &self.obs_reward
    }

    pub fn switching(&self) -> &Matrix {
        &self.switching
    }

    pub fn pinned(&self, x: usize) -> Option<f64> {
        self.pinned[x]
    }

    pub fn has_pinned(&self) -> bool {
        self.pinned.iter().any(Option::is_some)
    }

    fn check_index(&self, n: usize, x: usize, a: usize) -> Result<(), QviError> {
        if n == 0 || n > self.horizon || x >= self.num_states || a >= self.num_controls {
            return Err(QviError::Index(format!(
                "(n={n}, x={x}, a={a}) outside 1..={} × 0..{} × 0..{}",
                self.horizon, self.num_states, self.num_controls
            )));
        }
        Ok(())
    }

    fn check_len(&self, u: &[f64]) -> Result<(), QviError> {
        if u.len() != self.len() {
            return Err(QviError::Layout {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Smallest entry of the obstacle cost `c(a, a', x) = c_obs - r(x,a')/γ
    /// + g(a,a')/γ`. The comparison principle asks for it to be positive; the
    /// solvers work regardless.
    pub fn obstacle_cost_min(&self) -> f64 {
        let g = self.discount;
        let mut min = f64::INFINITY;
        for x in 0..self.num_states {
            for a in 0..self.num_controls {
                for b in 0..self.num_controls {
                    let c = self.c_obs - self.obs_reward[(x, b)] / g + self.switching[(a, b)] / g;
                    min = min.min(c);
                }
            }
        }
        min
    }

    /// Human-readable diagnostics about assumptions the theory relies on.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let c = self.obstacle_cost_min();
        if c <= 0.0 {
            out.push(format!(
                "obstacle cost vector has min {c:.6} <= 0; uniqueness is not guaranteed by the comparison principle"
            ));
        }
        out
    }

    /// Inner maximization over the post-observation control.
    pub fn inner_max(&self, u: &[f64]) -> InnerMax {
        let (l, d, g) = (self.num_states, self.num_controls, self.discount);
        let mut values = vec![0.0; l * d];
        let mut argmax = vec![0; l * d];
        for x in 0..l {
            for a in 0..d {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for b in 0..d {
                    let v = g * u[self.index(1, x, b)] + self.obs_reward[(x, b)] - self.switching[(a, b)];
                    if v > best {
                        best = v;
                        arg = b;
                    }
                }
                values[x * d + a] = best;
                argmax[x * d + a] = arg;
            }
        }
        InnerMax { values, argmax }
    }

    fn inner_column(&self, inner: &InnerMax, a: usize) -> DVector<f64> {
        let d = self.num_controls;
        DVector::from_fn(self.num_states, |x, _| inner.values[x * d + a])
    }

    /// `Mu` over the whole layout (pinned states included; callers override
    /// them where needed).
    pub fn obstacle(&self, u: &[f64]) -> Vec<f64> {
        let inner = self.inner_max(u);
        self.obstacle_from(&inner)
    }

    pub fn obstacle_from(&self, inner: &InnerMax) -> Vec<f64> {
        let (l, d) = (self.num_states, self.num_controls);
        let mut out = vec![0.0; self.len()];
        let cols: Vec<DVector<f64>> = (0..d).map(|a| self.inner_column(inner, a)).collect();
        for n in 1..=self.horizon {
            for (a, col) in cols.iter().enumerate() {
                let mv = self.kernel(a, n) * col;
                for x in 0..l {
                    out[self.index(n, x, a)] = mv[x] - self.c_obs;
                }
            }
        }
        out
    }

    /// Value of paying to observe at `(n, x, a)`: `Mu(n, x, a)`.
    pub fn inspection_value(&self, u: &[f64], n: usize, x: usize, a: usize) -> Result<f64, QviError> {
        self.check_len(u)?;
        self.check_index(n, x, a)?;
        let inner = self.inner_max(u);
        let k = self.kernel(a, n);
        let d = self.num_controls;
        let s: f64 = (0..self.num_states)
            .map(|y| k[(x, y)] * inner.values[y * d + a])
            .sum();
        Ok(s - self.c_obs)
    }

    /// Value of waiting one more step: `γ u(n+1,x,a) + (P_a^n r_a)(x)`.
    pub fn continuation_value(&self, u: &[f64], n: usize, x: usize, a: usize) -> Result<f64, QviError> {
        self.check_len(u)?;
        self.check_index(n, x, a)?;
        if n == self.horizon {
            return Err(QviError::TerminalContinuation(n));
        }
        Ok(self.discount * u[self.index(n + 1, x, a)] + self.cont_reward[a][n - 1][x])
    }

    /// `F(n,x,a) = u(n,x,a) - γ u(n+1,x,a) - (P_a^n r_a)(x)` for `n < N`.
    pub fn continuation_residual(&self, u: &[f64], n: usize, x: usize, a: usize) -> Result<f64, QviError> {
        let cv = self.continuation_value(u, n, x, a)?;
        Ok(u[self.index(n, x, a)] - cv)
    }

    /// Continuation residual over the layout; terminal entries hold zero.
    pub fn continuation_residuals(&self, u: &[f64]) -> Vec<f64> {
        let (l, d) = (self.num_states, self.num_controls);
        let mut out = vec![0.0; self.len()];
        for n in 1..self.horizon {
            for x in 0..l {
                for a in 0..d {
                    let i = self.index(n, x, a);
                    out[i] = u[i] - self.discount * u[self.index(n + 1, x, a)] - self.cont_reward[a][n - 1][x];
                }
            }
        }
        out
    }

    /// `min{F, u - Mu}` for `n < N`, `u - Mu` at `n = N`, `u - pinned` on
    /// absorbing states.
    pub fn qvi_residual(&self, u: &[f64]) -> Result<ResidualVector, QviError> {
        self.check_len(u)?;
        let mu = self.obstacle(u);
        let f = self.continuation_residuals(u);
        let mut values = vec![0.0; self.len()];
        let mut active = vec![false; self.len()];
        for i in 0..self.len() {
            let (n, x, _) = self.decompose(i);
            if let Some(p) = self.pinned[x] {
                values[i] = u[i] - p;
                continue;
            }
            let obs = u[i] - mu[i];
            if n == self.horizon {
                values[i] = obs;
                active[i] = true;
            } else if obs < f[i] - TIE_TOL {
                values[i] = obs;
                active[i] = true;
            } else {
                values[i] = f[i];
            }
        }
        Ok(ResidualVector {
            values,
            obstacle_active: active,
        })
    }

    /// `‖F(0)‖∞`: the largest magnitude among the constant terms of the
    /// system, i.e. continuation rewards, the obstacle at `u = 0` on every
    /// layer, and pinned values. With the obstacle constant included the
    /// bound `‖u^ρ‖∞ <= ‖F(0)‖∞ / (1 - γ)` holds for any sign of the
    /// obstacle cost.
    pub fn f_zero_norm(&self) -> f64 {
        let zero = vec![0.0; self.len()];
        let mu = self.obstacle(&zero);
        let mut m: f64 = 0.0;
        for i in 0..self.len() {
            let (n, x, a) = self.decompose(i);
            if let Some(p) = self.pinned[x] {
                m = m.max(p.abs());
                continue;
            }
            m = m.max(mu[i].abs());
            if n < self.horizon {
                m = m.max(self.cont_reward[a][n - 1][x].abs());
            }
        }
        m
    }
}

/// Finite-horizon system on indices `(n, k, x, a)`, `0 <= k < n <= K`:
/// current time `n`, last observation at time `k` of state `x` followed by
/// action `a`.
///
/// ```text
/// min { v(n,k) - v(n+1,k) - P_a^{n-k} r_a,  v(n,k) - P_a^{n-k} max_a'(v(n+1,n) + r - g) + c_obs } = 0
/// v(K,k) = P_a^{K-k} r_a
/// ```
#[derive(Debug, Clone)]
pub struct FiniteHorizonSystem {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    c_obs: f64,
    // powers[a][m - 1] = P_a^m, m = 1..=K
    powers: Vec<Vec<Matrix>>,
    // step_reward[a][m - 1] = P_a^m r_a
    step_reward: Vec<Vec<DVector<f64>>>,
    reward: Matrix,
    switching: Matrix,
}

impl FiniteHorizonSystem {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn c_obs(&self) -> f64 {
        self.c_obs
    }

    pub fn reward(&self) -> &Matrix {
        &self.reward
    }

    pub fn switching(&self) -> &Matrix {
        &self.switching
    }

    /// `P_a^m` for `1 <= m <= K`.
    pub fn kernel(&self, a: usize, m: usize) -> &Matrix {
        &self.powers[a][m - 1]
    }

    /// `P_a^m r_a` for `1 <= m <= K`.
    pub fn step_reward(&self, a: usize, m: usize) -> &DVector<f64> {
        &self.step_reward[a][m - 1]
    }

    /// Number of `(n, k)` layers, `K (K + 1) / 2`.
    pub fn num_layers(&self) -> usize {
        self.horizon * (self.horizon + 1) / 2
    }

    /// Offset of layer `(n, k)` in units of `L d` blocks.
    #[inline]
    pub fn layer(&self, n: usize, k: usize) -> usize {
        debug_assert!(k < n && n <= self.horizon);
        n * (n - 1) / 2 + k
    }

    #[inline]
    pub fn index(&self, n: usize, k: usize, x: usize, a: usize) -> usize {
        (self.layer(n, k) * self.num_states + x) * self.num_actions + a
    }

    pub fn len(&self) -> usize {
        self.num_layers() * self.num_states * self.num_actions
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest absolute residual of `v` across all rows, terminal included.
    pub fn residual_norm(&self, v: &[f64]) -> f64 {
        let (l, d, kk) = (self.num_states, self.num_actions, self.horizon);
        let mut worst: f64 = 0.0;
        for k in 0..kk {
            for x in 0..l {
                for a in 0..d {
                    let r = v[self.index(kk, k, x, a)] - self.step_reward(a, kk - k)[x];
                    worst = worst.max(r.abs());
                }
            }
        }
        for n in 1..kk {
            let inner = self.inner_max(v, n);
            for k in 0..n {
                for a in 0..d {
                    let obs = self.kernel(a, n - k) * DVector::from_fn(l, |y, _| inner[y * d + a]);
                    for x in 0..l {
                        let val = v[self.index(n, k, x, a)];
                        let cont = val - v[self.index(n + 1, k, x, a)] - self.step_reward(a, n - k)[x];
                        let ob = val - obs[x] + self.c_obs;
                        worst = worst.max(cont.min(ob).abs());
                    }
                }
            }
        }
        worst
    }

    /// `max_{a'} (v(n+1, n, x', a') + r(x', a') - g(a, a'))`, indexed `x' d + a`.
    pub fn inner_max(&self, v: &[f64], n: usize) -> Vec<f64> {
        self.inner_argmax(v, n).0
    }

    /// [`Self::inner_max`] with the maximizing `a'` (lowest index on ties).
    pub fn inner_argmax(&self, v: &[f64], n: usize) -> (Vec<f64>, Vec<usize>) {
        let (l, d) = (self.num_states, self.num_actions);
        let mut out = vec![f64::NEG_INFINITY; l * d];
        let mut arg = vec![0; l * d];
        for y in 0..l {
            for a in 0..d {
                for b in 0..d {
                    let val = v[self.index(n + 1, n, y, b)] + self.reward[(y, b)] - self.switching[(a, b)];
                    if val > out[y * d + a] {
                        out[y * d + a] = val;
                        arg[y * d + a] = b;
                    }
                }
            }
        }
        (out, arg)
    }
}

/// Builds the finite-horizon system with horizon `k` (the model's own
/// horizon is ignored).
pub fn finite_horizon_system(model: &OcmModel, k: usize) -> Result<FiniteHorizonSystem, QviError> {
    if k == 0 {
        return Err(ModelError::InvalidParameter {
            name: "horizon",
            reason: "must be >= 1".into(),
        }
        .into());
    }
    let mut powers = TransitionPowers::new(model);
    powers.fill(k);
    let powers = powers.into_lists();
    let d = model.num_actions();
    let step_reward = (0..d)
        .map(|a| {
            let r = model.reward().column(a).into_owned();
            powers[a].iter().map(|p| p * &r).collect()
        })
        .collect();
    Ok(FiniteHorizonSystem {
        num_states: model.num_states(),
        num_actions: d,
        horizon: k,
        c_obs: model.c_obs(),
        powers,
        step_reward,
        reward: model.reward().clone(),
        switching: model.switching_cost().clone(),
    })
}
