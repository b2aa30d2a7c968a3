//! Finite-horizon backward recursion over the Beta lattice.
//!
//! A lattice point at time `n` is `(k, x, a, u)`: the last observation was
//! at time `k < n` at position `x`, action `a` has been applied since, and
//! the posterior is `Beta(α₀ + u, β₀ + k - u)`. Positions satisfy `|x| <= k`
//! with `x ≡ k (mod 2)`; the walk starts observed at `x = 0`.

use alloc::vec;
use alloc::vec::Vec;

use super::{beta_binomial_row, BayesError, BetaParams};
use crate::model::{RewardKind, DRIFT_DOWN, DRIFT_UP};
use crate::policy::INSPECT_MARGIN;

/// Default cap on stored lattice entries.
pub const DEFAULT_MAX_ENTRIES: usize = 50_000_000;

/// Random walk with Beta prior on the drift parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesOcmModel {
    pub prior: BetaParams,
    pub reward: RewardKind,
    pub c_obs: f64,
    pub horizon: usize,
    pub max_entries: usize,
}

impl BayesOcmModel {
    pub fn new(prior: BetaParams, reward: RewardKind, c_obs: f64, horizon: usize) -> Result<Self, BayesError> {
        BetaParams::new(prior.alpha, prior.beta)?;
        if !(c_obs >= 0.0 && c_obs.is_finite()) {
            return Err(BayesError::Argument(alloc::format!("c_obs must be >= 0, got {c_obs}")));
        }
        if horizon == 0 {
            return Err(BayesError::Argument("horizon must be >= 1".into()));
        }
        Ok(BayesOcmModel {
            prior,
            reward,
            c_obs,
            horizon,
            max_entries: DEFAULT_MAX_ENTRIES,
        })
    }

    pub fn with_max_entries(mut self, cap: usize) -> Self {
        self.max_entries = cap;
        self
    }

    /// Number of `(n, k, x, a, u)` lattice points.
    pub fn lattice_size(&self) -> usize {
        layer_base(self.horizon + 1)
    }
}

// 2 Σ_{j=1}^{k} j², entries in blocks k' < k of one layer
fn block_offset(k: usize) -> usize {
    k * (k + 1) * (2 * k + 1) / 3
}

// entries in layers 1..n
fn layer_base(n: usize) -> usize {
    (1..n).map(block_offset).sum()
}

// post-observation entries at times 0..n
fn post_base(n: usize) -> usize {
    (0..n).map(|t| (t + 1) * (t + 1)).sum()
}

/// One lattice point with its value and decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeEntry {
    pub n: usize,
    pub k: usize,
    pub x: i64,
    pub a: usize,
    pub u: usize,
    pub w: usize,
    pub value: f64,
    pub inspect: bool,
}

/// Values and decisions of the Bayesian inspection problem.
#[derive(Debug, Clone)]
pub struct BayesPolicy {
    prior: BetaParams,
    reward: RewardKind,
    c_obs: f64,
    horizon: usize,
    layers: Vec<usize>,
    values: Vec<f64>,
    inspect: Vec<bool>,
    posts: Vec<usize>,
    post_action: Vec<u8>,
    start_value: f64,
}

impl BayesPolicy {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn prior(&self) -> BetaParams {
        self.prior
    }

    pub fn reward(&self) -> RewardKind {
        self.reward
    }

    pub fn c_obs(&self) -> f64 {
        self.c_obs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat index of a lattice point, `None` when it is not on the lattice.
    pub fn index(&self, n: usize, k: usize, x: i64, a: usize, u: usize) -> Option<usize> {
        let kk = k as i64;
        if n == 0 || n > self.horizon || k >= n || a > 1 || u > k || x.abs() > kk || (x + kk) % 2 != 0 {
            return None;
        }
        let j = ((x + kk) / 2) as usize;
        Some(self.layers[n] + block_offset(k) + (j * 2 + a) * (k + 1) + u)
    }

    pub fn value(&self, n: usize, k: usize, x: i64, a: usize, u: usize) -> Option<f64> {
        self.index(n, k, x, a, u).map(|i| self.values[i])
    }

    /// Whether to pay for an observation at this lattice point; never at
    /// the horizon.
    pub fn inspect(&self, n: usize, k: usize, x: i64, a: usize, u: usize) -> Option<bool> {
        self.index(n, k, x, a, u).map(|i| self.inspect[i])
    }

    /// Action after observing `x` at time `n` with `u` successes in total.
    pub fn post_obs_action(&self, n: usize, x: i64, u: usize) -> Option<usize> {
        let nn = n as i64;
        if n >= self.horizon || u > n || x.abs() > nn || (x + nn) % 2 != 0 {
            return None;
        }
        let j = ((x + nn) / 2) as usize;
        Some(self.post_action[self.posts[n] + j * (n + 1) + u] as usize)
    }

    /// Expected total reward `max_a (r(0) + v(1, 0, 0, a, 0))` from the
    /// observed start at the origin, observation costs deducted.
    pub fn start_value(&self) -> f64 {
        self.start_value
    }

    pub fn start_action(&self) -> usize {
        self.post_action[0] as usize
    }

    /// All lattice points in storage order.
    pub fn entries(&self) -> impl Iterator<Item = LatticeEntry> + '_ {
        (1..=self.horizon).flat_map(move |n| {
            (0..n).flat_map(move |k| {
                (0..=k).flat_map(move |j| {
                    (0..2).flat_map(move |a| {
                        (0..=k).map(move |u| {
                            let x = 2 * j as i64 - k as i64;
                            let i = self.index(n, k, x, a, u).expect("lattice point");
                            LatticeEntry {
                                n,
                                k,
                                x,
                                a,
                                u,
                                w: k - u,
                                value: self.values[i],
                                inspect: self.inspect[i],
                            }
                        })
                    })
                })
            })
        })
    }
}

/// Position after `m` steps from `x` with `s` successes under action `a`.
#[inline]
fn landing(x: i64, a: usize, m: usize, s: usize) -> i64 {
    let excess = 2 * s as i64 - m as i64;
    if a == DRIFT_UP {
        x + excess
    } else {
        x - excess
    }
}

/// Backward recursion of the Bayesian inspection problem on the Beta
/// lattice. Each possible observation induces its own posterior, so the
/// expectation couples the landing position and the updated parameters.
pub fn solve_bayes_finite(model: &BayesOcmModel) -> Result<BayesPolicy, BayesError> {
    let big_n = model.horizon;
    let required = model.lattice_size();
    if required > model.max_entries {
        return Err(BayesError::Resource {
            required,
            cap: model.max_entries,
        });
    }
    let layers: Vec<usize> = (0..=big_n + 1).map(layer_base).collect();
    let posts: Vec<usize> = (0..=big_n).map(post_base).collect();
    let mut policy = BayesPolicy {
        prior: model.prior,
        reward: model.reward,
        c_obs: model.c_obs,
        horizon: big_n,
        layers,
        values: vec![0.0; required],
        inspect: vec![false; required],
        posts,
        post_action: vec![0; post_base(big_n)],
        start_value: 0.0,
    };
    let r = |x: i64| model.reward.value(x);
    let c = model.c_obs;

    // terminal layer: expected reward at N, no inspection
    for k in 0..big_n {
        let m = big_n - k;
        for u in 0..=k {
            let g = beta_binomial_row(m, model.prior.shifted(u, k - u));
            for j in 0..=k {
                let x = 2 * j as i64 - k as i64;
                for a in [DRIFT_UP, DRIFT_DOWN] {
                    let val: f64 = g.iter().enumerate().map(|(s, p)| p * r(landing(x, a, m, s))).sum();
                    let i = policy.index(big_n, k, x, a, u).expect("terminal point");
                    policy.values[i] = val;
                }
            }
        }
    }

    let mut best = Vec::new();
    for n in (0..big_n).rev() {
        // best[j (n + 1) + u] = max_a' v(n+1, n, x', a', u) + r(x'), x' = 2j - n
        best.clear();
        for j in 0..=n {
            let x = 2 * j as i64 - n as i64;
            for u in 0..=n {
                let mut top = f64::NEG_INFINITY;
                let mut arg = 0u8;
                for a in [DRIFT_UP, DRIFT_DOWN] {
                    let v = policy.values[policy.index(n + 1, n, x, a, u).expect("observation point")];
                    if v > top {
                        top = v;
                        arg = a as u8;
                    }
                }
                best.push(top + r(x));
                policy.post_action[policy.posts[n] + j * (n + 1) + u] = arg;
            }
        }
        if n == 0 {
            policy.start_value = best[0];
            break;
        }
        for k in 0..n {
            let m = n - k;
            for u in 0..=k {
                let g = beta_binomial_row(m, model.prior.shifted(u, k - u));
                for j in 0..=k {
                    let x = 2 * j as i64 - k as i64;
                    for a in [DRIFT_UP, DRIFT_DOWN] {
                        let mut cont_r = 0.0;
                        let mut obs = 0.0;
                        for (s, p) in g.iter().enumerate() {
                            let y = landing(x, a, m, s);
                            cont_r += p * r(y);
                            let jy = ((y + n as i64) / 2) as usize;
                            obs += p * best[jy * (n + 1) + u + s];
                        }
                        obs -= c;
                        let next = policy.values[policy.index(n + 1, k, x, a, u).expect("continuation point")];
                        let cont = next + cont_r;
                        let i = policy.index(n, k, x, a, u).expect("lattice point");
                        let inspect = obs - cont > INSPECT_MARGIN;
                        policy.inspect[i] = inspect;
                        policy.values[i] = if inspect { obs } else { cont.max(obs) };
                    }
                }
            }
        }
    }
    Ok(policy)
}
