//! Observation/action policies extracted from solved value arrays, and the
//! closed-form value of the two-state toy model.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::qvi::{QviError, QviSystem};
use crate::solver::{solve_selected, Selection, SolverError};

/// Margin by which the inspection value must beat continuation.
pub const INSPECT_MARGIN: f64 = 1e-9;

/// Inspect/continue decisions over `(n, x, a)` plus the post-observation
/// action map.
#[derive(Debug, Clone, PartialEq)]
pub struct OcmPolicy {
    horizon: usize,
    num_states: usize,
    num_controls: usize,
    inspect: Vec<bool>,
    // indexed x' d + a (a = control before the observation)
    post_obs_action: Vec<usize>,
    // argmax_a' (γ v(1,x,a') + r(x,a')) without switching charges
    preferred: Vec<usize>,
}

impl OcmPolicy {
    /// Assembles a policy from raw parts (for fixed policies built by hand).
    pub fn from_parts(sys: &QviSystem, inspect: Vec<bool>, post_obs_action: Vec<usize>) -> Result<Self, QviError> {
        if inspect.len() != sys.len() {
            return Err(QviError::Layout {
                expected: sys.len(),
                got: inspect.len(),
            });
        }
        if post_obs_action.len() != sys.block_len() || post_obs_action.iter().any(|&a| a >= sys.num_controls()) {
            return Err(QviError::Index("post-observation action map".into()));
        }
        let mut inspect = inspect;
        for x in 0..sys.num_states() {
            for a in 0..sys.num_controls() {
                inspect[sys.index(sys.horizon(), x, a)] = true;
            }
        }
        let d = sys.num_controls();
        let preferred = (0..sys.num_states()).map(|x| post_obs_action[x * d]).collect();
        Ok(OcmPolicy {
            horizon: sys.horizon(),
            num_states: sys.num_states(),
            num_controls: d,
            inspect,
            post_obs_action,
            preferred,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_controls(&self) -> usize {
        self.num_controls
    }

    fn index(&self, n: usize, x: usize, a: usize) -> usize {
        ((n - 1) * self.num_states + x) * self.num_controls + a
    }

    pub fn inspect(&self, n: usize, x: usize, a: usize) -> bool {
        self.inspect[self.index(n, x, a)]
    }

    pub fn inspect_mask(&self) -> &[bool] {
        &self.inspect
    }

    /// Action chosen after observing `x_obs` while `a_prev` was applied.
    pub fn post_obs_action(&self, x_obs: usize, a_prev: usize) -> usize {
        self.post_obs_action[x_obs * self.num_controls + a_prev]
    }

    pub fn post_obs_actions(&self) -> &[usize] {
        &self.post_obs_action
    }

    /// Action chosen at `x` when no switching charge applies. It is also
    /// the post-observation choice when the previous action is itself.
    pub fn preferred_action(&self, x: usize) -> usize {
        self.preferred[x]
    }

    /// `min{n >= 1 : inspect(n, x, a)}`; at most the horizon.
    pub fn waiting_time(&self, x: usize, a: usize) -> usize {
        (1..=self.horizon)
            .find(|&n| self.inspect(n, x, a))
            .unwrap_or(self.horizon)
    }
}

/// Reads the policy off a solved value array. Inspection is chosen where
/// `Mu` exceeds `γ v(n+1) + P^n r_a` by more than [`INSPECT_MARGIN`], and
/// always at `n = N`.
pub fn extract_policy(sys: &QviSystem, v: &[f64]) -> Result<OcmPolicy, QviError> {
    if v.len() != sys.len() {
        return Err(QviError::Layout {
            expected: sys.len(),
            got: v.len(),
        });
    }
    let inner = sys.inner_max(v);
    let mu = sys.obstacle_from(&inner);
    let mut inspect = vec![false; sys.len()];
    for (i, flag) in inspect.iter_mut().enumerate() {
        let (n, x, a) = sys.decompose(i);
        *flag = if n == sys.horizon() {
            true
        } else if sys.pinned(x).is_some() {
            false
        } else {
            let cont = sys.discount() * v[sys.index(n + 1, x, a)] + sys.continuation_reward(a, n)[x];
            mu[i] - cont > INSPECT_MARGIN
        };
    }
    let d = sys.num_controls();
    let mut policy = OcmPolicy::from_parts(sys, inspect, inner.argmax)?;
    for x in 0..sys.num_states() {
        let mut best = f64::NEG_INFINITY;
        for b in 0..d {
            let val = sys.discount() * v[sys.index(1, x, b)] + sys.observation_reward()[(x, b)];
            if val > best {
                best = val;
                policy.preferred[x] = b;
            }
        }
    }
    Ok(policy)
}

/// Value of following a fixed policy, by one direct linear solve.
pub fn evaluate_policy(sys: &QviSystem, policy: &OcmPolicy) -> Result<Vec<f64>, SolverError> {
    let active = vec![false; sys.len()];
    solve_selected(
        sys,
        &Selection {
            rho: 0.0,
            active: &active,
            argmax: policy.post_obs_actions(),
            exact: Some(policy.inspect_mask()),
        },
        0,
    )
}

/// Waiting times over states × parameter settings.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeTable {
    pub labels: Vec<alloc::string::String>,
    pub states: Vec<usize>,
    /// `times[s][j]`: waiting time at `states[s]` under policy `j`.
    pub times: Vec<Vec<usize>>,
}

/// For each state, the waiting time after observing it and choosing the
/// preferred action there.
pub fn waiting_time_table(policies: &[(alloc::string::String, OcmPolicy)], states: &[usize]) -> WaitingTimeTable {
    let times = states
        .iter()
        .map(|&x| {
            policies
                .iter()
                .map(|(_, p)| p.waiting_time(x, p.preferred_action(x)))
                .collect()
        })
        .collect();
    WaitingTimeTable {
        labels: policies.iter().map(|(l, _)| l.clone()).collect(),
        states: states.to_vec(),
        times,
    }
}

/// Closed-form value of the two-state toy model at `(n, x = a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClosedForm {
    pub p: f64,
    pub gamma: f64,
    pub c_obs: f64,
    pub v1: f64,
    /// Optimal inspection interval; `None` when never inspecting is optimal
    /// (the supremum is approached as the interval grows without bound).
    pub t_star: Option<usize>,
    /// Upper bound on what the truncated search may have missed.
    pub tail_bound: f64,
}

impl ToyClosedForm {
    /// `v(n)` by the backward relations from `v(1)`.
    pub fn value(&self, n: usize) -> f64 {
        let reset = 1.0 - self.c_obs + self.gamma * self.v1;
        match self.t_star {
            Some(t) if n >= t => reset,
            Some(t) => {
                // v(n) = Σ_{j=n}^{t-1} γ^{j-n} p^j + γ^{t-n} reset
                let mut acc = 0.0;
                for j in n..t {
                    acc += Float::powi(self.gamma, (j - n) as i32) * Float::powi(self.p, j as i32);
                }
                acc + Float::powi(self.gamma, (t - n) as i32) * reset
            }
            None => Float::powi(self.p, n as i32) / (1.0 - self.gamma * self.p),
        }
    }
}

/// Evaluates the explicit toy solution, searching inspection intervals
/// `2..=m_max` against the every-step branch and the never-inspect limit.
pub fn toy_closed_form(p: f64, gamma: f64, c_obs: f64, m_max: usize) -> ToyClosedForm {
    let every = (1.0 - c_obs) / (1.0 - gamma);
    let never = p / (1.0 - gamma * p);
    let mut best = every;
    let mut t_star = Some(1);
    let mut partial = 0.0; // p Σ_{k=0}^{m-2} (γp)^k
    let mut gp = 1.0;
    for m in 2..=m_max.max(2) {
        partial += p * gp;
        gp *= gamma * p;
        let gm1 = Float::powi(gamma, (m - 1) as i32);
        let val = (partial + gm1 * (1.0 - c_obs)) / (1.0 - gm1 * gamma);
        if val > best {
            best = val;
            t_star = Some(m);
        }
    }
    let gm = Float::powi(gamma, m_max as i32);
    let tail_bound = (gm * (never.abs() + every.abs() + 1.0)).max(0.0);
    if never > best + tail_bound {
        best = never;
        t_star = None;
    }
    ToyClosedForm {
        p,
        gamma,
        c_obs,
        v1: best,
        t_star,
        tail_bound,
    }
}
