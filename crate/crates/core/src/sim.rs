//! Monte Carlo rollouts of inspection policies on the Bayesian random walk,
//! regret curves and posterior summaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{BayesError, BayesOcmModel, BayesPolicy, BetaParams};
use crate::model::{build_random_walk, ModelError, RewardKind, DRIFT_UP};
use crate::qvi::{finite_horizon_system, FiniteHorizonSystem, QviError};
use crate::solver::{finite_horizon_policy, finite_initial_value, solve_finite_horizon};
use crate::special::{beta_quantile, beta_quantile_from};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("controller has no decision at time {n} (last observation at {k}, x = {x}, u = {u})")]
    Lattice { n: usize, k: usize, x: i64, u: usize },
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qvi(#[from] QviError),
}

/// Decision rule of an inspection policy on the integer random walk started
/// observed at the origin.
pub trait Controller {
    fn horizon(&self) -> usize;

    /// Action applied after the free observation at time 0.
    fn start_action(&self) -> usize;

    /// Whether to inspect at time `n` given the last observation `(k, x)`,
    /// the action `a` applied since, and `u` successes observed up to `k`.
    fn inspect(&self, n: usize, k: usize, x: i64, a: usize, u: usize) -> Option<bool>;

    /// Action after observing `x` at time `n`, with `u` successes up to `n`.
    fn post_obs_action(&self, n: usize, x: i64, a_prev: usize, u: usize) -> Option<usize>;
}

impl Controller for BayesPolicy {
    fn horizon(&self) -> usize {
        BayesPolicy::horizon(self)
    }

    fn start_action(&self) -> usize {
        BayesPolicy::start_action(self)
    }

    fn inspect(&self, n: usize, k: usize, x: i64, a: usize, u: usize) -> Option<bool> {
        BayesPolicy::inspect(self, n, k, x, a, u)
    }

    fn post_obs_action(&self, n: usize, x: i64, _a_prev: usize, u: usize) -> Option<usize> {
        BayesPolicy::post_obs_action(self, n, x, u)
    }
}

/// Optimal inspection policy when the drift parameter is known, from the
/// finite-horizon QVI on a walk wide enough that the boundary is never
/// reached from the origin.
#[derive(Debug, Clone)]
pub struct KnownThetaController {
    theta: f64,
    half: usize,
    sys: FiniteHorizonSystem,
    values: Vec<f64>,
    inspect: Vec<bool>,
    post_action: Vec<usize>,
}

impl KnownThetaController {
    pub fn solve(theta: f64, reward: RewardKind, c_obs: f64, horizon: usize) -> Result<Self, SimError> {
        let half = horizon + 1;
        let model = build_random_walk(theta, half, reward)?.with_c_obs(c_obs)?;
        let sys = finite_horizon_system(&model, horizon)?;
        let values = solve_finite_horizon(&sys);
        let pol = finite_horizon_policy(&sys, &values);
        Ok(KnownThetaController {
            theta,
            half,
            sys,
            values,
            inspect: pol.inspect,
            post_action: pol.post_action,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn state(&self, x: i64) -> Option<usize> {
        let i = x + self.half as i64;
        (0..self.sys.num_states() as i64).contains(&i).then_some(i as usize)
    }

    /// Optimal expected total reward from the observed origin.
    pub fn value(&self) -> f64 {
        finite_initial_value(&self.sys, &self.values, self.half).0
    }

    /// Expected net reward at each time `0..=N` under this policy, by exact
    /// propagation of the law of the augmented state.
    pub fn expected_rewards(&self) -> Vec<f64> {
        let sys = &self.sys;
        let (l, d, big_n) = (sys.num_states(), sys.num_actions(), sys.horizon());
        let c = sys.c_obs();
        let r = sys.reward();
        let mut out = vec![0.0; big_n + 1];
        let a0 = self.start_action();
        out[0] = r[(self.half, a0)];
        // mass[(k L + x) d + a] at the current time, k < n
        let mut mass = vec![0.0; big_n * l * d];
        mass[self.half * d + a0] = 1.0;
        for n in 1..=big_n {
            let mut fresh = vec![0.0; l * d];
            let mut total = 0.0;
            for k in 0..n {
                let m = n - k;
                for x in 0..l {
                    for a in 0..d {
                        let q = mass[(k * l + x) * d + a];
                        if q == 0.0 {
                            continue;
                        }
                        let stays = n == big_n || !self.inspect[sys.index(n, k, x, a)];
                        if stays {
                            total += q * sys.step_reward(a, m)[x];
                        } else {
                            mass[(k * l + x) * d + a] = 0.0;
                            let p = sys.kernel(a, m);
                            for y in 0..l {
                                let py = p[(x, y)];
                                if py == 0.0 {
                                    continue;
                                }
                                let b = self.post_action[(n * l + y) * d + a];
                                total += q * py * (r[(y, b)] - c);
                                fresh[y * d + b] += q * py;
                            }
                        }
                    }
                }
            }
            if n < big_n {
                mass[n * l * d..(n + 1) * l * d].copy_from_slice(&fresh);
            }
            out[n] = total;
        }
        out
    }
}

impl Controller for KnownThetaController {
    fn horizon(&self) -> usize {
        self.sys.horizon()
    }

    fn start_action(&self) -> usize {
        finite_initial_value(&self.sys, &self.values, self.half).1
    }

    fn inspect(&self, n: usize, k: usize, x: i64, a: usize, _u: usize) -> Option<bool> {
        if k >= n || n >= self.sys.horizon() || a >= self.sys.num_actions() {
            return None;
        }
        Some(self.inspect[self.sys.index(n, k, self.state(x)?, a)])
    }

    fn post_obs_action(&self, n: usize, x: i64, a_prev: usize, _u: usize) -> Option<usize> {
        let (l, d) = (self.sys.num_states(), self.sys.num_actions());
        if n >= self.sys.horizon() || a_prev >= d {
            return None;
        }
        Some(self.post_action[(n * l + self.state(x)?) * d + a_prev])
    }
}

/// One simulated path. Index `n` runs over times `0..=N`; time 0 is the
/// free initial observation at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub states: Vec<i64>,
    pub actions: Vec<usize>,
    pub inspections: Vec<bool>,
    /// `r(x_n, a_n) - i_n c_obs` (no charge at time 0).
    pub rewards: Vec<f64>,
    /// Paid observations.
    pub observations: usize,
    /// Posterior after each observation, time 0 included, as `(time, params)`.
    pub posteriors: Vec<(usize, BetaParams)>,
}

impl Trajectory {
    pub fn profit(&self) -> f64 {
        neumaier_sum(self.rewards.iter().copied())
    }

    pub fn final_posterior(&self) -> BetaParams {
        self.posteriors.last().expect("time-0 posterior").1
    }
}

/// Rolls the walk forward under `p_{θ*}`. The stream `stream` of the
/// ChaCha generator seeded by `seed` drives the steps, so each trajectory
/// is reproducible on its own.
pub fn simulate<C: Controller + ?Sized>(
    model: &BayesOcmModel,
    controller: &C,
    true_theta: f64,
    seed: u64,
    stream: u64,
) -> Result<Trajectory, SimError> {
    if !(0.0..=1.0).contains(&true_theta) {
        return Err(SimError::Argument(alloc::format!("true theta {true_theta} outside [0, 1]")));
    }
    let big_n = model.horizon;
    if controller.horizon() != big_n {
        return Err(SimError::Argument(alloc::format!(
            "controller horizon {} differs from model horizon {big_n}",
            controller.horizon()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let c = model.c_obs;
    let reward = |x: i64| model.reward.value(x);

    let mut states = Vec::with_capacity(big_n + 1);
    let mut actions = Vec::with_capacity(big_n + 1);
    let mut inspections = Vec::with_capacity(big_n + 1);
    let mut rewards = Vec::with_capacity(big_n + 1);
    let mut posteriors = vec![(0, model.prior)];
    let mut observations = 0;

    let mut x = 0i64;
    let mut a = controller.start_action();
    states.push(x);
    actions.push(a);
    inspections.push(true);
    rewards.push(reward(x));
    let (mut k, mut xk, mut u) = (0usize, 0i64, 0usize);
    for n in 1..=big_n {
        let step_up = if a == DRIFT_UP {
            rng.random::<f64>() < true_theta
        } else {
            rng.random::<f64>() >= true_theta
        };
        x += if step_up { 1 } else { -1 };
        let inspect = n < big_n
            && controller
                .inspect(n, k, xk, a, u)
                .ok_or(SimError::Lattice { n, k, x: xk, u })?;
        let prev = a;
        if inspect {
            let m = n - k;
            let ups = ((x - xk + m as i64) / 2) as usize;
            u += if a == DRIFT_UP { ups } else { m - ups };
            k = n;
            xk = x;
            a = controller
                .post_obs_action(n, x, prev, u)
                .ok_or(SimError::Lattice { n, k, x, u })?;
            observations += 1;
            posteriors.push((n, model.prior.shifted(u, n - u)));
        }
        assert!(inspect || a == prev, "action changed without an observation");
        states.push(x);
        actions.push(a);
        inspections.push(inspect);
        rewards.push(reward(x) - if inspect { c } else { 0.0 });
    }
    Ok(Trajectory {
        seed,
        stream,
        states,
        actions,
        inspections,
        rewards,
        observations,
        posteriors,
    })
}

/// `count` trajectories on streams `0..count`.
pub fn run_trajectories<C: Controller + ?Sized>(
    model: &BayesOcmModel,
    controller: &C,
    true_theta: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>, SimError> {
    (0..count as u64)
        .map(|s| simulate(model, controller, true_theta, seed, s))
        .collect()
}

/// Which reference the regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegretMode {
    /// Known parameter, free observations.
    Full,
    /// Known parameter, same observation cost.
    CostAdjusted,
}

/// Expected net reward per time step of the known-parameter optimum.
pub fn reference_rewards(
    true_theta: f64,
    reward: RewardKind,
    c_obs: f64,
    horizon: usize,
    mode: RegretMode,
) -> Result<Vec<f64>, SimError> {
    let c = match mode {
        RegretMode::Full => 0.0,
        RegretMode::CostAdjusted => c_obs,
    };
    Ok(KnownThetaController::solve(true_theta, reward, c, horizon)?.expected_rewards())
}

/// Mean cumulative regret over time with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// `Σ_{m <= t} (reference_m - reward_m)` averaged over trajectories.
pub fn regret(trajectories: &[Trajectory], reference: &[f64]) -> Result<RegretCurve, SimError> {
    let first = trajectories
        .first()
        .ok_or_else(|| SimError::Argument("no trajectories".into()))?;
    let len = first.rewards.len();
    if reference.len() != len || trajectories.iter().any(|t| t.rewards.len() != len) {
        return Err(SimError::Argument("reference and trajectory lengths differ".into()));
    }
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let mut cum = vec![0.0; trajectories.len()];
    for t in 0..len {
        for (acc, tr) in cum.iter_mut().zip(trajectories) {
            *acc += reference[t] - tr.rewards[t];
        }
        let (m, se) = mean_and_stderr(&cum);
        mean.push(m);
        stderr.push(se);
    }
    Ok(RegretCurve { mean, stderr })
}

/// Least-squares slope of `ln R(t)` on `ln t` over `t0..=t1`; `None` when
/// the curve is not positive there.
pub fn growth_exponent(curve: &[f64], t0: usize, t1: usize) -> Option<f64> {
    if t0 == 0 || t1 <= t0 || t1 >= curve.len() {
        return None;
    }
    let pts: Vec<(f64, f64)> = (t0..=t1)
        .map(|t| (libm::log(t as f64), curve[t]))
        .collect();
    if pts.iter().any(|p| !(p.1 > 0.0)) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| libm::log(p.1)).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (libm::log(p.1) - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// Width of the narrowest interval holding `mass` of `Beta(α, β)`, from a
/// scan of lower-tail offsets at step `1e-4`.
pub fn hdi_width(params: BetaParams, mass: f64) -> f64 {
    const STEP: f64 = 1e-4;
    let slack = 1.0 - mass;
    let steps = libm::round(slack / STEP) as usize;
    let (a, b) = (params.alpha, params.beta);
    let mut best = f64::INFINITY;
    let mut ql = beta_quantile(0.0, a, b);
    let mut qh = beta_quantile(mass, a, b);
    for i in 0..=steps {
        let lo = (i as f64 * STEP).min(slack);
        ql = beta_quantile_from(lo, a, b, ql);
        qh = beta_quantile_from(lo + mass, a, b, qh);
        if qh - ql < best {
            best = qh - ql;
        }
    }
    best
}

/// Table-3 style summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStats {
    pub avg_observations: f64,
    pub se_observations: f64,
    pub avg_profit: f64,
    pub se_profit: f64,
    pub avg_hdi_width: f64,
    pub se_hdi_width: f64,
    pub count: usize,
}

/// Means and standard errors of paid observations, total profit and the
/// 95% HDI width of each final posterior.
pub fn mc_stats(trajectories: &[Trajectory]) -> Result<McStats, SimError> {
    if trajectories.len() < 2 {
        return Err(SimError::Argument("need at least two trajectories".into()));
    }
    let obs: Vec<f64> = trajectories.iter().map(|t| t.observations as f64).collect();
    let profit: Vec<f64> = trajectories.iter().map(Trajectory::profit).collect();
    let mut cache: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let hdi: Vec<f64> = trajectories
        .iter()
        .map(|t| {
            let p = t.final_posterior();
            *cache
                .entry((p.alpha.to_bits(), p.beta.to_bits()))
                .or_insert_with(|| hdi_width(p, 0.95))
        })
        .collect();
    let (mo, so) = mean_and_stderr(&obs);
    let (mp, sp) = mean_and_stderr(&profit);
    let (mh, sh) = mean_and_stderr(&hdi);
    Ok(McStats {
        avg_observations: mo,
        se_observations: so,
        avg_profit: mp,
        se_profit: sp,
        avg_hdi_width: mh,
        se_hdi_width: sh,
        count: trajectories.len(),
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let Some(&x0) = xs.first() else {
        return (f64::NAN, f64::NAN);
    };
    // shifted by the first sample so identical samples give exact zeros
    let shift = neumaier_sum(xs.iter().map(|x| x - x0)) / n;
    let mean = x0 + shift;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = neumaier_sum(xs.iter().map(|x| (x - x0 - shift) * (x - x0 - shift)));
    (mean, libm::sqrt(ss / (n - 1.0) / n))
}

/// Compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if libm::fabs(sum) >= libm::fabs(x) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
