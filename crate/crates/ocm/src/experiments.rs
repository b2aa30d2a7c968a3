//! Experiment drivers shared by the command line and the acceptance checks.

use std::time::Instant;

use ocm_core::bayes::{solve_bayes_finite, BayesOcmModel, BayesPolicy, BetaParams};
use ocm_core::model::{build_random_walk, build_two_state_toy, drift_sign, OcmModel, RateModel, RewardKind, RewardTiming};
use ocm_core::policy::{extract_policy, toy_closed_form, OcmPolicy};
use ocm_core::qvi::QviSystem;
use ocm_core::sim::{
    mc_stats, reference_rewards, regret, simulate, Controller, McStats, RegretCurve, RegretMode, Trajectory,
};
use ocm_core::solver::{solve_qvi, PenaltyConfig, PenaltySolution, SolveReport};
use ocm_core::Matrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::row;
use crate::table::{Cell, Table};

/// Random-walk experiment: drift parameter, half-width, discount, horizon.
pub const WALK_THETA: f64 = 0.75;
pub const WALK_HALF_WIDTH: usize = 50;
pub const WALK_GAMMA: f64 = 0.99;
pub const WALK_HORIZON: usize = 500;
pub const TABLE1_COSTS: [f64; 8] = [0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 6.0];

pub const TOY_P: [f64; 4] = [0.5, 0.8, 0.9, 0.95];
pub const TOY_GAMMA: [f64; 3] = [0.8, 0.9, 0.99];
pub const TOY_COSTS: [f64; 4] = [0.0, 0.1, 0.5, 1.0];
pub const TOY_HORIZON: usize = 400;
// interval search range of the closed form
const TOY_M_MAX: usize = 5000;

pub const WAITING_COSTS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];
pub const WAITING_SWITCH: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

pub const TABLE3_PRIORS: [(f64, f64); 3] = [(2.0, 5.0), (3.0, 3.0), (5.0, 2.0)];
pub const TABLE3_COSTS: [f64; 4] = [0.1, 0.25, 0.5, 0.75];
pub const TABLE3_THETA: f64 = 0.3;
pub const TABLE3_HORIZON: usize = 50;
pub const TABLE3_TRAJECTORIES: usize = 5000;

pub const CTMC_STATES: usize = 16;

/// The random walk on `{-50, ..., 50}` with reward `1/(|x|+1)`, rewards
/// credited at the end of each step.
pub fn random_walk_model(c_obs: f64, switch_cost: f64, horizon: usize) -> Result<OcmModel> {
    Ok(build_random_walk(WALK_THETA, WALK_HALF_WIDTH, RewardKind::Inverse)?
        .with_discount(WALK_GAMMA)?
        .with_horizon(horizon)?
        .with_c_obs(c_obs)?
        .with_uniform_switching_cost(switch_cost)?
        .with_reward_timing(RewardTiming::EndOfStep))
}

pub fn toy_model(p: f64, gamma: f64, c_obs: f64, horizon: usize) -> Result<OcmModel> {
    Ok(build_two_state_toy(p)?
        .with_discount(gamma)?
        .with_c_obs(c_obs)?
        .with_horizon(horizon)?)
}

/// Synthetic 16-state birth-death chain in continuous time, discretized by
/// `P = exp(Q)`. State 0 is absorbing with value 0. Action 0 drifts down
/// slowly for free; action 1 drifts up at a running cost.
pub fn ctmc_rate_model(c_obs: f64) -> RateModel {
    let l = CTMC_STATES;
    let rates = [(0.15, 0.35), (0.45, 0.1)]; // (up, down) per action
    let generators = rates
        .iter()
        .map(|&(up, down)| {
            let mut q = Matrix::zeros(l, l);
            for x in 1..l {
                if x + 1 < l {
                    q[(x, x + 1)] = up * (1.0 + 0.05 * x as f64);
                }
                q[(x, x - 1)] = down * (1.0 + 0.1 * (l - x) as f64 / l as f64);
                let s: f64 = (0..l).map(|y| q[(x, y)]).sum();
                q[(x, x)] = -s;
            }
            q
        })
        .collect();
    let reward = Matrix::from_fn(l, 2, |x, a| x as f64 / (l - 1) as f64 - 0.2 * a as f64);
    RateModel {
        generators,
        reward,
        discount: 0.95,
        c_obs,
        absorbing: vec![(0, 0.0)],
    }
}

pub fn ctmc_model(c_obs: f64, horizon: usize) -> Result<OcmModel> {
    Ok(ctmc_rate_model(c_obs).to_ocm(horizon)?)
}

pub fn penalty_config(rho0: f64, doublings: usize, rel_tol: f64) -> PenaltyConfig {
    PenaltyConfig {
        rho: rho0,
        doublings,
        rel_tol,
        ..PenaltyConfig::default()
    }
}

pub struct Solved {
    pub sys: QviSystem,
    pub solution: PenaltySolution,
    pub policy: OcmPolicy,
}

/// Penalty solve with the wall time recorded in the report.
pub fn solve_model(model: &OcmModel, config: &PenaltyConfig) -> Result<Solved> {
    config.validate()?;
    let t = Instant::now();
    let sys = QviSystem::new(model);
    let mut solution = solve_qvi(&sys, config)?;
    solution.report.wall_seconds = Some(t.elapsed().as_secs_f64());
    let policy = extract_policy(&sys, &solution.values)?;
    Ok(Solved { sys, solution, policy })
}

fn rho_header(report: &SolveReport) -> Vec<String> {
    report.rhos.iter().map(|r| format!("{r}")).collect()
}

fn report_rows(report: &SolveReport) -> [Vec<Cell>; 2] {
    let iters = report.newton_iterations.iter().map(|&k| Cell::from(k)).collect();
    let mut incs: Vec<Cell> = report.increments.iter().map(|&v| Cell::from(v)).collect();
    incs.resize(report.rhos.len(), Cell::Empty);
    [iters, incs]
}

/// Line (a): Newton iterations per ρ. Line (b): `‖v^ρ - v^{2ρ}‖∞`, empty
/// in the last column.
pub fn report_table(report: &SolveReport) -> Table {
    let mut t = Table::new(std::iter::once("line".to_string()).chain(rho_header(report)));
    for (label, cells) in ["a", "b"].iter().zip(report_rows(report)) {
        let mut r = row![*label];
        r.extend(cells);
        t.push(r);
    }
    t
}

pub fn values_table(sys: &QviSystem, values: &[f64]) -> Table {
    let mut t = Table::new(["n", "x", "a", "value"]);
    for (i, &v) in values.iter().enumerate() {
        let (n, x, a) = sys.decompose(i);
        t.push(row![n, x, a, v]);
    }
    t
}

pub fn policy_table(sys: &QviSystem, policy: &OcmPolicy) -> Table {
    let mut t = Table::new(["n", "x", "a", "inspect", "post_obs_action"]);
    for i in 0..sys.len() {
        let (n, x, a) = sys.decompose(i);
        t.push(row![n, x, a, policy.inspect(n, x, a), policy.post_obs_action(x, a)]);
    }
    t
}

#[derive(Debug, Clone)]
pub struct Table1Row {
    pub c_obs: f64,
    pub report: SolveReport,
}

pub fn table1(costs: &[f64], switch_cost: f64, horizon: usize, config: &PenaltyConfig) -> Result<Vec<Table1Row>> {
    costs
        .iter()
        .map(|&c| {
            let model = random_walk_model(c, switch_cost, horizon)?;
            let s = solve_model(&model, config)?;
            Ok(Table1Row {
                c_obs: c,
                report: s.solution.report,
            })
        })
        .collect()
}

pub fn table1_table(rows: &[Table1Row]) -> Table {
    let rhos = rows.first().map(|r| rho_header(&r.report)).unwrap_or_default();
    let mut t = Table::new(["c_obs".to_string(), "line".to_string()].into_iter().chain(rhos));
    for r in rows {
        for (label, cells) in ["a", "b"].iter().zip(report_rows(&r.report)) {
            let mut out = row![r.c_obs, *label];
            out.extend(cells);
            t.push(out);
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRow {
    pub p: f64,
    pub gamma: f64,
    pub c_obs: f64,
    pub t_star: Option<usize>,
    pub closed_form: f64,
    pub solver: f64,
    pub rho: f64,
}

impl ToyRow {
    pub fn gap(&self) -> f64 {
        (self.solver - self.closed_form).abs()
    }

    /// Whether the gap is within `5/ρ` at the largest penalty.
    pub fn within_bound(&self) -> bool {
        self.gap() <= 5.0 / self.rho
    }
}

pub fn toy_row(p: f64, gamma: f64, c_obs: f64, horizon: usize, config: &PenaltyConfig) -> Result<ToyRow> {
    let model = toy_model(p, gamma, c_obs, horizon)?;
    let s = solve_model(&model, config)?;
    let closed = toy_closed_form(p, gamma, c_obs, TOY_M_MAX);
    Ok(ToyRow {
        p,
        gamma,
        c_obs,
        t_star: closed.t_star,
        closed_form: closed.v1,
        solver: s.solution.values[s.sys.index(1, 0, 0)],
        rho: *s.solution.report.rhos.last().expect("nonempty schedule"),
    })
}

pub fn toy_sweep(ps: &[f64], gammas: &[f64], costs: &[f64], horizon: usize, config: &PenaltyConfig) -> Result<Vec<ToyRow>> {
    let mut out = Vec::new();
    for &p in ps {
        for &g in gammas {
            for &c in costs {
                out.push(toy_row(p, g, c, horizon, config)?);
            }
        }
    }
    Ok(out)
}

pub fn toy_table(rows: &[ToyRow]) -> Table {
    let mut t = Table::new([
        "p", "gamma", "c_obs", "t_star", "closed_form", "solver", "gap", "rho", "bound", "within_bound",
    ]);
    for r in rows {
        let t_star = r.t_star.map(Cell::from).unwrap_or(Cell::Empty);
        t.push(vec![
            r.p.into(),
            r.gamma.into(),
            r.c_obs.into(),
            t_star,
            r.closed_form.into(),
            r.solver.into(),
            r.gap().into(),
            r.rho.into(),
            (5.0 / r.rho).into(),
            r.within_bound().into(),
        ]);
    }
    t
}

/// Waiting time after observing each position and switching to the
/// preferred drift, for every `(c_obs, g)` pair.
pub fn waiting_sweep(costs: &[f64], switches: &[f64], horizon: usize, config: &PenaltyConfig) -> Result<Table> {
    let mut t = Table::new(["c_obs", "switch_cost", "x", "action", "waiting_time"]);
    for &c in costs {
        for &g in switches {
            let model = random_walk_model(c, g, horizon)?;
            let s = solve_model(&model, config)?;
            for i in 0..model.num_states() {
                let a = s.policy.preferred_action(i);
                let x = i as i64 - WALK_HALF_WIDTH as i64;
                t.push(row![c, g, x, drift_sign(a), s.policy.waiting_time(i, a)]);
            }
        }
    }
    Ok(t)
}

pub fn bayes_solve(prior: (f64, f64), reward: RewardKind, c_obs: f64, horizon: usize) -> Result<BayesPolicy> {
    let prior = BetaParams::new(prior.0, prior.1)?;
    Ok(solve_bayes_finite(&BayesOcmModel::new(prior, reward, c_obs, horizon)?)?)
}

/// Lattice values. `a` is the action index in force, `action` its drift.
pub fn bayes_table(policy: &BayesPolicy) -> Table {
    let mut t = Table::new(["n", "k", "x", "a", "u", "w", "value", "inspect", "action"]);
    for e in policy.entries() {
        t.push(row![e.n, e.k, e.x, e.a, e.u, e.w, e.value, e.inspect, drift_sign(e.a)]);
    }
    t
}

/// Action chosen after observing `x` at time `n` with `u` up-successes.
pub fn bayes_action_table(policy: &BayesPolicy) -> Table {
    let mut t = Table::new(["n", "x", "u", "w", "action"]);
    for n in 0..policy.horizon() {
        for j in 0..=n {
            let x = 2 * j as i64 - n as i64;
            for u in 0..=n {
                let a = policy.post_obs_action(n, x, u).expect("post-observation point");
                t.push(row![n, x, u, n - u, drift_sign(a)]);
            }
        }
    }
    t
}

/// Trajectories on streams `0..count` of `seed`, in stream order whatever
/// the worker count.
pub fn parallel_trajectories<C: Controller + Sync + ?Sized>(
    pool: &rayon::ThreadPool,
    model: &BayesOcmModel,
    controller: &C,
    true_theta: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|s| simulate(model, controller, true_theta, seed, s))
            .collect::<std::result::Result<Vec<_>, _>>()
    })
    .map_err(Into::into)
}

#[derive(Debug, Clone)]
pub struct Table3Cell {
    pub alpha: f64,
    pub beta: f64,
    pub c_obs: f64,
    pub seed: u64,
    pub start_value: f64,
    pub stats: McStats,
    pub regret_full: RegretCurve,
    pub regret_cost: RegretCurve,
}

#[allow(clippy::too_many_arguments)]
pub fn table3_cell(
    pool: &rayon::ThreadPool,
    prior: (f64, f64),
    c_obs: f64,
    true_theta: f64,
    horizon: usize,
    trajectories: usize,
    seed: u64,
) -> Result<Table3Cell> {
    let reward = RewardKind::Peak;
    let model = BayesOcmModel::new(BetaParams::new(prior.0, prior.1)?, reward, c_obs, horizon)?;
    let policy = solve_bayes_finite(&model)?;
    let trajs = parallel_trajectories(pool, &model, &policy, true_theta, seed, trajectories)?;
    let full = reference_rewards(true_theta, reward, c_obs, horizon, RegretMode::Full)?;
    let cost = reference_rewards(true_theta, reward, c_obs, horizon, RegretMode::CostAdjusted)?;
    Ok(Table3Cell {
        alpha: prior.0,
        beta: prior.1,
        c_obs,
        seed,
        start_value: policy.start_value(),
        stats: mc_stats(&trajs)?,
        regret_full: regret(&trajs, &full)?,
        regret_cost: regret(&trajs, &cost)?,
    })
}

/// Every prior × cost cell; cell `i` in row-major order uses seed `seed + i`.
pub fn table3_grid(
    pool: &rayon::ThreadPool,
    priors: &[(f64, f64)],
    costs: &[f64],
    true_theta: f64,
    horizon: usize,
    trajectories: usize,
    seed: u64,
) -> Result<Vec<Table3Cell>> {
    let mut out = Vec::with_capacity(priors.len() * costs.len());
    for &p in priors {
        for &c in costs {
            let s = seed.wrapping_add(out.len() as u64);
            out.push(table3_cell(pool, p, c, true_theta, horizon, trajectories, s)?);
        }
    }
    Ok(out)
}

/// One row per cell with means and standard errors.
pub fn table3_long(cells: &[Table3Cell]) -> Table {
    let mut t = Table::new([
        "alpha",
        "beta",
        "c_obs",
        "avg_observations",
        "se_observations",
        "avg_profit",
        "se_profit",
        "avg_hdi_width",
        "se_hdi_width",
        "trajectories",
        "solver_value",
        "seed",
    ]);
    for c in cells {
        let s = &c.stats;
        t.push(row![
            c.alpha,
            c.beta,
            c.c_obs,
            s.avg_observations,
            s.se_observations,
            s.avg_profit,
            s.se_profit,
            s.avg_hdi_width,
            s.se_hdi_width,
            s.count,
            c.start_value,
            c.seed as i64
        ]);
    }
    t
}

/// Priors as rows, costs as columns, lines (a) observations, (b) profit,
/// (c) HDI width.
pub fn table3_wide(cells: &[Table3Cell]) -> Table {
    let mut costs: Vec<f64> = Vec::new();
    let mut priors: Vec<(f64, f64)> = Vec::new();
    for c in cells {
        if !costs.contains(&c.c_obs) {
            costs.push(c.c_obs);
        }
        if !priors.contains(&(c.alpha, c.beta)) {
            priors.push((c.alpha, c.beta));
        }
    }
    let mut t = Table::new(
        ["alpha".to_string(), "beta".to_string(), "line".to_string()]
            .into_iter()
            .chain(costs.iter().map(|c| format!("{c}"))),
    );
    let lines: [(&str, fn(&McStats) -> f64); 3] = [
        ("a", |s| s.avg_observations),
        ("b", |s| s.avg_profit),
        ("c", |s| s.avg_hdi_width),
    ];
    for &(a, b) in &priors {
        for (label, get) in lines {
            let mut r = row![a, b, label];
            for &c in &costs {
                let cell = cells.iter().find(|x| x.alpha == a && x.beta == b && x.c_obs == c);
                r.push(cell.map(|x| Cell::from(get(&x.stats))).unwrap_or(Cell::Empty));
            }
            t.push(r);
        }
    }
    t
}

pub fn regret_table(cells: &[Table3Cell]) -> Table {
    let mut t = Table::new(["alpha", "beta", "c_obs", "mode", "t", "mean", "stderr"]);
    for c in cells {
        for (mode, curve) in [("full", &c.regret_full), ("cost_adjusted", &c.regret_cost)] {
            for (i, (m, s)) in curve.mean.iter().zip(&curve.stderr).enumerate() {
                t.push(row![c.alpha, c.beta, c.c_obs, mode, i, *m, *s]);
            }
        }
    }
    t
}
