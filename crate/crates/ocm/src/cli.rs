//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ocm_core::bayes::{solve_bayes_finite, BayesOcmModel, BetaParams};
use ocm_core::model::{OcmModel, RewardKind};
use ocm_core::solver::PenaltyConfig;
use serde::Serialize;

use crate::error::{OcmError, Result};
use crate::experiments::{self as ex};
use crate::manifest::{thread_pool, threads_from_env, Manifest};
use crate::model_io::load_model;
use crate::table::Table;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ocm", version, about = "Observation-cost MDP solver suite")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, Subcommand, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Penalty solve of one model; writes the solve report, values and policy.
    Solve,
    /// Two-state model: closed form against the solver over a parameter grid.
    Toy,
    /// Newton iterations and penalty increments of the random walk per cost.
    Table1,
    /// Waiting times of the random walk over observation and switching costs.
    Waiting,
    /// Beta-lattice solve of the random walk with unknown drift.
    Bayes,
    /// Monte Carlo statistics and regret curves over priors and costs.
    Simulate,
    /// Checks a model file.
    Validate,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Toy,
    RandomWalk,
    Ctmc,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Reward {
    Peak,
    Inverse,
}

impl From<Reward> for RewardKind {
    fn from(r: Reward) -> Self {
        match r {
            Reward::Peak => RewardKind::Peak,
            Reward::Inverse => RewardKind::Inverse,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Options {
    /// Model file (JSON).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Builtin model with the reference experiment parameters.
    #[arg(long, global = true, value_enum)]
    pub builtin: Option<Builtin>,
    /// First penalty parameter.
    #[arg(long, global = true, default_value_t = 1e3)]
    pub rho0: f64,
    /// Number of penalty doublings after the first solve.
    #[arg(long, global = true, default_value_t = 6)]
    pub doublings: usize,
    /// Relative Newton tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Newton iteration cap per penalty parameter.
    #[arg(long, global = true, default_value_t = 200)]
    pub max_newton: usize,
    /// Observation costs (comma list).
    #[arg(long, global = true, value_delimiter = ',')]
    pub cobs: Vec<f64>,
    /// Switching costs (comma list).
    #[arg(long = "switch-cost", global = true, value_delimiter = ',')]
    pub switch_cost: Vec<f64>,
    /// Truncation or finite horizon.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Root seed of the simulation streams.
    #[arg(long, global = true, default_value_t = 2024)]
    pub seed: u64,
    /// Trajectories per simulation cell.
    #[arg(long, global = true)]
    pub trajectories: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ocm-out")]
    pub out: PathBuf,
    /// Toy persistence probabilities (comma list).
    #[arg(long, global = true, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// Toy discount factors (comma list).
    #[arg(long, global = true, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    /// Beta priors as `alpha:beta` (comma list).
    #[arg(long, global = true, value_delimiter = ',')]
    pub priors: Vec<String>,
    /// True drift parameter of simulated walks.
    #[arg(long, global = true, default_value_t = ex::TABLE3_THETA)]
    pub theta: f64,
    /// Reward of the Bayesian random walk.
    #[arg(long, global = true, value_enum, default_value_t = Reward::Peak)]
    pub reward: Reward,
    /// Cap on stored Beta-lattice entries.
    #[arg(long, global = true, default_value_t = ocm_core::bayes::DEFAULT_MAX_ENTRIES)]
    pub max_lattice: usize,
}

impl Options {
    fn penalty(&self) -> Result<PenaltyConfig> {
        if !(self.tol > 0.0) {
            return Err(OcmError::config("--tol", format!("must be positive, got {}", self.tol)));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(OcmError::config("--rho0", format!("must be positive, got {}", self.rho0)));
        }
        let mut cfg = ex::penalty_config(self.rho0, self.doublings, self.tol);
        cfg.max_newton_iters = self.max_newton;
        Ok(cfg)
    }

    fn list(&self, values: &[f64], default: &[f64], flag: &str) -> Result<Vec<f64>> {
        let out = if values.is_empty() { default.to_vec() } else { values.to_vec() };
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(OcmError::config(flag, format!("non-finite value {bad}")));
        }
        Ok(out)
    }

    fn costs(&self, default: &[f64]) -> Result<Vec<f64>> {
        let c = self.list(&self.cobs, default, "--cobs")?;
        if let Some(bad) = c.iter().find(|&&v| v < 0.0) {
            return Err(OcmError::config("--cobs", format!("costs must be >= 0, got {bad}")));
        }
        Ok(c)
    }

    fn switches(&self, default: &[f64]) -> Result<Vec<f64>> {
        self.list(&self.switch_cost, default, "--switch-cost")
    }

    fn priors(&self, default: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
        if self.priors.is_empty() {
            return Ok(default.to_vec());
        }
        self.priors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let err = || OcmError::config(format!("--priors[{i}]"), format!("expected alpha:beta, got {s:?}"));
                let (a, b) = s.split_once(':').ok_or_else(err)?;
                let a: f64 = a.trim().parse().map_err(|_| err())?;
                let b: f64 = b.trim().parse().map_err(|_| err())?;
                BetaParams::new(a, b).map_err(|e| OcmError::config(format!("--priors[{i}]"), e.to_string()))?;
                Ok((a, b))
            })
            .collect()
    }

    fn trajectories(&self) -> Result<usize> {
        match self.trajectories {
            Some(n) if n < 2 => Err(OcmError::config("--trajectories", "need at least 2")),
            Some(n) => Ok(n),
            None => Ok(ex::TABLE3_TRAJECTORIES),
        }
    }
}

/// The model selected by `--model` or `--builtin`, with `--cobs`,
/// `--switch-cost` and `--horizon` applied on top.
pub fn resolve_model(opts: &Options) -> Result<OcmModel> {
    let first = |v: &[f64]| v.first().copied();
    let c = first(&opts.cobs);
    let g = first(&opts.switch_cost);
    let mut model = match (&opts.model, opts.builtin) {
        (Some(_), Some(_)) => return Err(OcmError::config("--builtin", "give either --model or --builtin")),
        (None, None) => return Err(OcmError::config("--model", "a model file or --builtin is required")),
        (Some(path), None) => load_model(path)?,
        (None, Some(Builtin::Toy)) => ex::toy_model(0.9, 0.9, 0.0, ex::TOY_HORIZON)?,
        (None, Some(Builtin::RandomWalk)) => ex::random_walk_model(0.25, 0.0, ex::WALK_HORIZON)?,
        (None, Some(Builtin::Ctmc)) => ex::ctmc_model(0.1, 100)?,
    };
    if let Some(c) = c {
        model = model.with_c_obs(c)?;
    }
    if let Some(g) = g {
        model = model.with_uniform_switching_cost(g)?;
    }
    if let Some(n) = opts.horizon {
        model = model.with_horizon(n)?;
    }
    Ok(model)
}

fn emit(manifest: &mut Manifest, dir: &Path, name: &str, table: &Table) -> Result<()> {
    table.write_csv(&dir.join(name))?;
    manifest.output(name);
    Ok(())
}

/// Runs a parsed command line; returns the text to print on success.
pub fn run(cli: &Cli) -> Result<String> {
    let opts = &cli.opts;
    let threads = threads_from_env()?;
    let config = serde_json::to_value(cli).map_err(|e| OcmError::Internal(e.to_string()))?;
    let name = serde_json::to_value(cli.command)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let mut manifest = Manifest::start(&name, config, threads);
    let out = &opts.out;
    std::fs::create_dir_all(out).map_err(|e| OcmError::io(out, e))?;
    let mut summary = String::new();

    match cli.command {
        Command::Solve => {
            let model = resolve_model(opts)?;
            let cfg = opts.penalty()?;
            let s = manifest.timed("solve", || ex::solve_model(&model, &cfg))?;
            emit(&mut manifest, out, "solve_report.csv", &ex::report_table(&s.solution.report))?;
            emit(&mut manifest, out, "values.csv", &ex::values_table(&s.sys, &s.solution.values))?;
            emit(&mut manifest, out, "policy.csv", &ex::policy_table(&s.sys, &s.policy))?;
            let r = &s.solution.report;
            summary = format!(
                "solved {} unknowns; Newton iterations {:?}; final residual {:.3e}\n",
                s.sys.len(),
                r.newton_iterations,
                r.final_residual
            );
        }
        Command::Toy => {
            let ps = opts.list(&opts.p, &ex::TOY_P, "--p")?;
            let gammas = opts.list(&opts.gamma, &ex::TOY_GAMMA, "--gamma")?;
            let costs = opts.costs(&ex::TOY_COSTS)?;
            let horizon = opts.horizon.unwrap_or(ex::TOY_HORIZON);
            let cfg = opts.penalty()?;
            let rows = manifest.timed("sweep", || ex::toy_sweep(&ps, &gammas, &costs, horizon, &cfg))?;
            emit(&mut manifest, out, "toy.csv", &ex::toy_table(&rows))?;
            for r in &rows {
                summary += &format!(
                    "p={} gamma={} c_obs={}: closed form {:.10} solver {:.10} gap {:.3e}\n",
                    r.p,
                    r.gamma,
                    r.c_obs,
                    r.closed_form,
                    r.solver,
                    r.gap()
                );
            }
        }
        Command::Table1 => {
            let costs = opts.costs(&ex::TABLE1_COSTS)?;
            let g = opts.switches(&[0.0])?[0];
            let horizon = opts.horizon.unwrap_or(ex::WALK_HORIZON);
            let cfg = opts.penalty()?;
            let rows = manifest.timed("table1", || ex::table1(&costs, g, horizon, &cfg))?;
            emit(&mut manifest, out, "table1.csv", &ex::table1_table(&rows))?;
            for r in &rows {
                summary += &format!(
                    "c_obs={}: iterations {:?} increments {:?}\n",
                    r.c_obs, r.report.newton_iterations, r.report.increments
                );
            }
        }
        Command::Waiting => {
            let costs = opts.costs(&ex::WAITING_COSTS)?;
            let switches = opts.switches(&ex::WAITING_SWITCH)?;
            let horizon = opts.horizon.unwrap_or(ex::WALK_HORIZON);
            let cfg = opts.penalty()?;
            let t = manifest.timed("sweep", || ex::waiting_sweep(&costs, &switches, horizon, &cfg))?;
            emit(&mut manifest, out, "waiting.csv", &t)?;
            summary = format!("{} waiting times written\n", t.rows.len());
        }
        Command::Bayes => {
            let priors = opts.priors(&ex::TABLE3_PRIORS[..1])?;
            let costs = opts.costs(&ex::TABLE3_COSTS[..1])?;
            let horizon = opts.horizon.unwrap_or(ex::TABLE3_HORIZON);
            for &(a, b) in &priors {
                for &c in &costs {
                    let tag = format!("a{a}_b{b}_c{c}");
                    let model = BayesOcmModel::new(BetaParams::new(a, b)?, opts.reward.into(), c, horizon)?
                        .with_max_entries(opts.max_lattice);
                    let policy = manifest.timed(format!("bayes_{tag}"), || Ok(solve_bayes_finite(&model)?))?;
                    emit(&mut manifest, out, &format!("lattice_{tag}.csv"), &ex::bayes_table(&policy))?;
                    emit(&mut manifest, out, &format!("actions_{tag}.csv"), &ex::bayes_action_table(&policy))?;
                    summary += &format!("Beta({a},{b}) c_obs={c}: value {:.10}\n", policy.start_value());
                }
            }
        }
        Command::Simulate => {
            let priors = opts.priors(&ex::TABLE3_PRIORS)?;
            let costs = opts.costs(&ex::TABLE3_COSTS)?;
            let horizon = opts.horizon.unwrap_or(ex::TABLE3_HORIZON);
            let n = opts.trajectories()?;
            if !(0.0..=1.0).contains(&opts.theta) {
                return Err(OcmError::config("--theta", format!("must lie in [0, 1], got {}", opts.theta)));
            }
            // the lattice cap is checked up front for the largest model
            BayesOcmModel::new(BetaParams::new(1.0, 1.0)?, opts.reward.into(), 0.0, horizon)
                .map(|m| m.with_max_entries(opts.max_lattice))
                .and_then(|m| {
                    if m.lattice_size() > m.max_entries {
                        Err(ocm_core::bayes::BayesError::Resource {
                            required: m.lattice_size(),
                            cap: m.max_entries,
                        })
                    } else {
                        Ok(())
                    }
                })?;
            let pool = thread_pool(threads)?;
            let cells = manifest.timed("simulate", || {
                ex::table3_grid(&pool, &priors, &costs, opts.theta, horizon, n, opts.seed)
            })?;
            for c in &cells {
                manifest.seed(format!("Beta({},{}) c_obs={}", c.alpha, c.beta, c.c_obs), c.seed);
            }
            emit(&mut manifest, out, "table3.csv", &ex::table3_long(&cells))?;
            emit(&mut manifest, out, "table3_wide.csv", &ex::table3_wide(&cells))?;
            emit(&mut manifest, out, "regret.csv", &ex::regret_table(&cells))?;
            for c in &cells {
                let s = &c.stats;
                summary += &format!(
                    "Beta({},{}) c_obs={}: observations {:.3} ± {:.3}, profit {:.3} ± {:.3}, HDI {:.4} ± {:.4}\n",
                    c.alpha,
                    c.beta,
                    c.c_obs,
                    s.avg_observations,
                    s.se_observations,
                    s.avg_profit,
                    s.se_profit,
                    s.avg_hdi_width,
                    s.se_hdi_width
                );
            }
        }
        Command::Validate => {
            let path = opts
                .model
                .as_ref()
                .ok_or_else(|| OcmError::config("--model", "validate needs a model file"))?;
            let model = load_model(path)?;
            let sys = ocm_core::qvi::QviSystem::new(&model);
            summary = format!(
                "{}: ok ({} states, {} actions, horizon {}, {} unknowns)\n",
                path.display(),
                model.num_states(),
                model.num_actions(),
                model.horizon(),
                sys.len()
            );
            for w in sys.warnings() {
                summary += &format!("warning: {w}\n");
            }
        }
    }
    manifest.write(out)?;
    Ok(summary)
}
