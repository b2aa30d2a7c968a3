use alloc::vec;
use alloc::vec::Vec;

use super::BayesError;
use crate::model::{ModelError, OcmModel};
use crate::powers::TransitionPowers;
use crate::Matrix;

/// Kernels `p_θ` for a finite parameter set, sharing reward, discount,
/// observation cost and horizon. Powers up to the horizon are cached.
#[derive(Debug, Clone)]
pub struct ThetaFamily {
    thetas: Vec<f64>,
    powers: Vec<TransitionPowers>,
    reward: Matrix,
    c_obs: f64,
    discount: f64,
    horizon: usize,
}

impl ThetaFamily {
    /// One model per parameter value; reward, costs and sizes are taken
    /// from the first model and must agree across all of them.
    pub fn new(thetas: Vec<f64>, models: Vec<OcmModel>) -> Result<Self, BayesError> {
        if thetas.is_empty() || thetas.len() != models.len() {
            return Err(BayesError::Argument("need one model per parameter value".into()));
        }
        let first = &models[0];
        for m in &models[1..] {
            if m.num_states() != first.num_states() || m.num_actions() != first.num_actions() {
                return Err(BayesError::Argument("models differ in shape".into()));
            }
            if m.reward() != first.reward()
                || m.c_obs() != first.c_obs()
                || m.discount() != first.discount()
                || m.horizon() != first.horizon()
            {
                return Err(BayesError::Argument("models differ outside the kernel".into()));
            }
        }
        let horizon = first.horizon();
        let powers = models
            .iter()
            .map(|m| {
                let mut p = TransitionPowers::new(m);
                p.fill(horizon);
                p
            })
            .collect();
        Ok(ThetaFamily {
            thetas,
            powers,
            reward: first.reward().clone(),
            c_obs: first.c_obs(),
            discount: first.discount(),
            horizon,
        })
    }

    /// Builds each member from its parameter value.
    pub fn from_builder<F>(thetas: Vec<f64>, build: F) -> Result<Self, BayesError>
    where
        F: Fn(f64) -> Result<OcmModel, ModelError>,
    {
        let models = thetas.iter().map(|&t| build(t)).collect::<Result<Vec<_>, _>>()?;
        Self::new(thetas, models)
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn num_states(&self) -> usize {
        self.reward.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.reward.ncols()
    }

    pub fn reward(&self) -> &Matrix {
        &self.reward
    }

    pub fn c_obs(&self) -> f64 {
        self.c_obs
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `p_θ^{(m)}` for member `i`, `1 <= m <= horizon`.
    pub fn kernel(&self, i: usize, a: usize, m: usize) -> Result<&Matrix, BayesError> {
        self.powers
            .get(i)
            .and_then(|p| p.cached(a, m))
            .ok_or_else(|| BayesError::Argument(alloc::format!("no kernel for member {i}, action {a}, {m} steps")))
    }

    /// `p_θ^{(m)}(x' | x, a)` for member `i`; `m = 0` is the identity.
    pub fn likelihood(&self, i: usize, a: usize, m: usize, x: usize, x_obs: usize) -> Result<f64, BayesError> {
        let l = self.num_states();
        if x >= l || x_obs >= l {
            return Err(BayesError::Argument(alloc::format!("state out of range (L = {l})")));
        }
        if m == 0 {
            return Ok(if x == x_obs { 1.0 } else { 0.0 });
        }
        Ok(self.kernel(i, a, m)?[(x, x_obs)])
    }
}

/// Posterior weights over a finite parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteThetaBelief {
    pub weights: Vec<f64>,
    pub theta_values: Vec<f64>,
}

impl FiniteThetaBelief {
    pub fn new(weights: Vec<f64>, theta_values: Vec<f64>) -> Result<Self, BayesError> {
        if weights.len() != theta_values.len() || weights.is_empty() {
            return Err(BayesError::Argument("weights and parameter values differ in length".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(BayesError::Argument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(BayesError::Argument(alloc::format!("weights sum to {total}")));
        }
        Ok(FiniteThetaBelief { weights, theta_values })
    }

    pub fn uniform(theta_values: Vec<f64>) -> Self {
        let w = 1.0 / theta_values.len() as f64;
        FiniteThetaBelief {
            weights: vec![w; theta_values.len()],
            theta_values,
        }
    }
}

/// Bayes' rule after observing `x_obs` `m` steps after `x` was observed
/// under action `a`.
pub fn bayes_update_finite(
    belief: &FiniteThetaBelief,
    family: &ThetaFamily,
    m: usize,
    x: usize,
    a: usize,
    x_obs: usize,
) -> Result<FiniteThetaBelief, BayesError> {
    if belief.weights.len() != family.len() {
        return Err(BayesError::Argument("belief and family differ in size".into()));
    }
    let mut w = Vec::with_capacity(family.len());
    for (i, &wi) in belief.weights.iter().enumerate() {
        w.push(wi * family.likelihood(i, a, m, x, x_obs)?);
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(BayesError::DegenerateObservation);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(FiniteThetaBelief {
        weights: w,
        theta_values: belief.theta_values.clone(),
    })
}

/// `Σ_θ w_θ p_θ^{(m)}(x, ·)` under action `a`.
pub fn predictive_finite(
    belief: &FiniteThetaBelief,
    family: &ThetaFamily,
    m: usize,
    x: usize,
    a: usize,
) -> Result<Vec<f64>, BayesError> {
    let l = family.num_states();
    let mut out = vec![0.0; l];
    for (i, &wi) in belief.weights.iter().enumerate() {
        for (y, o) in out.iter_mut().enumerate() {
            *o += wi * family.likelihood(i, a, m, x, y)?;
        }
    }
    Ok(out)
}

/// Nodes `c / G` of the simplex with integer counts `c` summing to `G`,
/// in lexicographic order of `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    resolution: usize,
    dim: usize,
    nodes: Vec<Vec<f64>>,
}

impl SimplexGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self, BayesError> {
        if dim == 0 || resolution == 0 {
            return Err(BayesError::Argument("grid needs dim >= 1 and resolution >= 1".into()));
        }
        let mut nodes = Vec::new();
        let mut counts = vec![0usize; dim];
        compositions(&mut counts, 0, resolution, &mut |c| {
            nodes.push(c.iter().map(|&v| v as f64 / resolution as f64).collect());
        });
        Ok(SimplexGrid { resolution, dim, nodes })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    /// Euclidean nearest node; ties go to the lexicographically smallest.
    pub fn nearest(&self, w: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, node) in self.nodes.iter().enumerate() {
            let d: f64 = node.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d - 1e-15 {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn compositions(counts: &mut Vec<usize>, pos: usize, left: usize, emit: &mut dyn FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        emit(counts);
        return;
    }
    for c in 0..=left {
        counts[pos] = c;
        compositions(counts, pos + 1, left - c, emit);
    }
}

/// Discrete kernel on `(n, x, a) × grid`, with `n` the time since the last
/// observation up to the family's horizon.
#[derive(Debug, Clone)]
pub struct GridKernel {
    grid: SimplexGrid,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    // per (n, x, a, node): (x', node', mass) of an inspection
    jumps: Vec<Vec<(usize, usize, f64)>>,
    // per (n, x, a, node): expected reward of continuing
    cont_reward: Vec<f64>,
}

impl GridKernel {
    pub fn grid(&self) -> &SimplexGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Flat index of `(n, x, a, node)`, `n` 1-based.
    pub fn index(&self, n: usize, x: usize, a: usize, node: usize) -> usize {
        (((n - 1) * self.num_states + x) * self.num_actions + a) * self.grid.len() + node
    }

    /// Inspection transitions `(x', node', mass)` out of a flat index.
    pub fn jumps(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.jumps[i]
    }

    pub fn continuation_reward(&self, i: usize) -> f64 {
        self.cont_reward[i]
    }
}

/// Approximating kernel on `Y × G`: inspecting at `(n, x, a)` with belief
/// node `s` moves to `(x', proj U(s, x'))` with the predictive mass of `x'`;
/// each row is renormalized to sum to one.
pub fn grid_kernel(family: &ThetaFamily, grid_size: usize) -> Result<GridKernel, BayesError> {
    if grid_size < 1 {
        return Err(BayesError::Argument("grid size must be >= 1".into()));
    }
    let grid = SimplexGrid::new(family.len(), grid_size)?;
    let (l, d, big_n) = (family.num_states(), family.num_actions(), family.horizon());
    let r = family.reward();
    let total = big_n * l * d * grid.len();
    let mut jumps = Vec::with_capacity(total);
    let mut cont_reward = Vec::with_capacity(total);
    let mut post = vec![0.0; family.len()];
    for n in 1..=big_n {
        for x in 0..l {
            for a in 0..d {
                for j in 0..grid.len() {
                    let s = grid.node(j);
                    let mut row = Vec::new();
                    let mut cont = 0.0;
                    for y in 0..l {
                        let mut mass = 0.0;
                        for (t, p) in post.iter_mut().enumerate() {
                            *p = s[t] * family.kernel(t, a, n)?[(x, y)];
                            mass += *p;
                        }
                        cont += mass * r[(y, a)];
                        if mass > 0.0 {
                            post.iter_mut().for_each(|p| *p /= mass);
                            row.push((y, grid.nearest(&post), mass));
                        }
                    }
                    let sum: f64 = row.iter().map(|e| e.2).sum();
                    row.iter_mut().for_each(|e| e.2 /= sum);
                    jumps.push(row);
                    cont_reward.push(cont);
                }
            }
        }
    }
    Ok(GridKernel {
        grid,
        num_states: l,
        num_actions: d,
        horizon: big_n,
        jumps,
        cont_reward,
    })
}

/// Values on `(n, x, a) × grid`, laid out by [`GridKernel::index`].
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
}

/// Value iteration for the discounted inspection problem on the grid:
/// `v = max(γ v(n+1) + continuation reward, E[max_a' (γ v(1, x', a', s')
/// + r(x', a'))] - c_obs)`, with the inspection branch alone at `n = N`.
/// Stops when `γ/(1-γ)·‖Δ‖∞ <= tol`.
pub fn solve_grid_value_iteration(family: &ThetaFamily, kernel: &GridKernel, tol: f64) -> GridSolution {
    let (l, d, big_n) = (kernel.num_states(), kernel.num_actions(), kernel.horizon());
    let g = kernel.grid().len();
    let gamma = family.discount();
    let c = family.c_obs();
    let r = family.reward();
    let factor = gamma / (1.0 - gamma);
    let mut v = vec![0.0; kernel.len()];
    let mut best = vec![0.0; l * g];
    let mut iterations = 0;
    loop {
        iterations += 1;
        for y in 0..l {
            for s in 0..g {
                best[y * g + s] = (0..d)
                    .map(|b| gamma * v[kernel.index(1, y, b, s)] + r[(y, b)])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let mut next = vec![0.0; v.len()];
        for n in 1..=big_n {
            for x in 0..l {
                for a in 0..d {
                    for s in 0..g {
                        let i = kernel.index(n, x, a, s);
                        let obs: f64 = kernel.jumps(i).iter().map(|&(y, t, p)| p * best[y * g + t]).sum::<f64>() - c;
                        next[i] = if n == big_n {
                            obs
                        } else {
                            let cont = gamma * v[kernel.index(n + 1, x, a, s)] + kernel.continuation_reward(i);
                            cont.max(obs)
                        };
                    }
                }
            }
        }
        let inc = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if factor * inc <= tol {
            return GridSolution { values: v, iterations };
        }
    }
}
