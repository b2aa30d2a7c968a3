//! Observation-cost model instances and their builders.
//!
//! An [`OcmModel`] bundles a finite controlled Markov chain (one row-stochastic
//! matrix per action), a one-step reward table, the observation cost, the
//! discount, switching costs and the truncation horizon. Everything
//! downstream (QVI assembly, solvers, policies) borrows a model immutably.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;


use crate::expm::expm;
use crate::Matrix;

/// Row sums of transition matrices must equal one within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Row sums of generators must vanish within this tolerance.
pub const GENERATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("transition[{action}] row {row}: sums to {sum}")]
    NotStochastic { action: usize, row: usize, sum: f64 },
    #[error("transition[{action}] row {row}: negative entry {value} in column {col}")]
    NegativeEntry {
        action: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("generator[{action}] row {row}: {reason}")]
    NotGenerator {
        action: usize,
        row: usize,
        reason: &'static str,
    },
    #[error("switching_cost[{from}][{to}]: {reason}")]
    SwitchingCost {
        from: usize,
        to: usize,
        reason: &'static str,
    },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("action index {action} out of range (num_actions = {num_actions})")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("matrix exponential failed: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, ModelError>;

/// An observation-cost MDP on `L` states and `d` actions.
///
/// Actions are indexed `0..d`; states `0..L`. The reward matrix is `L × d`
/// with entry `(x, a) = r(x, a)`.
#[derive(Debug, Clone)]
pub struct OcmModel {
    transitions: Vec<Matrix>,
    reward: Matrix,
    c_obs: f64,
    discount: f64,
    switching_cost: Matrix,
    horizon: usize,
    absorbing: Vec<(usize, f64)>,
    timing: RewardTiming,
}

/// When the reward of a step is credited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardTiming {
    /// `r(x_n, a_n)` counts at time `n` (undiscounted within the step).
    #[default]
    StartOfStep,
    /// `r(x_n, a_n)` and switching charges count at the end of the step, one
    /// discount factor later. Equivalent to `StartOfStep` with `γ r` and `γ g`.
    EndOfStep,
}

impl core::str::FromStr for RewardTiming {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "start" => Ok(RewardTiming::StartOfStep),
            "end" => Ok(RewardTiming::EndOfStep),
            other => Err(ModelError::InvalidParameter {
                name: "reward_timing",
                reason: format!("unknown value {other:?}, expected \"start\" or \"end\""),
            }),
        }
    }
}

impl OcmModel {
    /// Builds and validates a model with zero switching costs and no
    /// absorbing states.
    pub fn new(
        transitions: Vec<Matrix>,
        reward: Matrix,
        c_obs: f64,
        discount: f64,
        horizon: usize,
    ) -> Result<Self> {
        let d = transitions.len();
        if d == 0 {
            return Err(ModelError::InvalidParameter {
                name: "transition",
                reason: "at least one action is required".into(),
            });
        }
        let l = transitions[0].nrows();
        if l == 0 {
            return Err(ModelError::InvalidParameter {
                name: "transition",
                reason: "at least one state is required".into(),
            });
        }
        for (a, p) in transitions.iter().enumerate() {
            validate_stochastic(a, p, l)?;
        }
        if reward.nrows() != l {
            return Err(ModelError::Dimension {
                what: "reward rows",
                expected: l,
                got: reward.nrows(),
            });
        }
        if reward.ncols() != d {
            return Err(ModelError::Dimension {
                what: "reward columns",
                expected: d,
                got: reward.ncols(),
            });
        }
        if let Some(bad) = reward.iter().find(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "reward",
                reason: format!("non-finite entry {bad}"),
            });
        }
        let model = OcmModel {
            transitions,
            reward,
            c_obs: 0.0,
            discount: 0.5,
            switching_cost: Matrix::zeros(d, d),
            horizon: 1,
            absorbing: Vec::new(),
            timing: RewardTiming::StartOfStep,
        };
        model
            .with_c_obs(c_obs)?
            .with_discount(discount)?
            .with_horizon(horizon)
    }

    pub fn with_c_obs(mut self, c_obs: f64) -> Result<Self> {
        if !(c_obs >= 0.0) || !c_obs.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "c_obs",
                reason: format!("must be finite and >= 0, got {c_obs}"),
            });
        }
        self.c_obs = c_obs;
        Ok(self)
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "gamma",
                reason: format!("must lie in (0, 1), got {discount}"),
            });
        }
        self.discount = discount;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(ModelError::InvalidParameter {
                name: "horizon",
                reason: "must be >= 1".into(),
            });
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// Switching cost `g[a][a']`, paid when the action changes from `a` to
    /// `a'` after an observation.
    pub fn with_switching_cost(mut self, g: Matrix) -> Result<Self> {
        let d = self.num_actions();
        if g.nrows() != d || g.ncols() != d {
            return Err(ModelError::Dimension {
                what: "switching_cost",
                expected: d,
                got: if g.nrows() != d { g.nrows() } else { g.ncols() },
            });
        }
        for i in 0..d {
            for j in 0..d {
                let v = g[(i, j)];
                if i == j && v != 0.0 {
                    return Err(ModelError::SwitchingCost {
                        from: i,
                        to: j,
                        reason: "diagonal must be zero",
                    });
                }
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(ModelError::SwitchingCost {
                        from: i,
                        to: j,
                        reason: "entries must be finite and nonnegative",
                    });
                }
            }
        }
        self.switching_cost = g;
        Ok(self)
    }

    /// Uniform switching cost `g` between every pair of distinct actions.
    pub fn with_uniform_switching_cost(self, g: f64) -> Result<Self> {
        let d = self.num_actions();
        let m = Matrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { g });
        self.with_switching_cost(m)
    }

    /// Pins the value of `state` to `value` for every elapsed time and action.
    pub fn with_absorbing(mut self, state: usize, value: f64) -> Result<Self> {
        if state >= self.num_states() {
            return Err(ModelError::InvalidParameter {
                name: "absorbing",
                reason: format!("state {state} out of range"),
            });
        }
        if !value.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "absorbing",
                reason: format!("pinned value for state {state} is not finite"),
            });
        }
        self.absorbing.retain(|&(s, _)| s != state);
        self.absorbing.push((state, value));
        self.absorbing.sort_by_key(|&(s, _)| s);
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, a: usize) -> Result<&Matrix> {
        self.transitions.get(a).ok_or(ModelError::InvalidAction {
            action: a,
            num_actions: self.num_actions(),
        })
    }

    pub fn transitions(&self) -> &[Matrix] {
        &self.transitions
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

    pub fn switching_cost(&self) -> &Matrix {
        &self.switching_cost
    }

    pub fn has_switching_cost(&self) -> bool {
        self.switching_cost.iter().any(|&g| g != 0.0)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `(state, pinned value)` pairs, sorted by state.
    pub fn absorbing(&self) -> &[(usize, f64)] {
        &self.absorbing
    }

    pub fn reward_timing(&self) -> RewardTiming {
        self.timing
    }

    pub fn with_reward_timing(mut self, timing: RewardTiming) -> Self {
        self.timing = timing;
        self
    }

    /// Reward and switching matrices with the timing convention applied.
    pub fn effective_reward(&self) -> Matrix {
        match self.timing {
            RewardTiming::StartOfStep => self.reward.clone(),
            RewardTiming::EndOfStep => &self.reward * self.discount,
        }
    }

    pub fn effective_switching_cost(&self) -> Matrix {
        match self.timing {
            RewardTiming::StartOfStep => self.switching_cost.clone(),
            RewardTiming::EndOfStep => &self.switching_cost * self.discount,
        }
    }

    /// Returns a copy with every reward shifted by `shift`.
    pub fn with_reward_shift(&self, shift: f64) -> Self {
        let mut m = self.clone();
        m.reward.iter_mut().for_each(|r| *r += shift);
        m
    }
}

fn validate_stochastic(action: usize, p: &Matrix, l: usize) -> Result<()> {
    if p.nrows() != l || p.ncols() != l {
        return Err(ModelError::Dimension {
            what: "transition matrix size",
            expected: l,
            got: if p.nrows() != l { p.nrows() } else { p.ncols() },
        });
    }
    for row in 0..l {
        let mut sum = 0.0;
        for col in 0..l {
            let v = p[(row, col)];
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ModelError::NegativeEntry {
                    action,
                    row,
                    col,
                    value: v,
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ModelError::NotStochastic { action, row, sum });
        }
    }
    Ok(())
}

/// Checks the generator contract: square, nonnegative off-diagonal entries,
/// rows summing to zero within [`GENERATOR_TOL`].
pub fn validate_generator(action: usize, q: &Matrix) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(ModelError::Dimension {
            what: "generator columns",
            expected: q.nrows(),
            got: q.ncols(),
        });
    }
    for row in 0..q.nrows() {
        let mut sum = 0.0;
        for col in 0..q.ncols() {
            let v = q[(row, col)];
            if !v.is_finite() {
                return Err(ModelError::NotGenerator {
                    action,
                    row,
                    reason: "non-finite rate",
                });
            }
            if row != col && v < 0.0 {
                return Err(ModelError::NotGenerator {
                    action,
                    row,
                    reason: "negative off-diagonal rate",
                });
            }
            sum += v;
        }
        if sum.abs() > GENERATOR_TOL {
            return Err(ModelError::NotGenerator {
                action,
                row,
                reason: "row does not sum to zero",
            });
        }
    }
    Ok(())
}

/// Continuous-time counterpart of [`OcmModel`]: one generator per action,
/// measured in rate units per model step.
#[derive(Debug, Clone)]
pub struct RateModel {
    pub generators: Vec<Matrix>,
    pub reward: Matrix,
    pub discount: f64,
    pub c_obs: f64,
    /// Absorbing states and their per-step reward `l`; the pinned value is
    /// `l / (1 - discount)`.
    pub absorbing: Vec<(usize, f64)>,
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        for (a, q) in self.generators.iter().enumerate() {
            validate_generator(a, q)?;
        }
        Ok(())
    }

    /// Discretizes with `P_a = exp(Q_a)` and pins absorbing states at
    /// `l / (1 - γ)`.
    pub fn to_ocm(&self, horizon: usize) -> Result<OcmModel> {
        self.validate()?;
        let transitions = self
            .generators
            .iter()
            .map(|q| expm(q).map_err(|e| ModelError::Numeric(format!("{e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut model = OcmModel::new(
            transitions,
            self.reward.clone(),
            self.c_obs,
            self.discount,
            horizon,
        )?;
        for &(s, l) in &self.absorbing {
            model = model.with_absorbing(s, l / (1.0 - self.discount))?;
        }
        Ok(model)
    }
}

/// Parametrised open-loop action sequences `f_θ : {1, 2, ...} → A`.
///
/// Each sequence is stored explicitly; `sequences[θ][k - 1] = f_θ(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopActionSet {
    sequences: Vec<Vec<usize>>,
}

impl OpenLoopActionSet {
    pub fn new(sequences: Vec<Vec<usize>>, num_actions: usize) -> Result<Self> {
        if sequences.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "open_loop",
                reason: "parameter set is empty".into(),
            });
        }
        let len = sequences[0].len();
        for seq in &sequences {
            if seq.len() != len || len == 0 {
                return Err(ModelError::InvalidParameter {
                    name: "open_loop",
                    reason: "all sequences must share the same nonzero length".into(),
                });
            }
            if let Some(&a) = seq.iter().find(|&&a| a >= num_actions) {
                return Err(ModelError::InvalidAction {
                    action: a,
                    num_actions,
                });
            }
        }
        Ok(OpenLoopActionSet { sequences })
    }

    /// One constant sequence per base action, i.e. the plain OCM.
    pub fn constant(num_actions: usize, len: usize) -> Self {
        OpenLoopActionSet {
            sequences: (0..num_actions).map(|a| vec![a; len]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Number of steps each sequence covers.
    pub fn steps(&self) -> usize {
        self.sequences[0].len()
    }

    /// `f_θ(k)` for 1-based step `k`.
    pub fn action(&self, theta: usize, k: usize) -> usize {
        self.sequences[theta][k - 1]
    }
}

/// Reward shapes for the drifting random walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    /// `r(x) = 1 / (|x| + 1)`.
    Inverse,
    /// `r(0) = 2`, `r(±2) = -1`, zero elsewhere.
    Peak,
}

impl RewardKind {
    pub fn value(self, x: i64) -> f64 {
        match self {
            RewardKind::Inverse => 1.0 / (x.unsigned_abs() as f64 + 1.0),
            RewardKind::Peak => match x {
                0 => 2.0,
                2 | -2 => -1.0,
                _ => 0.0,
            },
        }
    }
}

impl core::str::FromStr for RewardKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(RewardKind::Inverse),
            "peak" => Ok(RewardKind::Peak),
            other => Err(ModelError::InvalidParameter {
                name: "reward_kind",
                reason: format!("unknown reward kind {other:?}"),
            }),
        }
    }
}

/// Action index of the upward drift (`+1`) in random-walk models.
pub const DRIFT_UP: usize = 0;
/// Action index of the downward drift (`-1`) in random-walk models.
pub const DRIFT_DOWN: usize = 1;

/// Signed drift `±1` of a random-walk action index.
pub fn drift_sign(a: usize) -> i64 {
    if a == DRIFT_UP {
        1
    } else {
        -1
    }
}

/// Random walk on `{-L, ..., L}` whose drift is the action.
///
/// State index `i` corresponds to position `i - L`. Action [`DRIFT_UP`]
/// steps up with probability `θ`, [`DRIFT_DOWN`] steps down with probability
/// `θ`. The end points reflect: the blocked move becomes a hold.
///
/// `c_obs`, discount and horizon are placeholders (0, 0.99, 1) to be set with
/// the `with_*` builders.
pub fn build_random_walk(theta: f64, half_width: usize, reward: RewardKind) -> Result<OcmModel> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(ModelError::InvalidParameter {
            name: "theta",
            reason: format!("must lie in (0, 1), got {theta}"),
        });
    }
    if half_width == 0 {
        return Err(ModelError::InvalidParameter {
            name: "half_width",
            reason: "must be >= 1".into(),
        });
    }
    let l = 2 * half_width + 1;
    let mut up = Matrix::zeros(l, l);
    let mut down = Matrix::zeros(l, l);
    for i in 0..l {
        // (probability of moving up, probability of moving down)
        for (p, (pu, pd)) in [(&mut up, (theta, 1.0 - theta)), (&mut down, (1.0 - theta, theta))] {
            if i + 1 < l {
                p[(i, i + 1)] += pu;
            } else {
                p[(i, i)] += pu;
            }
            if i > 0 {
                p[(i, i - 1)] += pd;
            } else {
                p[(i, i)] += pd;
            }
        }
    }
    let r = Matrix::from_fn(l, 2, |i, _| reward.value(i as i64 - half_width as i64));
    OcmModel::new(vec![up, down], r, 0.0, 0.99, 1)
}

/// Two-state chain: under action `a`, state `a` persists with probability
/// `p` and the other state is absorbing; reward 1 iff `x = a`.
pub fn build_two_state_toy(p: f64) -> Result<OcmModel> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ModelError::InvalidParameter {
            name: "p",
            reason: format!("must lie in (0, 1), got {p}"),
        });
    }
    let mk = |a: f64| {
        Matrix::from_row_slice(
            2,
            2,
            &[
                a + p * (1.0 - a),
                (1.0 - p) * (1.0 - a),
                (1.0 - p) * a,
                p * a + (1.0 - a),
            ],
        )
    };
    let reward = Matrix::from_fn(2, 2, |x, a| if x == a { 1.0 } else { 0.0 });
    OcmModel::new(vec![mk(0.0), mk(1.0)], reward, 0.0, 0.9, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_walk_reflecting_rows() {
        let m = build_random_walk(0.75, 1, RewardKind::Inverse).unwrap();
        let up = m.transition(DRIFT_UP).unwrap();
        // state +1 has index 2
        assert_eq!(up[(2, 0)], 0.0);
        assert_eq!(up[(2, 1)], 0.25);
        assert_eq!(up[(2, 2)], 0.75);
        let down = m.transition(DRIFT_DOWN).unwrap();
        assert_eq!(down[(0, 0)], 0.75);
        assert_eq!(down[(0, 1)], 0.25);
    }

    #[test]
    fn random_walk_symmetric_at_half() {
        let m = build_random_walk(0.5, 4, RewardKind::Peak).unwrap();
        assert_eq!(m.transition(0).unwrap(), m.transition(1).unwrap());
    }

    #[test]
    fn inverse_and_peak_rewards() {
        let m = build_random_walk(0.75, 3, RewardKind::Inverse).unwrap();
        assert_eq!(m.reward()[(3, 0)], 1.0);
        assert_eq!(m.reward()[(0, 1)], 0.25);
        assert_eq!(m.reward()[(6, 0)], 0.25);
        assert_eq!(RewardKind::Peak.value(0), 2.0);
        assert_eq!(RewardKind::Peak.value(-2), -1.0);
        assert_eq!(RewardKind::Peak.value(1), 0.0);
        assert_eq!(RewardKind::Peak.value(3), 0.0);
    }

    #[test]
    fn random_walk_rejects_degenerate_theta() {
        assert!(build_random_walk(0.0, 3, RewardKind::Inverse).is_err());
        assert!(build_random_walk(1.0, 3, RewardKind::Inverse).is_err());
    }

    #[test]
    fn toy_rows_and_rewards() {
        let m = build_two_state_toy(0.9).unwrap();
        let p0 = m.transition(0).unwrap();
        assert_eq!(p0[(0, 0)], 0.9);
        assert!((p0[(0, 1)] - 0.1).abs() < 1e-15);
        assert_eq!(p0[(1, 1)], 1.0);
        let r = m.reward();
        assert_eq!(r[(0, 0)], 1.0);
        assert_eq!(r[(0, 1)], 0.0);
        assert_eq!(r[(1, 1)], 1.0);
        assert_eq!(r[(1, 0)], 0.0);
        for p in [0.1, 0.37, 0.999] {
            let m = build_two_state_toy(p).unwrap();
            for a in 0..2 {
                let t = m.transition(a).unwrap();
                for x in 0..2 {
                    assert!((t[(x, 0)] + t[(x, 1)] - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        let bad = Matrix::from_row_slice(2, 2, &[0.5, 0.4, 0.0, 1.0]);
        let r = Matrix::zeros(2, 1);
        match OcmModel::new(vec![bad], r.clone(), 0.0, 0.9, 1) {
            Err(ModelError::NotStochastic { action: 0, row: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let neg = Matrix::from_row_slice(2, 2, &[1.5, -0.5, 0.0, 1.0]);
        assert!(matches!(
            OcmModel::new(vec![neg], r.clone(), 0.0, 0.9, 1),
            Err(ModelError::NegativeEntry { .. })
        ));
        let ok = Matrix::identity(2, 2);
        assert!(OcmModel::new(vec![ok.clone()], r.clone(), -1.0, 0.9, 1).is_err());
        assert!(OcmModel::new(vec![ok.clone()], r.clone(), 0.0, 1.0, 1).is_err());
        assert!(OcmModel::new(vec![ok.clone()], r.clone(), 0.0, 0.9, 0).is_err());
        let m = OcmModel::new(vec![ok.clone(), ok], Matrix::zeros(2, 2), 0.0, 0.9, 1).unwrap();
        let g = Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        assert!(matches!(
            m.clone().with_switching_cost(g),
            Err(ModelError::SwitchingCost { from: 0, to: 0, .. })
        ));
        assert!(m.with_uniform_switching_cost(-1.0).is_err());
    }

    #[test]
    fn generator_validation() {
        let q = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!(validate_generator(0, &q).is_ok());
        let q = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0]);
        assert!(validate_generator(0, &q).is_err());
        let q = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 1.0, -1.0]);
        assert!(validate_generator(0, &q).is_err());
    }

    #[test]
    fn open_loop_set_validation() {
        assert!(OpenLoopActionSet::new(vec![vec![0, 1], vec![1, 2]], 2).is_err());
        assert!(OpenLoopActionSet::new(vec![vec![0, 1], vec![1]], 2).is_err());
        let s = OpenLoopActionSet::new(vec![vec![0, 1, 1]], 2).unwrap();
        assert_eq!(s.action(0, 2), 1);
        assert_eq!(OpenLoopActionSet::constant(3, 4).action(2, 4), 2);
    }
}
