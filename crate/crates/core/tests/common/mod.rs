#![allow(dead_code)]

use ocm_core::model::OcmModel;
use ocm_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-stochastic matrix with roughly a third of the entries zeroed.
pub fn stochastic(rng: &mut ChaCha8Rng, l: usize) -> Matrix {
    let mut m = Matrix::zeros(l, l);
    for i in 0..l {
        let mut s = 0.0;
        for j in 0..l {
            let w: f64 = if rng.random::<f64>() < 0.33 && j != i { 0.0 } else { rng.random() };
            m[(i, j)] = w;
            s += w;
        }
        if s == 0.0 {
            m[(i, i)] = 1.0;
            s = 1.0;
        }
        for j in 0..l {
            m[(i, j)] /= s;
        }
    }
    m
}

pub fn generator(rng: &mut ChaCha8Rng, l: usize, scale: f64) -> Matrix {
    let mut q = Matrix::zeros(l, l);
    for i in 0..l {
        let mut s = 0.0;
        for j in 0..l {
            if i != j {
                let v = scale * rng.random::<f64>();
                q[(i, j)] = v;
                s += v;
            }
        }
        q[(i, i)] = -s;
    }
    q
}

/// Random model with `L <= max_l`, `d <= max_d`, rewards in `[0, 1)`.
pub fn random_model(seed: u64, max_l: usize, max_d: usize, max_gamma: f64, max_n: usize) -> OcmModel {
    let mut r = rng(seed);
    let l = r.random_range(1..=max_l);
    let d = r.random_range(1..=max_d);
    let gamma = r.random_range(0.3..max_gamma);
    let n = r.random_range(2..=max_n);
    let c = [0.0, 0.05, 0.2, 0.5][r.random_range(0..4)];
    let ps = (0..d).map(|_| stochastic(&mut r, l)).collect();
    let rew = Matrix::from_fn(l, d, |_, _| r.random::<f64>());
    OcmModel::new(ps, rew, c, gamma, n).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Finite-horizon value by expectimax over the law of the hidden state,
/// advanced one transition at a time. `value(n, belief, a)` is the best
/// expected reward collected at times `n..=K` when the state at time `n` has
/// law `belief` and `a` has been applied since the last observation.
pub struct BeliefOracle<'a> {
    pub model: &'a OcmModel,
    pub horizon: usize,
}

impl BeliefOracle<'_> {
    fn step(&self, belief: &[f64], a: usize) -> Vec<f64> {
        let p = &self.model.transitions()[a];
        let l = belief.len();
        (0..l).map(|y| (0..l).map(|x| belief[x] * p[(x, y)]).sum()).collect()
    }

    fn mean_reward(&self, belief: &[f64], a: usize) -> f64 {
        belief.iter().enumerate().map(|(x, b)| b * self.model.reward()[(x, a)]).sum()
    }

    pub fn value(&self, n: usize, belief: &[f64], a: usize) -> f64 {
        if n == self.horizon {
            return self.mean_reward(belief, a);
        }
        let cont = self.mean_reward(belief, a) + self.value(n + 1, &self.step(belief, a), a);
        let mut obs = -self.model.c_obs();
        for (y, &q) in belief.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            obs += q * self.after_observing(n, y, a);
        }
        cont.max(obs)
    }

    /// `max_b (r(y, b) - g(a, b) + value(n + 1, δ_y P_b, b))`.
    pub fn after_observing(&self, n: usize, y: usize, a: usize) -> f64 {
        let l = self.model.num_states();
        let mut delta = vec![0.0; l];
        delta[y] = 1.0;
        (0..self.model.num_actions())
            .map(|b| {
                self.model.reward()[(y, b)] - self.model.switching_cost()[(a, b)]
                    + self.value(n + 1, &self.step(&delta, b), b)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `v(n, k, x, a)`: the law at time `n` is `δ_x P_a^{n-k}`.
    pub fn entry(&self, n: usize, k: usize, x: usize, a: usize) -> f64 {
        let mut b = vec![0.0; self.model.num_states()];
        b[x] = 1.0;
        for _ in 0..n - k {
            b = self.step(&b, a);
        }
        self.value(n, &b, a)
    }

    /// Start value after the free observation of `x` at time 0.
    pub fn start(&self, x: usize) -> f64 {
        let l = self.model.num_states();
        let mut delta = vec![0.0; l];
        delta[x] = 1.0;
        (0..self.model.num_actions())
            .map(|b| self.model.reward()[(x, b)] + self.value(1, &self.step(&delta, b), b))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
