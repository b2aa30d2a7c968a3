mod common;

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use ocm_core::bayes::{
    bayes_update_finite, beta_binomial_pmf, grid_kernel, predictive_finite, predictive_nstep, solve_bayes_finite,
    solve_grid_value_iteration, BayesOcmModel, BetaParams, FiniteThetaBelief, ThetaFamily,
};
use ocm_core::model::{build_random_walk, RewardKind, DRIFT_DOWN, DRIFT_UP};
use ocm_core::qvi::{finite_horizon_system, QviSystem};
use ocm_core::sim::KnownThetaController;
use ocm_core::solver::{solve_finite_horizon, value_iteration_oracle};
use rand::Rng;
use rand_distr::{Beta, Distribution};

fn walk_family(thetas: &[f64], half: usize, horizon: usize, gamma: f64, c: f64) -> ThetaFamily {
    ThetaFamily::from_builder(thetas.to_vec(), |t| {
        build_random_walk(t, half, RewardKind::Inverse)?
            .with_horizon(horizon)?
            .with_discount(gamma)?
            .with_c_obs(c)
    })
    .unwrap()
}

/// Exact mass for `α = an/ad`, `β = bn/bd` from integer products, reduced
/// once at the end.
fn exact_pmf(k: usize, n: usize, (an, ad): (i64, i64), (bn, bd): (i64, i64)) -> f64 {
    // α + i = (an + i ad) / ad, α + β + i = (an bd + bn ad + i ad bd) / (ad bd)
    let one = BigInt::from(1);
    let (mut num, mut den) = (one.clone(), one);
    for i in 0..k {
        num *= BigInt::from(n - i) * BigInt::from(an + i as i64 * ad);
        den *= BigInt::from(i + 1) * BigInt::from(ad);
    }
    for i in 0..n - k {
        num *= BigInt::from(bn + i as i64 * bd);
        den *= BigInt::from(bd);
    }
    for i in 0..n {
        num *= BigInt::from(ad * bd);
        den *= BigInt::from(an * bd + bn * ad + i as i64 * ad * bd);
    }
    BigRational::new_raw(num, den).to_f64().unwrap()
}

#[test]
fn pmf_matches_exact_rationals() {
    for &(an, ad, bn, bd) in &[(1, 1, 1, 1), (5, 1, 2, 1), (2, 1, 5, 1), (1, 2, 7, 2), (13, 4, 3, 8)] {
        let (af, bf) = (an as f64 / ad as f64, bn as f64 / bd as f64);
        for n in [1usize, 7, 50, 200] {
            for k in (0..=n).step_by((n / 13).max(1)) {
                let want = exact_pmf(k, n, (an, ad), (bn, bd));
                let got = beta_binomial_pmf(k, n, af, bf).unwrap();
                assert!((got - want).abs() <= 1e-13 * want, "α={af} β={bf} n={n} k={k}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn pmf_relative_accuracy_large_n() {
    let n = 10_000;
    for k in [0, 1, 1234, 2800, 5000, 9999, 10_000] {
        let want = exact_pmf(k, n, (5, 2), (4, 1));
        if want < 1e-300 {
            continue;
        }
        let got = beta_binomial_pmf(k, n, 2.5, 4.0).unwrap();
        assert!((got - want).abs() <= 1e-13 * want, "k={k}: {got} vs {want}");
    }
}

#[test]
fn predictive_matches_monte_carlo_mixture() {
    let mut rng = common::rng(17);
    let (alpha, beta, n) = (2.0, 5.0, 6usize);
    let dist = Beta::new(alpha, beta).unwrap();
    let prior = BetaParams::new(alpha, beta).unwrap();
    let samples = 100_000;
    // Binomial(n, θ) masses averaged over θ ~ Beta
    let mut sum = vec![0.0; n + 1];
    let mut sq = vec![0.0; n + 1];
    for _ in 0..samples {
        let theta: f64 = dist.sample(&mut rng);
        let mut binom = 1.0;
        for k in 0..=n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            let p = binom * theta.powi(k as i32) * (1.0 - theta).powi((n - k) as i32);
            sum[k] += p;
            sq[k] += p * p;
        }
    }
    let pred = predictive_nstep(0, DRIFT_UP, n, prior).unwrap();
    for k in 0..=n {
        let mean = sum[k] / samples as f64;
        let var = (sq[k] / samples as f64 - mean * mean) * samples as f64 / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        let (x, g) = pred[k];
        assert_eq!(x, 2 * k as i64 - n as i64);
        assert!((g - mean).abs() <= 3.0 * se, "k={k}: {g} vs {mean} ± {se}");
    }
}

#[test]
fn finite_filter_factorizes() {
    let thetas = [0.2, 0.45, 0.6, 0.85];
    let fam = walk_family(&thetas, 4, 8, 0.9, 0.1);
    let mut rng = common::rng(3);
    for _ in 0..200 {
        let mut w: Vec<f64> = (0..thetas.len()).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let belief = FiniteThetaBelief::new(w, thetas.to_vec()).unwrap();
        let a = rng.random_range(0..2);
        let (m1, m2) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let x = rng.random_range(0..9);
        // draw reachable observations under the first member
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, from: usize, m: usize| loop {
            let y = rng.random_range(0..9);
            if fam.likelihood(0, a, m, from, y).unwrap() > 0.0 {
                return y;
            }
        };
        let y = draw(&mut rng, x, m1);
        let z = draw(&mut rng, y, m2);
        let two_step = bayes_update_finite(
            &bayes_update_finite(&belief, &fam, m1, x, a, y).unwrap(),
            &fam,
            m2,
            y,
            a,
            z,
        )
        .unwrap();
        let joint: Vec<f64> = (0..thetas.len())
            .map(|i| {
                belief.weights[i] * fam.likelihood(i, a, m1, x, y).unwrap() * fam.likelihood(i, a, m2, y, z).unwrap()
            })
            .collect();
        let total: f64 = joint.iter().sum();
        for (got, want) in two_step.weights.iter().zip(&joint) {
            assert!((got - want / total).abs() < 1e-12);
        }
    }
}

#[test]
fn finite_filter_examples() {
    let fam = walk_family(&[0.4], 3, 4, 0.9, 0.1);
    let single = FiniteThetaBelief::uniform(vec![0.4]);
    let post = bayes_update_finite(&single, &fam, 2, 3, DRIFT_DOWN, 1).unwrap();
    assert_eq!(post, single);

    // equal likelihoods: θ and 1-θ agree on two-step returns to the start
    let fam = walk_family(&[0.3, 0.7], 3, 4, 0.9, 0.1);
    let b = FiniteThetaBelief::new(vec![0.25, 0.75], vec![0.3, 0.7]).unwrap();
    let post = bayes_update_finite(&b, &fam, 2, 3, DRIFT_UP, 3).unwrap();
    assert!((post.weights[0] - 0.25).abs() < 1e-15);
}

#[test]
fn predictive_is_exact_mixture() {
    let thetas = [0.1, 0.5, 0.75];
    let fam = walk_family(&thetas, 5, 6, 0.9, 0.0);
    let b = FiniteThetaBelief::new(vec![0.2, 0.5, 0.3], thetas.to_vec()).unwrap();
    for m in 1..=6 {
        for x in 0..11 {
            for a in [DRIFT_UP, DRIFT_DOWN] {
                let got = predictive_finite(&b, &fam, m, x, a).unwrap();
                for (y, g) in got.iter().enumerate() {
                    let want: f64 = (0..3).map(|i| b.weights[i] * fam.kernel(i, a, m).unwrap()[(x, y)]).sum();
                    assert!((g - want).abs() < 1e-12);
                }
                assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

fn known_theta_values(theta: f64, reward: RewardKind, c: f64, horizon: usize) -> (Vec<f64>, ocm_core::qvi::FiniteHorizonSystem) {
    let model = build_random_walk(theta, horizon + 1, reward).unwrap().with_c_obs(c).unwrap();
    let sys = finite_horizon_system(&model, horizon).unwrap();
    (solve_finite_horizon(&sys), sys)
}

#[test]
fn point_mass_prior_reproduces_known_parameter() {
    for &theta in &[0.3, 0.7] {
        for &c in &[0.0, 0.15, 0.6] {
            for reward in [RewardKind::Peak, RewardKind::Inverse] {
                let n = 8;
                let prior = BetaParams::new(1e6 * theta, 1e6 * (1.0 - theta)).unwrap();
                let pol = solve_bayes_finite(&BayesOcmModel::new(prior, reward, c, n).unwrap()).unwrap();
                let known = KnownThetaController::solve(theta, reward, c, n).unwrap();
                assert!(
                    (pol.start_value() - known.value()).abs() < 1e-3,
                    "θ={theta} c={c}: {} vs {}",
                    pol.start_value(),
                    known.value()
                );
                let (values, sys) = known_theta_values(theta, reward, c, n);
                let half = n as i64 + 1;
                for e in pol.entries() {
                    let want = values[sys.index(e.n, e.k, (e.x + half) as usize, e.a)];
                    assert!((e.value - want).abs() < 1e-3, "{e:?} vs {want}");
                }
            }
        }
    }
}

/// Value of the walk when every position is observed for free.
struct FullyObserved {
    prior: BetaParams,
    reward: RewardKind,
    horizon: usize,
    memo: HashMap<(usize, i64, usize), f64>,
}

impl FullyObserved {
    fn value(&mut self, n: usize, x: i64, u: usize) -> f64 {
        let r = self.reward.value(x);
        if n == self.horizon {
            return r;
        }
        if let Some(&v) = self.memo.get(&(n, x, u)) {
            return v;
        }
        let v = r + self.expected(n, x, u);
        self.memo.insert((n, x, u), v);
        v
    }

    /// `max_a E[V(n + 1, ·)]` after observing `x` at `n`.
    fn expected(&mut self, n: usize, x: i64, u: usize) -> f64 {
        let p = (self.prior.alpha + u as f64) / (self.prior.alpha + self.prior.beta + n as f64);
        let mut best = f64::NEG_INFINITY;
        for sign in [1i64, -1] {
            let v = p * self.value(n + 1, x + sign, u + 1) + (1.0 - p) * self.value(n + 1, x - sign, u);
            best = best.max(v);
        }
        best
    }
}

#[test]
fn free_observation_matches_fully_observed_dp() {
    for &(a, b) in &[(2.0, 5.0), (5.0, 2.0), (1.0, 1.0), (0.5, 3.0)] {
        for reward in [RewardKind::Peak, RewardKind::Inverse] {
            for n in 1..=6 {
                let prior = BetaParams::new(a, b).unwrap();
                let pol = solve_bayes_finite(&BayesOcmModel::new(prior, reward, 0.0, n).unwrap()).unwrap();
                let mut oracle = FullyObserved {
                    prior,
                    reward,
                    horizon: n,
                    memo: HashMap::new(),
                };
                let want = oracle.value(0, 0, 0);
                assert!((pol.start_value() - want).abs() < 1e-8, "({a},{b}) N={n}");
                // one step after an observation, the value is the one-step expectation
                for e in pol.entries().filter(|e| e.k + 1 == e.n && e.n < n) {
                    let p = (a + e.u as f64) / (a + b + e.k as f64);
                    let sign = if e.a == DRIFT_UP { 1 } else { -1 };
                    let v = p * oracle.value(e.n, e.x + sign, e.u + 1) + (1.0 - p) * oracle.value(e.n, e.x - sign, e.u);
                    assert!((e.value - v).abs() < 1e-8, "{e:?} vs {v}");
                }
            }
        }
    }
}

#[test]
fn value_nonincreasing_in_cost() {
    let prior = BetaParams::new(2.0, 5.0).unwrap();
    for reward in [RewardKind::Peak, RewardKind::Inverse] {
        let sols: Vec<_> = [0.0, 0.05, 0.25, 0.75, 3.0]
            .iter()
            .map(|&c| solve_bayes_finite(&BayesOcmModel::new(prior, reward, c, 12).unwrap()).unwrap())
            .collect();
        for pair in sols.windows(2) {
            assert!(pair[1].start_value() <= pair[0].start_value() + 1e-12);
            for (lo, hi) in pair[1].entries().zip(pair[0].entries()) {
                assert!(lo.value <= hi.value + 1e-12, "{lo:?} vs {hi:?}");
            }
        }
    }
}

#[test]
fn lattice_offsets_are_consistent() {
    let prior = BetaParams::new(2.0, 5.0).unwrap();
    let pol = solve_bayes_finite(&BayesOcmModel::new(prior, RewardKind::Peak, 0.2, 9).unwrap()).unwrap();
    for e in pol.entries() {
        assert_eq!(e.u + e.w, e.k);
        assert!(e.k < e.n);
        assert_eq!((e.x + e.k as i64).rem_euclid(2), 0);
        assert!(e.x.unsigned_abs() as usize <= e.k);
        assert_eq!(pol.value(e.n, e.k, e.x, e.a, e.u), Some(e.value));
    }
    // inspection never chosen at the horizon
    assert!(pol.entries().filter(|e| e.n == 9).all(|e| !e.inspect));
}

#[test]
fn single_parameter_grid_matches_qvi() {
    for &c in &[0.0, 0.1, 0.4] {
        let gamma = 0.8;
        let fam = walk_family(&[0.35], 3, 12, gamma, c);
        let kern = grid_kernel(&fam, 2).unwrap();
        assert_eq!(kern.grid().len(), 1);
        let sol = solve_grid_value_iteration(&fam, &kern, 1e-11);
        let model = build_random_walk(0.35, 3, RewardKind::Inverse)
            .unwrap()
            .with_horizon(12)
            .unwrap()
            .with_discount(gamma)
            .unwrap()
            .with_c_obs(c)
            .unwrap();
        let sys = QviSystem::new(&model);
        let want = value_iteration_oracle(&sys, 1e-11);
        for n in 1..=12 {
            for x in 0..7 {
                for a in 0..2 {
                    let got = sol.values[kern.index(n, x, a, 0)];
                    let w = want[sys.index(n, x, a)];
                    assert!((got - w).abs() < 1e-9, "c={c} n={n} x={x} a={a}: {got} vs {w}");
                }
            }
        }
    }
}

#[test]
fn grid_refinement_contracts() {
    let thetas = [0.3, 0.7];
    let fam = walk_family(&thetas, 3, 8, 0.85, 0.05);
    let mut values = Vec::new();
    for g in [2, 4, 8, 16, 32] {
        let kern = grid_kernel(&fam, g).unwrap();
        let sol = solve_grid_value_iteration(&fam, &kern, 1e-10);
        // interior belief (1/2, 1/2) is a node of every even grid
        let node = kern.grid().nearest(&[0.5, 0.5]);
        assert_eq!(kern.grid().node(node), &[0.5, 0.5]);
        values.push(sol.values[kern.index(1, 3, DRIFT_UP, node)]);
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.last().unwrap() < &diffs[0], "{values:?}");
    assert!(diffs[diffs.len() - 1] <= diffs[diffs.len() - 2] + 1e-12, "{values:?}");
}
