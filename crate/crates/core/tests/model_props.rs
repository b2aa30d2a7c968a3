mod common;

use common::{generator, rng, stochastic};
use ocm_core::expm::expm;
use ocm_core::model::{build_random_walk, OcmModel, RewardKind, DRIFT_DOWN, DRIFT_UP};
use ocm_core::powers::{n_step_matrix, TransitionPowers};
use ocm_core::Matrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chapman_kolmogorov(seed in any::<u64>(), l in 1usize..=8, m in 0usize..=20, n in 0usize..=20) {
        let mut r = rng(seed);
        let p = stochastic(&mut r, l);
        let mut cache = TransitionPowers::from_matrices(vec![p]);
        let lhs = cache.get(0, m + n).unwrap();
        let rhs = cache.get(0, m).unwrap() * cache.get(0, n).unwrap();
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn powers_stay_stochastic(seed in any::<u64>(), l in 1usize..=8, n in 1usize..=40) {
        let mut r = rng(seed);
        let p = stochastic(&mut r, l);
        let model = OcmModel::new(vec![p], Matrix::zeros(l, 1), 0.0, 0.9, 1).unwrap();
        let pn = n_step_matrix(&model, 0, n).unwrap();
        for i in 0..l {
            let s: f64 = pn.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= n as f64 * 1e-12);
            prop_assert!(pn.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn expm_semigroup(seed in any::<u64>(), l in 1usize..=10, scale in 0.01f64..3.0) {
        let mut r = rng(seed);
        let q = generator(&mut r, l, scale);
        let e = expm(&q).unwrap();
        let e2 = expm(&(&q * 2.0)).unwrap();
        prop_assert!((&e * &e - e2).amax() < 1e-8);
    }

    #[test]
    fn random_walk_parity(theta in 0.01f64..0.99, n in 1usize..=8) {
        let half = 10;
        let model = build_random_walk(theta, half, RewardKind::Inverse).unwrap();
        for a in [DRIFT_UP, DRIFT_DOWN] {
            let p = n_step_matrix(&model, a, n).unwrap();
            for i in 0..=2 * half {
                let x = i as i64 - half as i64;
                if x.unsigned_abs() as usize > half - n {
                    continue;
                }
                for j in 0..=2 * half {
                    if (j as i64 - i as i64 - n as i64).rem_euclid(2) == 1 {
                        prop_assert_eq!(p[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn expm_two_state_closed_form_to_1e10() {
    let q = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
    let e = expm(&q).unwrap();
    let t = (-2.0f64).exp();
    let want = Matrix::from_row_slice(2, 2, &[(1.0 + t) / 2.0, (1.0 - t) / 2.0, (1.0 - t) / 2.0, (1.0 + t) / 2.0]);
    assert!((e - want).amax() < 1e-10);
}

#[test]
fn ctmc_pipeline_yields_stochastic_kernels() {
    let mut r = rng(16);
    let q = generator(&mut r, 16, 0.8);
    let p = expm(&q).unwrap();
    for i in 0..16 {
        let s: f64 = p.row(i).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
