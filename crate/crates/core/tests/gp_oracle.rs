mod common;

use perimit::gp::{ucb, AcquisitionConfig, GpModel, Hyperparams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=20);
    let dim = rng.random_range(1..=6);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| v.iter().map(|a| a.sin()).sum::<f64>() + rng.random_range(-0.05..0.05))
        .collect();
    let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    (x, y, q)
}

#[test]
fn prior_mean_is_target_mean() {
    let (x, y, _) = instance(3);
    let m = GpModel::fit(&x, &y, true).unwrap();
    assert!((m.prior_mean() - y.iter().sum::<f64>() / y.len() as f64).abs() < 1e-15);
}

#[test]
fn hundred_random_instances_match_dense_solve() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (x, y, q) = instance(seed);
        let model = GpModel::fit(&x, &y, seed % 2 == 0).unwrap();
        let queries = vec![x[0].clone(), x[x.len() - 1].clone(), q];
        for (w, (om, os)) in queries.iter().zip(common::dense_posterior(&model, &x, &y, &queries)) {
            let (m, s) = model.posterior(w).unwrap();
            worst = worst.max((m - om).abs()).max((s - os).abs());
        }
    }
    assert!(worst < 1e-8, "worst deviation {worst:e}");
}

#[test]
fn ucb_is_mean_plus_beta_std() {
    let (x, y, q) = instance(7);
    let model = GpModel::fit(&x, &y, true).unwrap();
    let cfg = AcquisitionConfig::default();
    assert_eq!(cfg.beta, 0.1);
    let (m, s) = model.posterior(&q).unwrap();
    assert_eq!(ucb(&model, &q, &cfg).unwrap(), m + 0.1 * s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fixed_hyperparams_match_dense_solve(seed in 0u64..10_000, ls in 0.3f64..3.0, sv in 0.1f64..2.0) {
        let (x, y, q) = instance(seed);
        let mut h = Hyperparams::initial(x[0].len(), sv);
        h.length_scales.iter_mut().for_each(|l| *l = ls);
        h.signal_variance = sv;
        let model = GpModel::fit_with(&x, &y, h).unwrap();
        let (m, s) = model.posterior(&q).unwrap();
        let (om, os) = common::dense_posterior(&model, &x, &y, std::slice::from_ref(&q))[0];
        prop_assert!((m - om).abs() < 1e-8 && (s - os).abs() < 1e-8, "{m} vs {om}, {s} vs {os}");
    }

    #[test]
    fn std_is_nonnegative_and_bounded_by_prior(seed in 0u64..10_000) {
        let (x, y, q) = instance(seed);
        let model = GpModel::fit(&x, &y, false).unwrap();
        let (_, s) = model.posterior(&q).unwrap();
        prop_assert!(s >= 0.0 && s <= model.hyperparams().signal_variance.sqrt() + 1e-12);
    }
}
