use proptest::prelude::*;
use rayon::prelude::*;

use tsdiffusion::analysis::ks_statistic;
use tsdiffusion::discrete::{
    ode_reward_path, rescaled_regret, simulate_batched, simulate_ode_view, simulate_sde_view,
    simulate_variance_adaptive, PathBundle,
};
use tsdiffusion::limit::solve_sde;
use tsdiffusion::rng::derive_seed;
use tsdiffusion::{BanditSpec, HorizonSpec, VarianceMode};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn assert_bundle_invariants(b: &PathBundle) {
    let n = b.n as f64;
    for j in 0..=b.n {
        let total: f64 = (0..b.arms).map(|k| b.occupation[k][j]).sum();
        assert!((total - j as f64 / n).abs() < 1e-12);
        for k in 0..b.arms {
            if j > 0 {
                let inc = b.occupation[k][j] - b.occupation[k][j - 1];
                assert!(inc == 0.0 || (inc - 1.0 / n).abs() < 1e-12);
            }
            let gap = b.occupation[k][j] - b.martingale[k][j] - b.compensator[k][j];
            assert!(gap.abs() < 1e-12);
        }
    }
}

#[test]
fn identical_arms_split_evenly() {
    let spec = BanditSpec::mab(vec![0.0, 0.0], 1.0);
    let h = HorizonSpec::new(10_000);
    let r: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            simulate_sde_view(&spec, &h, derive_seed(1, &[i]))
                .unwrap()
                .terminal_occupation(1)
        })
        .collect();
    let (m, _) = mean_se(&r);
    assert!((m - 0.5).abs() < 0.01, "mean {m}");
}

#[test]
fn reward_streams_are_centered_with_variance_t() {
    let spec = BanditSpec::two_arm(1.0, 1.0);
    let h = HorizonSpec::new(1000);
    let paths: Vec<Vec<f64>> = (0..4000u64)
        .map(|i| ode_reward_path(&spec, &h, derive_seed(2, &[i]), 1))
        .collect();
    for j in [100, 500, 1000] {
        let t = j as f64 / 1000.0;
        let z: Vec<f64> = paths.iter().map(|p| p[j]).collect();
        let (m, se) = mean_se(&z);
        assert!(m.abs() < 4.0 * se, "mean {m} at t={t}");
        let var = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
        // sd of the sample second moment of N(0, t) is t*sqrt(2/N)
        assert!(
            (var - t).abs() < 4.0 * t * (2.0 / z.len() as f64).sqrt(),
            "var {var} at t={t}"
        );
    }
}

#[test]
fn regret_matches_limit_solver() {
    let spec = BanditSpec::two_arm(1.0, 1.0);
    let h = HorizonSpec::new(10_000);
    let discrete: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            rescaled_regret(
                &simulate_sde_view(&spec, &h, derive_seed(3, &[0, i])).unwrap(),
                &spec,
            )
        })
        .collect();
    let limit: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            solve_sde(&spec, 1e-4, derive_seed(3, &[1, i]))
                .unwrap()
                .rescaled_regret(&spec)
        })
        .collect();
    let d = ks_statistic(&sorted(discrete), &sorted(limit));
    assert!(d < 0.05, "KS {d}");
}

#[test]
fn sample_variance_is_consistent() {
    let spec =
        BanditSpec::two_arm(1.0, 1.0).with_variance(VarianceMode::Adaptive, vec![1.0, 2.0], 0.05);
    let h = HorizonSpec::new(10_000);
    let finals: Vec<[f64; 2]> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let (_, s) = simulate_variance_adaptive(&spec, &h, derive_seed(4, &[i])).unwrap();
            [
                s.variance_at(0, 10_000).unwrap(),
                s.variance_at(1, 10_000).unwrap(),
            ]
        })
        .collect();
    for (k, sigma2) in [1.0, 4.0].into_iter().enumerate() {
        let v: Vec<f64> = finals.iter().map(|f| f[k]).collect();
        let (m, se) = mean_se(&v);
        let sd = se * (v.len() as f64).sqrt();
        assert!(
            (m - sigma2).abs() < 3.0 * sd,
            "arm {k}: mean S = {m}, sd {sd}"
        );
    }
}

#[test]
fn burn_in_splits_two_arms() {
    let spec = BanditSpec::two_arm(1.0, 1.0).with_variance(
        VarianceMode::MisspecifiedUnit,
        vec![1.0, 1.0],
        0.0125,
    );
    let h = HorizonSpec::new(1001);
    let (b, s) = simulate_variance_adaptive(&spec, &h, 5).unwrap();
    let j = s.burn_in_periods;
    for k in 0..2 {
        assert!((b.occupation[k][j] - 0.0125 / 2.0).abs() <= 1.0 / 1001.0);
    }
    assert_bundle_invariants(&b);
}

#[test]
fn full_horizon_batch_is_rejected() {
    let spec = BanditSpec::two_arm(1.0, 1.0);
    assert!(simulate_batched(&spec, &HorizonSpec::batched(100, 100), 1).is_err());
}

#[test]
fn invalid_specs_are_rejected_before_simulation() {
    let spec = BanditSpec::mab(vec![0.5, 1.0], 1.0);
    assert!(simulate_sde_view(&spec, &HorizonSpec::new(10), 1).is_err());
    let spec = BanditSpec::two_arm(1.0, 1.0);
    assert!(simulate_sde_view(&spec, &HorizonSpec::new(0), 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bundles_satisfy_invariants(
        gap in 0.0f64..3.0,
        b2 in 0.05f64..2.0,
        n in 1usize..400,
        seed in any::<u64>(),
        ode in any::<bool>(),
    ) {
        let spec = BanditSpec::two_arm(gap, b2);
        let h = HorizonSpec::new(n);
        let b = if ode { simulate_ode_view(&spec, &h, seed) } else { simulate_sde_view(&spec, &h, seed) }.unwrap();
        assert_bundle_invariants(&b);
        let r = rescaled_regret(&b, &spec);
        prop_assert!((0.0..=gap + 1e-12).contains(&r));
    }

    #[test]
    fn three_arm_bundles_satisfy_invariants(n in 1usize..150, seed in any::<u64>()) {
        let spec = BanditSpec::mab(vec![0.0, 0.7, 1.4], 0.5);
        assert_bundle_invariants(&simulate_sde_view(&spec, &HorizonSpec::new(n), seed).unwrap());
    }

    #[test]
    fn unit_batches_match_plain_sampler(n in 1usize..300, seed in any::<u64>()) {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        prop_assert_eq!(
            simulate_batched(&spec, &HorizonSpec::batched(n, 1), seed).unwrap(),
            simulate_sde_view(&spec, &HorizonSpec::new(n), seed).unwrap()
        );
    }
}
