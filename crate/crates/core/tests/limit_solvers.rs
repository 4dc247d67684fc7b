use rayon::prelude::*;

use tsdiffusion::analysis::{ks_statistic, quadratic_variation};
use tsdiffusion::limit::{brownian_path, solve_random_ode, solve_sde, solve_sde_variance_start};
use tsdiffusion::rng::derive_seed;
use tsdiffusion::{BanditSpec, VarianceMode};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn endpoints(f: impl Fn(u64) -> f64 + Sync, family: u64, count: u64) -> Vec<f64> {
    (0..count)
        .into_par_iter()
        .map(|i| f(derive_seed(family, &[i])))
        .collect()
}

#[test]
fn identical_arms_are_exchangeable() {
    let spec = BanditSpec::mab(vec![0.0, 0.0], 1.0);
    let r = endpoints(
        |s| solve_sde(&spec, 1e-3, s).unwrap().terminal_occupation(1),
        1,
        10_000,
    );
    let m = r.iter().sum::<f64>() / r.len() as f64;
    let sd = (r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
    assert!(
        (m - 0.5).abs() < 3.0 * sd / (r.len() as f64).sqrt(),
        "mean {m}"
    );
}

#[test]
fn occupation_sums_to_time() {
    for arms in [2, 3] {
        let gaps: Vec<f64> = (0..arms).map(|k| k as f64 * 0.8).collect();
        let spec = BanditSpec::mab(gaps, 1.0);
        let p = solve_sde(&spec, 1e-3, 2).unwrap();
        let total: f64 = (0..arms).map(|k| p.terminal_occupation(k)).sum();
        assert!((total - 1.0).abs() <= arms as f64 * 1e-3);
        let q = solve_random_ode(&spec, 1e-3, 2).unwrap();
        for k in 0..arms {
            assert_eq!(q.occupation[k][0], 0.0);
            assert!(q.occupation[k].windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn step_refinement_is_self_consistent() {
    let spec = BanditSpec::two_arm(1.0, 1.0);
    let fine = endpoints(
        |s| solve_sde(&spec, 1e-4, s).unwrap().terminal_occupation(1),
        3,
        10_000,
    );
    let coarse = endpoints(
        |s| solve_sde(&spec, 1e-3, s).unwrap().terminal_occupation(1),
        4,
        10_000,
    );
    let d = ks_statistic(&sorted(fine), &sorted(coarse));
    assert!(d < 0.02, "KS {d}");
}

#[test]
fn large_gap_starves_the_worse_arm() {
    let spec = BanditSpec::two_arm(50.0, 1.0);
    let r = endpoints(
        |s| {
            solve_random_ode(&spec, 1e-3, s)
                .unwrap()
                .terminal_occupation(1)
        },
        5,
        1000,
    );
    let m = r.iter().sum::<f64>() / r.len() as f64;
    assert!(m < 0.05, "mean {m}");
}

#[test]
fn misspecified_variance_changes_the_law() {
    let base = BanditSpec::two_arm(1.0, 1.0);
    let run = |mode| {
        let spec = base.clone().with_variance(mode, vec![1.0, 2.0], 0.02);
        endpoints(
            |s| {
                solve_sde_variance_start(&spec, 1e-3, s)
                    .unwrap()
                    .terminal_occupation(1)
            },
            6,
            10_000,
        )
    };
    let d = ks_statistic(
        &sorted(run(VarianceMode::Adaptive)),
        &sorted(run(VarianceMode::MisspecifiedUnit)),
    );
    assert!(d > 0.05, "KS {d}");
}

#[test]
fn brownian_endpoints_are_standard_and_independent() {
    let ends: Vec<(f64, f64)> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let b = brownian_path(2, 1e-3, derive_seed(7, &[i])).unwrap();
            (b.values[0][1000], b.values[1][1000])
        })
        .collect();
    let n = ends.len() as f64;
    let m0 = ends.iter().map(|e| e.0).sum::<f64>() / n;
    let m1 = ends.iter().map(|e| e.1).sum::<f64>() / n;
    let var0 = ends.iter().map(|e| (e.0 - m0).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = ends.iter().map(|e| (e.0 - m0) * (e.1 - m1)).sum::<f64>() / (n - 1.0);
    assert!((0.97..=1.03).contains(&var0), "var {var0}");
    assert!(cov.abs() <= 0.03, "cov {cov}");
}

#[test]
fn brownian_quadratic_variation_concentrates() {
    let ok = (0..1000u64)
        .into_par_iter()
        .filter(|&i| {
            let b = brownian_path(1, 1e-4, derive_seed(8, &[i])).unwrap();
            (0.95..=1.05).contains(&quadratic_variation(&b.values[0]))
        })
        .count();
    assert!(ok >= 950, "{ok} of 1000");
}
