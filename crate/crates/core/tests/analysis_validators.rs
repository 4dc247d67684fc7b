use rayon::prelude::*;

use tsdiffusion::analysis::{
    chi_epsilon, ks_two_sample, time_change_extract, EmpiricalDistribution, GridPath, Provenance,
};
use tsdiffusion::limit::{brownian_path, solve_sde};
use tsdiffusion::rng::derive_seed;
use tsdiffusion::BanditSpec;

fn sample(family: u64) -> EmpiricalDistribution {
    let spec = BanditSpec::two_arm(1.0, 1.0);
    let v = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            solve_sde(&spec, 1e-3, derive_seed(family, &[i]))
                .unwrap()
                .terminal_occupation(1)
        })
        .collect();
    EmpiricalDistribution::new(
        v,
        Provenance {
            spec_hash: spec.spec_hash(),
            source: "SDE_EM(h=0.001)".into(),
            master_seed: family,
        },
    )
    .unwrap()
}

#[test]
fn independent_samples_pass_null_threshold() {
    let out = ks_two_sample(&sample(1), &sample(2), 0.03);
    assert!(out.pass, "KS {}", out.statistic);
}

#[test]
fn distribution_files_round_trip() {
    let d = sample(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r2.dist");
    d.save(&path).unwrap();
    let back = EmpiricalDistribution::load(&path).unwrap();
    assert_eq!(back, d);
    assert_eq!(ks_two_sample(&back, &d, 1e-9).statistic, 0.0);
}

#[test]
fn chi_bound_on_brownian_paths() {
    for i in 0..20u64 {
        let b = brownian_path(1, 1e-4, derive_seed(4, &[i])).unwrap();
        let p = GridPath::uniform(b.values[0].clone());
        let c = chi_epsilon(&p, 0.1, i).unwrap();
        for (a, z) in c.on_grid().iter().zip(&p.values) {
            assert!((a - z).abs() <= 0.1);
        }
    }
}

#[test]
fn time_change_recovers_occupation_clock() {
    let spec = BanditSpec::two_arm(1.0, 1.0);
    let p = solve_sde(&spec, 1e-4, 5).unwrap();
    for k in 0..2 {
        let tc = time_change_extract(&p, k).unwrap();
        let qv = tsdiffusion::analysis::quadratic_variation(&tc.values);
        let r1 = p.terminal_occupation(k);
        assert!(
            (qv - r1).abs() <= 0.05 * r1,
            "arm {k}: qv {qv} vs R(1) {r1}"
        );
        assert_eq!(tc.values[0], 0.0);
        assert_eq!(*tc.values.last().unwrap(), p.noise[k][10_000]);
    }
}
