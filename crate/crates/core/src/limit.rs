//! Fixed-step solvers for the limiting systems on `[0, 1]`.
//!
//! - [`solve_sde`]: Euler–Maruyama for `dR = Γ(R, Y) dt`, `dY = sqrt(Γ(R, Y)) dB`.
//! - [`solve_random_ode`]: explicit Euler for `dR/dt = Γ(R, B∘R)` given a
//!   pre-sampled Brownian path.
//! - [`solve_sde_variance_start`]: the variance-aware SDE started after a
//!   round-robin burn-in at `t_eps`.
//!
//! In LINEAR mode `Λ` replaces `Γ` throughout.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{family, write_columns};
use crate::kernel::Kernel;
use crate::model::{ensure_valid, BanditSpec, HorizonSpec, VarianceMode};
use crate::rng::{self, tag};

/// Largest accepted step size.
pub const MAX_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LimitSolver {
    SdeEm,
    RandomOde,
}

/// `K` independent Brownian motions sampled on `{0, h, ..., 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dim: usize,
    pub h: f64,
    pub seed: u64,
    /// `increments[k][i] = B_k((i+1)h) - B_k(ih)`.
    pub increments: Vec<Vec<f64>>,
    /// `values[k][j] = B_k(jh)`, starting at 0.
    pub values: Vec<Vec<f64>>,
}

impl BrownianPath {
    pub fn steps(&self) -> usize {
        self.values.first().map_or(0, |v| v.len() - 1)
    }

    /// `B_k(t)` by linear interpolation between grid points.
    pub fn value_at(&self, k: usize, t: f64) -> f64 {
        let v = &self.values[k];
        let steps = v.len() - 1;
        let x = (t / self.h).clamp(0.0, steps as f64);
        let i = (x.floor() as usize).min(steps - 1);
        let w = x - i as f64;
        v[i] + w * (v[i + 1] - v[i])
    }
}

fn step_count(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= MAX_STEP) {
        return Err(Error::StepSize { h, max: MAX_STEP });
    }
    let steps = (1.0 / h).round();
    if ((steps * h) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "1/h must be an integer, got h = {h}"
        )));
    }
    Ok(steps as usize)
}

/// Samples `dim` independent Brownian paths with step `h` (which must divide 1).
pub fn brownian_path(dim: usize, h: f64, seed: u64) -> Result<BrownianPath> {
    if !(h > 0.0) {
        return Err(Error::StepSize {
            h,
            max: f64::INFINITY,
        });
    }
    let steps = (1.0 / h).round() as usize;
    if steps == 0 || ((steps as f64 * h) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "1/h must be an integer, got h = {h}"
        )));
    }
    let normal = Normal::new(0.0, h.sqrt()).expect("finite sd");
    let mut increments = Vec::with_capacity(dim);
    let mut values = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut rng = rng::stream(seed, &[tag::BROWNIAN, k as u64]);
        let inc: Vec<f64> = (0..steps).map(|_| normal.sample(&mut rng)).collect();
        let mut path = Vec::with_capacity(steps + 1);
        let mut b = 0.0;
        path.push(b);
        for d in &inc {
            b += d;
            path.push(b);
        }
        increments.push(inc);
        values.push(path);
    }
    Ok(BrownianPath {
        dim,
        h,
        seed,
        increments,
        values,
    })
}

/// One trajectory of a limit solver on the grid `{0, h, ..., 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPath {
    pub solver: LimitSolver,
    pub h: f64,
    pub seed: u64,
    pub occupation: Vec<Vec<f64>>,
    /// `Y_k` for SDE paths, `B_k ∘ R_k` for random-ODE paths.
    pub noise: Vec<Vec<f64>>,
    pub brownian: BrownianPath,
    /// First grid index integrated by the solver (non-zero after a burn-in).
    pub start_index: usize,
}

impl LimitPath {
    pub fn arms(&self) -> usize {
        self.occupation.len()
    }

    pub fn steps(&self) -> usize {
        self.occupation[0].len() - 1
    }

    pub fn terminal_occupation(&self, k: usize) -> f64 {
        self.occupation[k][self.steps()]
    }

    pub fn occupation_at(&self, k: usize, t: f64) -> f64 {
        self.occupation[k][crate::discrete::grid_index(t, self.steps())]
    }

    /// `Σ_k gap_k R_k(1)`.
    pub fn rescaled_regret(&self, spec: &BanditSpec) -> f64 {
        spec.regret_gaps()
            .iter()
            .enumerate()
            .map(|(k, g)| g * self.terminal_occupation(k))
            .sum()
    }

    /// Same columns as a discrete SDE-view bundle; `M` is identically zero.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let steps = self.steps();
        let arms = self.arms();
        let t: Vec<f64> = (0..=steps).map(|j| j as f64 * self.h).collect();
        let zeros = vec![0.0; steps + 1];
        let noise_name = match self.solver {
            LimitSolver::SdeEm => "Y",
            LimitSolver::RandomOde => "ZR",
        };
        let mut header = vec!["t".to_string()];
        header.extend(family("R", arms));
        header.extend(family(noise_name, arms));
        header.extend(family("M", arms));
        header.extend(family("B", arms));
        let mut cols: Vec<&[f64]> = vec![&t];
        cols.extend(self.occupation.iter().map(Vec::as_slice));
        cols.extend(self.noise.iter().map(Vec::as_slice));
        cols.extend((0..arms).map(|_| zeros.as_slice()));
        cols.extend(self.brownian.values.iter().map(Vec::as_slice));
        write_columns(out, &header, &cols)
    }
}

fn require_known_unit(op: &'static str, spec: &BanditSpec) -> Result<()> {
    if spec.variance_mode != VarianceMode::KnownUnit {
        return Err(Error::WrongMode {
            op,
            mode: format!("{:?} variance", spec.variance_mode),
        });
    }
    Ok(())
}

fn integrate_sde(
    kernel: &mut Kernel,
    brownian: &BrownianPath,
    occupation: &mut [Vec<f64>],
    noise: &mut [Vec<f64>],
    start: usize,
    h: f64,
) -> Result<()> {
    let arms = occupation.len();
    let steps = brownian.steps();
    let (mut u, mut v, mut g) = (vec![0.0; arms], vec![0.0; arms], vec![0.0; arms]);
    for i in start..steps {
        for k in 0..arms {
            u[k] = occupation[k][i];
            v[k] = noise[k][i];
        }
        kernel.eval(&u, &v, &mut g)?;
        for k in 0..arms {
            occupation[k][i + 1] = u[k] + g[k] * h;
            noise[k][i + 1] = v[k] + g[k].sqrt() * brownian.increments[k][i];
        }
    }
    Ok(())
}

/// Euler–Maruyama path of the diffusion limit.
pub fn solve_sde(spec: &BanditSpec, h: f64, seed: u64) -> Result<LimitPath> {
    ensure_valid(spec, &HorizonSpec::new(1))?;
    require_known_unit("solve_sde", spec)?;
    let steps = step_count(h)?;
    let mut kernel = Kernel::for_spec(spec)?;
    let brownian = brownian_path(spec.arms, h, seed)?;
    let mut occupation = vec![vec![0.0; steps + 1]; spec.arms];
    let mut noise = occupation.clone();
    integrate_sde(&mut kernel, &brownian, &mut occupation, &mut noise, 0, h)?;
    Ok(LimitPath {
        solver: LimitSolver::SdeEm,
        h,
        seed,
        occupation,
        noise,
        brownian,
        start_index: 0,
    })
}

/// Explicit-Euler path of the random ODE driven by one Brownian path per arm.
pub fn solve_random_ode(spec: &BanditSpec, h: f64, seed: u64) -> Result<LimitPath> {
    ensure_valid(spec, &HorizonSpec::new(1))?;
    require_known_unit("solve_random_ode", spec)?;
    let steps = step_count(h)?;
    let arms = spec.arms;
    let mut kernel = Kernel::for_spec(spec)?;
    // independent of the SDE solver's driver for the same seed
    let brownian = brownian_path(arms, h, rng::derive_seed(seed, &[tag::ODE_DRIVER]))?;
    let mut occupation = vec![vec![0.0; steps + 1]; arms];
    let mut noise = occupation.clone();
    let (mut u, mut v, mut g) = (vec![0.0; arms], vec![0.0; arms], vec![0.0; arms]);
    for i in 0..steps {
        for k in 0..arms {
            u[k] = occupation[k][i];
            v[k] = noise[k][i];
        }
        kernel.eval(&u, &v, &mut g)?;
        for k in 0..arms {
            let r = u[k] + g[k] * h;
            occupation[k][i + 1] = r;
            noise[k][i + 1] = brownian.value_at(k, r);
        }
    }
    Ok(LimitPath {
        solver: LimitSolver::RandomOde,
        h,
        seed,
        occupation,
        noise,
        brownian,
        start_index: 0,
    })
}

/// Variance-aware SDE started at `t_eps` from the round-robin burn-in state
/// `R_k = t_eps/K`, `Y_k = B_k(t_eps)/sqrt(K)`.
///
/// `Y` is noise in units of each arm's standard deviation, and the drift uses
/// `Γ^σ` for the spec's variance mode. Before `t_eps` the path records the
/// burn-in itself, `R_k(t) = t/K` and `Y_k(t) = B_k(t)/sqrt(K)`.
pub fn solve_sde_variance_start(spec: &BanditSpec, h: f64, seed: u64) -> Result<LimitPath> {
    ensure_valid(spec, &HorizonSpec::new(1))?;
    if spec.variance_mode == VarianceMode::KnownUnit {
        return Err(Error::WrongMode {
            op: "solve_sde_variance_start",
            mode: "KnownUnit variance".into(),
        });
    }
    let t_eps = spec.burn_in.expect("validated");
    if !(t_eps > 0.0 && t_eps < 1.0) {
        return Err(Error::BurnIn(t_eps));
    }
    let steps = step_count(h)?;
    let start = (t_eps / h).round() as usize;
    if ((start as f64 * h) - t_eps).abs() > 1e-9 || start == 0 {
        return Err(Error::InvalidArgument(format!(
            "burn-in t_eps = {t_eps} must be a positive multiple of h = {h}"
        )));
    }
    let arms = spec.arms;
    let kf = arms as f64;
    let mut kernel = Kernel::sigma_for_spec(spec)?;
    let brownian = brownian_path(arms, h, seed)?;
    let mut occupation = vec![vec![0.0; steps + 1]; arms];
    let mut noise = occupation.clone();
    for k in 0..arms {
        for j in 0..=start {
            occupation[k][j] = j as f64 * h / kf;
            noise[k][j] = brownian.values[k][j] / kf.sqrt();
        }
    }
    integrate_sde(
        &mut kernel,
        &brownian,
        &mut occupation,
        &mut noise,
        start,
        h,
    )?;
    Ok(LimitPath {
        solver: LimitSolver::SdeEm,
        h,
        seed,
        occupation,
        noise,
        brownian,
        start_index: start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_or_uneven_steps() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        assert!(matches!(
            solve_sde(&spec, 1e-2, 1),
            Err(Error::StepSize { .. })
        ));
        assert!(matches!(
            solve_sde(&spec, 0.0, 1),
            Err(Error::StepSize { .. })
        ));
        assert!(solve_sde(&spec, 3e-4, 1).is_err());
        assert!(solve_random_ode(&spec, 2e-3, 1).is_err());
    }

    #[test]
    fn brownian_paths_start_at_zero_and_accumulate() {
        let b = brownian_path(3, 1e-3, 5).unwrap();
        assert_eq!(b.steps(), 1000);
        for k in 0..3 {
            assert_eq!(b.values[k][0], 0.0);
            let sum: f64 = b.increments[k].iter().sum();
            assert!((sum - b.values[k][1000]).abs() < 1e-12);
        }
        assert_ne!(b.increments[0], b.increments[1]);
        assert_eq!(b, brownian_path(3, 1e-3, 5).unwrap());
        assert_eq!(
            b.value_at(1, 0.0105),
            0.5 * (b.values[1][10] + b.values[1][11])
        );
        assert_eq!(b.value_at(1, 1.0), b.values[1][1000]);
    }

    #[test]
    fn sde_paths_conserve_time() {
        let spec = BanditSpec::mab(vec![0.0, 1.0, 0.3], 0.5);
        let p = solve_sde(&spec, 1e-3, 2).unwrap();
        for j in 0..=1000 {
            let s: f64 = (0..3).map(|k| p.occupation[k][j]).sum();
            assert!((s - j as f64 * 1e-3).abs() < 1e-9);
            for k in 0..3 {
                if j > 0 {
                    assert!(p.occupation[k][j] > p.occupation[k][j - 1]);
                }
            }
        }
        assert_eq!(p.occupation[0][0], 0.0);
        assert_eq!(p.noise[0][0], 0.0);
    }

    #[test]
    fn random_ode_noise_is_brownian_at_occupation() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        let p = solve_random_ode(&spec, 1e-3, 3).unwrap();
        for j in [0, 1, 500, 1000] {
            for k in 0..2 {
                let r = p.occupation[k][j];
                assert_eq!(p.noise[k][j], p.brownian.value_at(k, r));
            }
        }
        let s = p.terminal_occupation(0) + p.terminal_occupation(1);
        assert!((s - 1.0).abs() < 2e-3);
        assert_ne!(p.brownian, solve_sde(&spec, 1e-3, 3).unwrap().brownian);
    }

    #[test]
    fn variance_start_initial_state() {
        let spec = BanditSpec::two_arm(1.0, 1.0).with_variance(
            VarianceMode::Adaptive,
            vec![1.0, 2.0],
            0.05,
        );
        let p = solve_sde_variance_start(&spec, 1e-3, 4).unwrap();
        assert_eq!(p.start_index, 50);
        assert_eq!(p.occupation[0][50] + p.occupation[1][50], 0.05);
        for k in 0..2 {
            assert_eq!(p.noise[k][50], p.brownian.values[k][50] / 2f64.sqrt());
        }
        let uneven = BanditSpec::two_arm(1.0, 1.0).with_variance(
            VarianceMode::Adaptive,
            vec![1.0, 2.0],
            0.0505,
        );
        assert!(solve_sde_variance_start(&uneven, 1e-3, 4).is_err());
        assert!(solve_sde_variance_start(&BanditSpec::two_arm(1.0, 1.0), 1e-3, 4).is_err());
    }

    #[test]
    fn unit_sigma_variance_start_matches_plain_drift() {
        let sigma = BanditSpec::two_arm(1.0, 1.0).with_variance(
            VarianceMode::Adaptive,
            vec![1.0, 1.0],
            0.01,
        );
        let p = solve_sde_variance_start(&sigma, 1e-3, 6).unwrap();
        let mut kernel = Kernel::for_spec(&BanditSpec::two_arm(1.0, 1.0)).unwrap();
        let mut occ = p.occupation.clone();
        let mut noise = p.noise.clone();
        integrate_sde(
            &mut kernel,
            &p.brownian,
            &mut occ,
            &mut noise,
            p.start_index,
            1e-3,
        )
        .unwrap();
        for k in 0..2 {
            for j in 0..=1000 {
                assert!((occ[k][j] - p.occupation[k][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        assert_eq!(
            solve_sde(&spec, 1e-3, 8).unwrap(),
            solve_sde(&spec, 1e-3, 8).unwrap()
        );
        assert_ne!(
            solve_sde(&spec, 1e-3, 8).unwrap(),
            solve_sde(&spec, 1e-3, 9).unwrap()
        );
    }

    #[test]
    fn csv_columns() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        let p = solve_random_ode(&spec, 1e-3, 1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1002);
        assert!(text.starts_with("t,R_0,R_1,ZR_0,ZR_1,M_0,M_1,B_0,B_1\n"));
    }
}
