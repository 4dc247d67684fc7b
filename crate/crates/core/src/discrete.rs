//! Finite-horizon Thompson sampling written as the discrete systems whose
//! limits are the diffusion SDE and random ODE.
//!
//! Time is rescaled to the grid `t_j = j/n`. At period `i + 1` the sampler's
//! play probabilities are a kernel evaluated at the state at `t_i`, a single
//! multinomial draw picks the arm, and the recorded processes advance:
//!
//! - `R_k`: occupation fraction, `(1/n) Σ I_k`.
//! - `Y_k`: rescaled censored noise `(1/sqrt(n)) Σ I_k (X_k - μ_k)` (SDE view),
//!   or `Z_k ∘ R_k`, the same sum taken from arm `k`'s own reward stream (ODE view).
//! - `M_k`: martingale remainder `(1/n) Σ (I_k - Γ_k)`.
//! - `B_k`: noise normalised by `sqrt(Γ_k)` and the arm's standard deviation (SDE view).
//!
//! Paths are piecewise constant and stored at every grid point.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{family, write_columns};
use crate::kernel::{argmax_into, Kernel};
use crate::model::{ensure_valid, BanditSpec, HorizonSpec, VarianceMode};
use crate::rng::{self, tag, SimRng};

/// Lower clamp on `Γ_k` before dividing by `sqrt(Γ_k)`.
pub const MIN_PROBABILITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum View {
    SdeView,
    OdeView,
}

/// Recorded paths of one replication. Per-arm vectors are indexed `[k][j]`
/// for grid points `j = 0..=n`, or `[k][i]` for periods `i = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub view: View,
    pub n: usize,
    pub arms: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Arm played in period `i + 1`.
    pub plays: Vec<u32>,
    /// Play probabilities in force for period `i + 1`.
    pub probabilities: Vec<Vec<f64>>,
    pub occupation: Vec<Vec<f64>>,
    /// `Y^n` in the SDE view, `Z^n ∘ R^n` in the ODE view.
    pub noise: Vec<Vec<f64>>,
    pub martingale: Vec<Vec<f64>>,
    /// `(1/n) Σ_{i<j} Γ_k(t_i)`, so that `R = compensator + M`.
    pub compensator: Vec<Vec<f64>>,
    /// `B^n` (SDE view only; empty otherwise).
    pub brownian: Vec<Vec<f64>>,
    /// ODE view only: `Z^n_k(i/n)` for `i = 0..=` plays of arm `k`, i.e. the
    /// part of each reward stream that was consumed.
    pub reward_paths: Vec<Vec<f64>>,
}

impl PathBundle {
    fn new(view: View, n: usize, arms: usize, batch_size: usize, seed: u64) -> Self {
        let grid = || vec![vec![0.0; n + 1]; arms];
        Self {
            view,
            n,
            arms,
            batch_size,
            seed,
            plays: Vec::with_capacity(n),
            probabilities: vec![vec![0.0; n]; arms],
            occupation: grid(),
            noise: grid(),
            martingale: grid(),
            compensator: grid(),
            brownian: if view == View::SdeView {
                grid()
            } else {
                Vec::new()
            },
            reward_paths: if view == View::OdeView {
                vec![vec![0.0]; arms]
            } else {
                Vec::new()
            },
        }
    }

    /// `R^n_k(t)` with the piecewise-constant (right-continuous) convention.
    pub fn occupation_at(&self, k: usize, t: f64) -> f64 {
        self.occupation[k][grid_index(t, self.n)]
    }

    pub fn terminal_occupation(&self, k: usize) -> f64 {
        self.occupation[k][self.n]
    }

    /// Number of plays of each arm in the first `j` periods.
    pub fn play_counts(&self, j: usize) -> Vec<usize> {
        let mut counts = vec![0; self.arms];
        for &a in &self.plays[..j] {
            counts[a as usize] += 1;
        }
        counts
    }

    /// Columnar dump: `t, R_k.., Y_k.. | ZR_k.., M_k.., [B_k..]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let t: Vec<f64> = (0..=self.n).map(|j| j as f64 / self.n as f64).collect();
        let noise_name = match self.view {
            View::SdeView => "Y",
            View::OdeView => "ZR",
        };
        let mut header = vec!["t".to_string()];
        header.extend(family("R", self.arms));
        header.extend(family(noise_name, self.arms));
        header.extend(family("M", self.arms));
        let mut cols: Vec<&[f64]> = vec![&t];
        cols.extend(self.occupation.iter().map(Vec::as_slice));
        cols.extend(self.noise.iter().map(Vec::as_slice));
        cols.extend(self.martingale.iter().map(Vec::as_slice));
        if self.view == View::SdeView {
            header.extend(family("B", self.arms));
            cols.extend(self.brownian.iter().map(Vec::as_slice));
        }
        write_columns(out, &header, &cols)
    }
}

pub(crate) fn grid_index(t: f64, steps: usize) -> usize {
    let j = (t * steps as f64 + 1e-9).floor();
    (j.max(0.0) as usize).min(steps)
}

/// Per-arm running sample statistics for the variance-estimating sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveVarianceState {
    /// Sample mean of arm `k`'s raw rewards at `t_j` (NaN before its first play).
    pub sample_mean: Vec<Vec<f64>>,
    /// Sample variance (divisor = play count) at `t_j`; NaN before two plays.
    pub sample_variance: Vec<Vec<f64>>,
    /// Whether period `i + 1` belonged to the round-robin burn-in.
    pub burn_in: Vec<bool>,
    pub burn_in_periods: usize,
}

impl AdaptiveVarianceState {
    pub fn variance_at(&self, k: usize, j: usize) -> Option<f64> {
        let s = self.sample_variance[k][j];
        (!s.is_nan()).then_some(s)
    }
}

struct Recorder {
    bundle: PathBundle,
    counts: Vec<usize>,
    n: f64,
    inv_n: f64,
}

impl Recorder {
    fn new(view: View, n: usize, arms: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            bundle: PathBundle::new(view, n, arms, batch_size, seed),
            counts: vec![0; arms],
            n: n as f64,
            inv_n: 1.0 / n as f64,
        }
    }

    fn state(&self, i: usize, u: &mut [f64], v: &mut [f64]) {
        for k in 0..self.bundle.arms {
            u[k] = self.bundle.occupation[k][i];
            v[k] = self.bundle.noise[k][i];
        }
    }

    /// Advances every path from `t_i` to `t_{i+1}` after `arm` was played.
    fn step(&mut self, i: usize, probs: &[f64], arm: usize, noise_inc: f64, brownian_inc: f64) {
        self.counts[arm] += 1;
        self.bundle.plays.push(arm as u32);
        let b = &mut self.bundle;
        for k in 0..b.arms {
            let played = if k == arm { 1.0 } else { 0.0 };
            b.probabilities[k][i] = probs[k];
            b.occupation[k][i + 1] = self.counts[k] as f64 / self.n;
            b.noise[k][i + 1] = b.noise[k][i] + played * noise_inc;
            b.martingale[k][i + 1] = b.martingale[k][i] + (played - probs[k]) * self.inv_n;
            b.compensator[k][i + 1] = b.compensator[k][i] + probs[k] * self.inv_n;
            if !b.brownian.is_empty() {
                b.brownian[k][i + 1] = b.brownian[k][i] + played * brownian_inc;
            }
        }
    }
}

#[inline]
fn draw_arm(rng: &mut SimRng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate().take(probs.len() - 1) {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
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

/// Thompson sampling with exogenous per-period rewards.
pub fn simulate_sde_view(
    spec: &BanditSpec,
    horizon: &HorizonSpec,
    seed: u64,
) -> Result<PathBundle> {
    ensure_valid(spec, horizon)?;
    require_known_unit("simulate_sde_view", spec)?;
    run_sde_view(spec, horizon.n, 1, seed)
}

/// Thompson sampling that commits to one arm for each batch of
/// `horizon.batch_size` periods and updates its posterior only between batches.
pub fn simulate_batched(spec: &BanditSpec, horizon: &HorizonSpec, seed: u64) -> Result<PathBundle> {
    ensure_valid(spec, horizon)?;
    require_known_unit("simulate_batched", spec)?;
    let m = horizon.batch_size;
    if m > 1 && m > horizon.n / 10 {
        return Err(Error::BatchTooLarge {
            batch_size: m,
            limit: horizon.n / 10,
        });
    }
    run_sde_view(spec, horizon.n, m, seed)
}

fn run_sde_view(spec: &BanditSpec, n: usize, batch: usize, seed: u64) -> Result<PathBundle> {
    let arms = spec.arms;
    let mut kernel = Kernel::for_spec(spec)?;
    let mut rng = rng::stream(seed, &[tag::ARM_CHOICE]);
    let mut rec = Recorder::new(View::SdeView, n, arms, batch, seed);
    let sd = spec.sds();
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let (mut u, mut v, mut probs) = (vec![0.0; arms], vec![0.0; arms], vec![0.0; arms]);

    let mut i = 0;
    while i < n {
        rec.state(i, &mut u, &mut v);
        kernel.eval(&u, &v, &mut probs)?;
        let arm = draw_arm(&mut rng, &probs);
        let scale = inv_sqrt_n / probs[arm].max(MIN_PROBABILITY).sqrt();
        for period in i..(i + batch).min(n) {
            let xi: f64 = rng.sample(StandardNormal);
            rec.step(period, &probs, arm, sd[arm] * xi * inv_sqrt_n, xi * scale);
        }
        i += batch;
    }
    Ok(rec.bundle)
}

/// Thompson sampling where arm `k`'s `m`-th reward is drawn only when the
/// arm is played for the `m`-th time.
pub fn simulate_ode_view(
    spec: &BanditSpec,
    horizon: &HorizonSpec,
    seed: u64,
) -> Result<PathBundle> {
    ensure_valid(spec, horizon)?;
    require_known_unit("simulate_ode_view", spec)?;
    let (n, arms) = (horizon.n, spec.arms);
    let mut kernel = Kernel::for_spec(spec)?;
    let mut arm_rng = rng::stream(seed, &[tag::ARM_CHOICE]);
    let mut streams: Vec<SimRng> = (0..arms)
        .map(|k| rng::stream(seed, &[tag::REWARDS, k as u64]))
        .collect();
    let mut rec = Recorder::new(View::OdeView, n, arms, 1, seed);
    let sd = spec.sds();
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let (mut u, mut v, mut probs) = (vec![0.0; arms], vec![0.0; arms], vec![0.0; arms]);

    for i in 0..n {
        rec.state(i, &mut u, &mut v);
        kernel.eval(&u, &v, &mut probs)?;
        let arm = draw_arm(&mut arm_rng, &probs);
        let xi: f64 = streams[arm].sample(StandardNormal);
        let inc = sd[arm] * xi * inv_sqrt_n;
        rec.step(i, &probs, arm, inc, 0.0);
        let z = &mut rec.bundle.reward_paths[arm];
        let last = *z.last().expect("reward path starts at 0");
        z.push(last + inc);
    }
    Ok(rec.bundle)
}

/// Arm `k`'s full reward-stream path `Z^n_k(t_j)`, `j = 0..=n`, regenerated
/// from the same stream the ODE view consumes lazily.
pub fn ode_reward_path(spec: &BanditSpec, horizon: &HorizonSpec, seed: u64, k: usize) -> Vec<f64> {
    let n = horizon.n;
    let mut stream = rng::stream(seed, &[tag::REWARDS, k as u64]);
    let scale = spec.sd(k) / (n as f64).sqrt();
    let mut out = Vec::with_capacity(n + 1);
    let mut z = 0.0;
    out.push(z);
    for _ in 0..n {
        z += scale * stream.sample::<f64, _>(StandardNormal);
        out.push(z);
    }
    out
}

/// Thompson sampling that estimates reward variances.
///
/// Arms are played round-robin while `t_i < t_eps`; afterwards the posterior
/// for arm `k` uses its running sample variance `S_k` (ADAPTIVE) or `1`
/// (MISSPECIFIED_UNIT). Rewards always have the spec's `arm_sd`. The `noise`
/// family holds the raw `Y^n`; `brownian` is normalised by `σ_k`.
pub fn simulate_variance_adaptive(
    spec: &BanditSpec,
    horizon: &HorizonSpec,
    seed: u64,
) -> Result<(PathBundle, AdaptiveVarianceState)> {
    ensure_valid(spec, horizon)?;
    if spec.variance_mode == VarianceMode::KnownUnit {
        return Err(Error::WrongMode {
            op: "simulate_variance_adaptive",
            mode: "KnownUnit variance".into(),
        });
    }
    let (n, arms) = (horizon.n, spec.arms);
    let t_eps = spec.burn_in.expect("validated");
    let periods = t_eps * n as f64;
    if periods < 2.0 * arms as f64 {
        return Err(Error::BurnInTooShort {
            periods,
            required: 2 * arms,
        });
    }
    // periods i with t_i < t_eps
    let burn = ((periods - 1e-9).ceil() as usize).min(n);
    let adaptive = spec.variance_mode == VarianceMode::Adaptive;

    let mut rng = rng::stream(seed, &[tag::ARM_CHOICE]);
    let mut rec = Recorder::new(View::SdeView, n, arms, 1, seed);
    let sd = spec.sds();
    let true_means = spec.rescaled_means();
    let sqrt_n = (n as f64).sqrt();
    let inv_sqrt_n = 1.0 / sqrt_n;
    let b2 = spec.prior_scale;

    let mut state = AdaptiveVarianceState {
        sample_mean: vec![vec![f64::NAN; n + 1]; arms],
        sample_variance: vec![vec![f64::NAN; n + 1]; arms],
        burn_in: Vec::with_capacity(n),
        burn_in_periods: burn,
    };
    let mut count = vec![0usize; arms];
    let mut mean = vec![0.0; arms];
    let mut m2 = vec![0.0; arms];
    let mut sum = vec![0.0; arms];
    let (mut post_mean, mut post_var, mut probs) =
        (vec![0.0; arms], vec![0.0; arms], vec![0.0; arms]);

    for i in 0..n {
        let in_burn = i < burn;
        let arm = if in_burn {
            probs
                .iter_mut()
                .enumerate()
                .for_each(|(k, p)| *p = f64::from(k == i % arms));
            i % arms
        } else {
            for k in 0..arms {
                let precision = b2 + rec.bundle.occupation[k][i];
                post_mean[k] = sum[k] * inv_sqrt_n / precision;
                let s2 = if adaptive {
                    (m2[k] / count[k] as f64).max(MIN_PROBABILITY)
                } else {
                    1.0
                };
                post_var[k] = s2 / precision;
            }
            argmax_into(&post_mean, &post_var, &mut probs)?;
            draw_arm(&mut rng, &probs)
        };
        let xi: f64 = rng.sample(StandardNormal);
        let x = true_means[arm] * inv_sqrt_n + sd[arm] * xi;
        let scale = inv_sqrt_n / probs[arm].max(MIN_PROBABILITY).sqrt();
        rec.step(i, &probs, arm, sd[arm] * xi * inv_sqrt_n, xi * scale);

        count[arm] += 1;
        sum[arm] += x;
        let delta = x - mean[arm];
        mean[arm] += delta / count[arm] as f64;
        m2[arm] += delta * (x - mean[arm]);
        state.burn_in.push(in_burn);
        for k in 0..arms {
            if count[k] >= 1 {
                state.sample_mean[k][i + 1] = mean[k];
            }
            if count[k] >= 2 {
                state.sample_variance[k][i + 1] = m2[k] / count[k] as f64;
            }
        }
    }
    Ok((rec.bundle, state))
}

/// Rescaled regret `Σ_k gap_k R_k(1)` (regret divided by `sqrt(n)`).
pub fn rescaled_regret(bundle: &PathBundle, spec: &BanditSpec) -> f64 {
    spec.regret_gaps()
        .iter()
        .enumerate()
        .map(|(k, g)| g * bundle.terminal_occupation(k))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(b: &PathBundle) {
        for j in 0..=b.n {
            let counts = b.play_counts(j);
            assert_eq!(counts.iter().sum::<usize>(), j);
            let total: f64 = (0..b.arms).map(|k| b.occupation[k][j]).sum();
            assert!((total - j as f64 / b.n as f64).abs() < 1e-14);
            for k in 0..b.arms {
                assert_eq!(b.occupation[k][j], counts[k] as f64 / b.n as f64);
                let residual = b.occupation[k][j] - b.martingale[k][j] - b.compensator[k][j];
                assert!(residual.abs() < 1e-12, "decomposition off by {residual}");
                if j > 0 {
                    let inc = b.occupation[k][j] - b.occupation[k][j - 1];
                    assert!(inc == 0.0 || (inc - 1.0 / b.n as f64).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_period() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        for view in [View::SdeView, View::OdeView] {
            let b = match view {
                View::SdeView => simulate_sde_view(&spec, &HorizonSpec::new(1), 3).unwrap(),
                View::OdeView => simulate_ode_view(&spec, &HorizonSpec::new(1), 3).unwrap(),
            };
            let ends: Vec<f64> = (0..2).map(|k| b.terminal_occupation(k)).collect();
            assert_eq!(ends.iter().filter(|&&r| r == 1.0).count(), 1);
            assert_eq!(ends.iter().filter(|&&r| r == 0.0).count(), 1);
            check_invariants(&b);
        }
    }

    #[test]
    fn paths_satisfy_invariants() {
        let spec = BanditSpec::mab(vec![0.0, 1.0, 0.5], 0.5);
        let h = HorizonSpec::new(500);
        check_invariants(&simulate_sde_view(&spec, &h, 1).unwrap());
        check_invariants(&simulate_ode_view(&spec, &h, 1).unwrap());
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        let h = HorizonSpec::new(300);
        assert_eq!(
            simulate_sde_view(&spec, &h, 9).unwrap(),
            simulate_sde_view(&spec, &h, 9).unwrap()
        );
        assert_eq!(
            simulate_ode_view(&spec, &h, 9).unwrap(),
            simulate_ode_view(&spec, &h, 9).unwrap()
        );
        assert_ne!(
            simulate_sde_view(&spec, &h, 9).unwrap(),
            simulate_sde_view(&spec, &h, 10).unwrap()
        );
    }

    #[test]
    fn unit_batches_reproduce_the_plain_sampler() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        for n in [5, 400] {
            let plain = simulate_sde_view(&spec, &HorizonSpec::new(n), 4).unwrap();
            let batched = simulate_batched(&spec, &HorizonSpec::batched(n, 1), 4).unwrap();
            assert_eq!(plain, batched);
        }
    }

    #[test]
    fn batches_commit_to_one_arm() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        let b = simulate_batched(&spec, &HorizonSpec::batched(1000, 40), 2).unwrap();
        for chunk in b.plays.chunks(40) {
            assert!(chunk.iter().all(|&a| a == chunk[0]));
        }
        check_invariants(&b);
        let err = simulate_batched(&spec, &HorizonSpec::batched(1000, 101), 2).unwrap_err();
        assert!(matches!(err, Error::BatchTooLarge { limit: 100, .. }));
        assert!(simulate_batched(&spec, &HorizonSpec::batched(1000, 1000), 2).is_err());
    }

    #[test]
    fn ode_view_consumes_exactly_its_plays() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        let h = HorizonSpec::new(400);
        let b = simulate_ode_view(&spec, &h, 5).unwrap();
        for k in 0..2 {
            let plays = b.play_counts(400)[k];
            assert_eq!(b.reward_paths[k].len(), plays + 1);
            let full = ode_reward_path(&spec, &h, 5, k);
            assert_eq!(&full[..=plays], &b.reward_paths[k][..]);
            // Z∘R at each grid point is the stream prefix indexed by n R(t_j)
            for j in 0..=400 {
                let idx = b.play_counts(j)[k];
                assert_eq!(b.noise[k][j], b.reward_paths[k][idx]);
            }
        }
    }

    #[test]
    fn adaptive_burn_in_is_round_robin() {
        let spec = BanditSpec::two_arm(1.0, 1.0).with_variance(
            VarianceMode::Adaptive,
            vec![1.0, 2.0],
            0.05,
        );
        let h = HorizonSpec::new(1000);
        let (b, s) = simulate_variance_adaptive(&spec, &h, 8).unwrap();
        assert_eq!(s.burn_in_periods, 50);
        assert_eq!(b.occupation[0][50], 0.025);
        assert_eq!(b.occupation[1][50], 0.025);
        assert!(s.burn_in[..50].iter().all(|&x| x));
        assert!(s.burn_in[50..].iter().all(|&x| !x));
        assert!(s.variance_at(0, 1).is_none());
        assert!(s.variance_at(0, 3).is_some());
        check_invariants(&b);
    }

    #[test]
    fn adaptive_requires_enough_burn_in() {
        let spec = BanditSpec::two_arm(1.0, 1.0).with_variance(
            VarianceMode::Adaptive,
            vec![1.0, 1.0],
            0.003,
        );
        let err = simulate_variance_adaptive(&spec, &HorizonSpec::new(1000), 1).unwrap_err();
        assert!(matches!(err, Error::BurnInTooShort { .. }));
        let known = BanditSpec::two_arm(1.0, 1.0);
        assert!(simulate_variance_adaptive(&known, &HorizonSpec::new(1000), 1).is_err());
    }

    #[test]
    fn regret_functional() {
        let zero = BanditSpec::mab(vec![0.0, 0.0], 1.0);
        let b = simulate_sde_view(&zero, &HorizonSpec::new(100), 1).unwrap();
        assert_eq!(rescaled_regret(&b, &zero), 0.0);
        let spec = BanditSpec::two_arm(2.0, 1.0);
        let b = simulate_sde_view(&spec, &HorizonSpec::new(100), 1).unwrap();
        let r = rescaled_regret(&b, &spec);
        assert_eq!(r, 2.0 * b.terminal_occupation(1));
        assert!((0.0..=2.0).contains(&r));
    }

    #[test]
    fn csv_has_one_row_per_grid_point() {
        let spec = BanditSpec::two_arm(1.0, 1.0);
        let b = simulate_sde_view(&spec, &HorizonSpec::new(20), 1).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 22);
        assert_eq!(lines[0], "t,R_0,R_1,Y_0,Y_1,M_0,M_1,B_0,B_1");
    }
}
