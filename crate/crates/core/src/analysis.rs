//! Validators for simulated paths and samples: empirical distributions,
//! two-sample KS, quadratic variation, the randomised step approximation
//! `χ_ε`, the step-function stochastic integral `F_ε`, and the time-changed
//! noise `Y_k ∘ R_k⁻¹`.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::limit::{LimitPath, LimitSolver};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub spec_hash: String,
    pub source: String,
    pub master_seed: u64,
}

/// A sorted sample of a scalar functional.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewSamples(values.len()));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample value {bad}"
            )));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, provenance })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Provenance::default())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Sample standard deviation (divisor `count - 1`).
    pub fn sd(&self) -> f64 {
        sample_sd(&self.values)
    }

    /// Nearest-rank quantile: the `ceil(p·count)`-th smallest value.
    pub fn quantile(&self, p: f64) -> f64 {
        nearest_rank(&self.values, p)
    }

    /// One value per line after `# key=value` provenance lines.
    pub fn to_text(&self) -> String {
        format_sample(&self.values, &self.provenance)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (values, provenance) = parse_sample(text)?;
        Self::new(values, provenance)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        Self::from_text(&text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub(crate) fn format_sample(values: &[f64], p: &Provenance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# spec_hash={}", p.spec_hash);
    let _ = writeln!(out, "# source={}", p.source);
    let _ = writeln!(out, "# master_seed={}", p.master_seed);
    let _ = writeln!(out, "# count={}", values.len());
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Reads the one-column format without the two-value minimum.
pub(crate) fn parse_sample(text: &str) -> Result<(Vec<f64>, Provenance)> {
    let mut provenance = Provenance::default();
    let mut values = Vec::new();
    let mut declared = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", lineno + 1));
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, value)) = meta.trim().split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "spec_hash" => provenance.spec_hash = value.to_string(),
                "source" => provenance.source = value.to_string(),
                "master_seed" => {
                    provenance.master_seed = value.parse().map_err(|_| bad("bad master_seed"))?
                }
                "count" => declared = Some(value.parse::<usize>().map_err(|_| bad("bad count"))?),
                _ => {}
            }
            continue;
        }
        values.push(line.parse::<f64>().map_err(|_| bad("not a number"))?);
    }
    if let Some(count) = declared {
        if count != values.len() {
            return Err(Error::Parse(format!(
                "header declares {count} values, found {}",
                values.len()
            )));
        }
    }
    Ok((values, provenance))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `count - 1`); zero for a single value.
pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Nearest-rank quantile of an ascending sample: the `ceil(p·count)`-th smallest value.
pub(crate) fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub threshold: f64,
    /// `statistic < threshold`.
    pub pass: bool,
}

/// Sup-distance between the empirical CDFs of two ascending samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample KS comparison against a caller-chosen threshold.
pub fn ks_two_sample(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    threshold: f64,
) -> KsOutcome {
    let statistic = ks_statistic(&a.values, &b.values);
    KsOutcome {
        statistic,
        threshold,
        pass: statistic < threshold,
    }
}

/// `Σ (z_{i+1} - z_i)²` over a grid path.
pub fn quadratic_variation(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum()
}

/// A path sampled on a nondecreasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::GridMismatch(times.len(), values.len()));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty path".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "grid times must be nondecreasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Values on the uniform grid `j / (len - 1)` of `[0, 1]`.
    pub fn uniform(values: Vec<f64>) -> Self {
        let last = values.len().saturating_sub(1).max(1) as f64;
        let times = (0..values.len()).map(|j| j as f64 / last).collect();
        Self { times, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Randomised piecewise-constant approximation of a grid path.
#[derive(Debug, Clone, PartialEq)]
pub struct StepApproximation {
    pub eps: f64,
    /// Grid indices of `τ_0 = 0 < τ_1 < ...`.
    pub jump_indices: Vec<usize>,
    pub jump_times: Vec<f64>,
    /// `z(τ_j)`.
    pub values: Vec<f64>,
    /// `U_1, U_2, ...`; the last one is the threshold that was never reached.
    pub draws: Vec<f64>,
    len: usize,
}

impl StepApproximation {
    /// The approximation evaluated at every grid point of the source path.
    pub fn on_grid(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        for (j, &start) in self.jump_indices.iter().enumerate() {
            let end = self.jump_indices.get(j + 1).copied().unwrap_or(self.len);
            out.extend(std::iter::repeat_n(self.values[j], end - start));
        }
        out
    }

    pub fn jumps(&self) -> usize {
        self.jump_indices.len() - 1
    }
}

/// `χ_ε` with thresholds `ε U_j`, `U_j ~ Unif[1/2, 1]` drawn from `seed`.
pub fn chi_epsilon(path: &GridPath, eps: f64, seed: u64) -> Result<StepApproximation> {
    let mut rng = rng::stream(seed, &[tag::CHI]);
    chi_epsilon_with(path, eps, || rng.random_range(0.5..=1.0))
}

/// `χ_ε` with caller-supplied draws `U_j`, which must lie in `[1/2, 1]`.
///
/// `τ_{j+1}` is the first grid point after `τ_j` where `z`, or its left
/// limit, is at least `ε U_{j+1}` away from `z(τ_j)`.
pub fn chi_epsilon_with(
    path: &GridPath,
    eps: f64,
    mut draw: impl FnMut() -> f64,
) -> Result<StepApproximation> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let z = &path.values;
    let mut next_draw = || -> Result<f64> {
        let u = draw();
        if !(0.5..=1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!(
                "U must lie in [1/2, 1], got {u}"
            )));
        }
        Ok(u)
    };
    let mut approx = StepApproximation {
        eps,
        jump_indices: vec![0],
        jump_times: vec![path.times[0]],
        values: vec![z[0]],
        draws: Vec::new(),
        len: z.len(),
    };
    let mut anchor = z[0];
    let mut u = next_draw()?;
    approx.draws.push(u);
    for i in 1..z.len() {
        // rounding slack so exactly representable thresholds are hit on time
        let threshold = eps * u * (1.0 - 1e-12);
        let dev = (z[i] - anchor).abs().max((z[i - 1] - anchor).abs());
        if dev >= threshold {
            anchor = z[i];
            approx.jump_indices.push(i);
            approx.jump_times.push(path.times[i]);
            approx.values.push(anchor);
            u = next_draw()?;
            approx.draws.push(u);
        }
    }
    Ok(approx)
}

/// Left-point step-function integral `F_ε(z1, z2)(t_j) = Σ_{i<j} χ_ε(z1)(t_i) (z2(t_{i+1}) - z2(t_i))`.
pub fn approx_stochastic_integral(
    z1: &GridPath,
    z2: &GridPath,
    eps: f64,
    seed: u64,
) -> Result<GridPath> {
    if z1.len() != z2.len() {
        return Err(Error::GridMismatch(z1.len(), z2.len()));
    }
    let chi = chi_epsilon(z1, eps, seed)?.on_grid();
    Ok(GridPath {
        times: z2.times.clone(),
        values: step_integral(&chi, &z2.values),
    })
}

/// `Σ_{i<j} a_i (b_{i+1} - b_i)` for every `j`.
pub fn step_integral(integrand: &[f64], integrator: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(integrator.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 0..integrator.len().saturating_sub(1) {
        acc += integrand[i] * (integrator[i + 1] - integrator[i]);
        out.push(acc);
    }
    out
}

/// `Y_k ∘ R_k⁻¹` on a uniform grid of `[0, R_k(1)]` with as many steps as the
/// source path, using the generalised inverse `R_k⁻¹(s) = min{t_j : R_k(t_j) ≥ s}`.
pub fn time_change_extract(limit: &LimitPath, k: usize) -> Result<GridPath> {
    if limit.solver != LimitSolver::SdeEm {
        return Err(Error::WrongMode {
            op: "time_change_extract",
            mode: "RANDOM_ODE path".into(),
        });
    }
    if k >= limit.arms() {
        return Err(Error::InvalidArgument(format!("arm {k} out of range")));
    }
    let r = &limit.occupation[k];
    let y = &limit.noise[k];
    if let Some(index) = r.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NotIncreasing {
            arm: k,
            index: index + 1,
        });
    }
    let steps = r.len() - 1;
    let end = r[steps];
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let s = if i == steps {
            end
        } else {
            end * i as f64 / steps as f64
        };
        let j = r.partition_point(|&x| x < s);
        times.push(s);
        values.push(y[j]);
    }
    Ok(GridPath { times, values })
}
