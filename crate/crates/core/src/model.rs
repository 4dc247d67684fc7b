//! Bandit problem instances under diffusion scaling.
//!
//! All mean-related quantities are stored already multiplied by `sqrt(n)`:
//! a gap `Δ_k` means arm `k`'s true mean sits `Δ_k / sqrt(n)` below the best
//! arm, and a linear parameter `θ₀` means the true parameter is `θ₀ / sqrt(n)`.
//! This keeps the horizon `n` a free knob of each experiment. Prior means are
//! always zero and the prior variance is `(b² n)⁻¹` for every arm.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Slack allowed on `Σ_k u_k ≤ 1` for kernel points.
pub const OCCUPATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BanditMode {
    #[default]
    Mab,
    Linear,
}

impl fmt::Display for BanditMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BanditMode::Mab => f.write_str("MAB"),
            BanditMode::Linear => f.write_str("LINEAR"),
        }
    }
}

/// How the sampler treats reward variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VarianceMode {
    /// Posterior assumes unit variance; rewards have unit variance.
    #[default]
    KnownUnit,
    /// Posterior plugs in the running sample variance of each arm.
    Adaptive,
    /// Posterior assumes unit variance while rewards use `arm_sd`.
    MisspecifiedUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSpec {
    pub arms: usize,
    #[serde(default)]
    pub mode: BanditMode,
    /// Rescaled gaps below the best arm (MAB mode).
    #[serde(default)]
    pub gaps: Vec<f64>,
    /// Rescaled parameter vector (LINEAR mode).
    #[serde(default)]
    pub theta0: Vec<f64>,
    /// One context vector per arm (LINEAR mode).
    #[serde(default)]
    pub contexts: Vec<Vec<f64>>,
    /// `b²`; the prior variance of each mean is `1 / (b² n)`.
    pub prior_scale: f64,
    /// Reward standard deviations. Empty means all ones.
    #[serde(default)]
    pub arm_sd: Vec<f64>,
    #[serde(default)]
    pub variance_mode: VarianceMode,
    /// Round-robin phase length `t_eps` as a fraction of the horizon.
    #[serde(default)]
    pub burn_in: Option<f64>,
}

impl BanditSpec {
    /// Multi-armed instance with unit reward variances.
    pub fn mab(gaps: Vec<f64>, prior_scale: f64) -> Self {
        Self {
            arms: gaps.len(),
            mode: BanditMode::Mab,
            gaps,
            theta0: Vec::new(),
            contexts: Vec::new(),
            prior_scale,
            arm_sd: Vec::new(),
            variance_mode: VarianceMode::KnownUnit,
            burn_in: None,
        }
    }

    /// Two-arm instance: arm 0 is best, arm 1 trails by `gap`.
    pub fn two_arm(gap: f64, prior_scale: f64) -> Self {
        Self::mab(vec![0.0, gap], prior_scale)
    }

    pub fn linear(contexts: Vec<Vec<f64>>, theta0: Vec<f64>, prior_scale: f64) -> Self {
        Self {
            arms: contexts.len(),
            mode: BanditMode::Linear,
            gaps: Vec::new(),
            theta0,
            contexts,
            prior_scale,
            arm_sd: Vec::new(),
            variance_mode: VarianceMode::KnownUnit,
            burn_in: None,
        }
    }

    pub fn with_variance(mut self, mode: VarianceMode, arm_sd: Vec<f64>, burn_in: f64) -> Self {
        self.variance_mode = mode;
        self.arm_sd = arm_sd;
        self.burn_in = Some(burn_in);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn context_dim(&self) -> usize {
        self.contexts.first().map_or(0, Vec::len)
    }

    /// Reward standard deviation of arm `k`.
    pub fn sd(&self, k: usize) -> f64 {
        self.arm_sd.get(k).copied().unwrap_or(1.0)
    }

    pub fn sds(&self) -> Vec<f64> {
        (0..self.arms).map(|k| self.sd(k)).collect()
    }

    /// Rescaled true means `sqrt(n) μ_k`.
    ///
    /// MAB: the best arm sits at `max Δ` and arm `k` at `max Δ - Δ_k`, so the
    /// worst arm has mean zero. LINEAR: `θ₀ᵀ A_k`.
    pub fn rescaled_means(&self) -> Vec<f64> {
        match self.mode {
            BanditMode::Mab => {
                let top = self.gaps.iter().copied().fold(0.0, f64::max);
                self.gaps.iter().map(|g| top - g).collect()
            }
            BanditMode::Linear => self.contexts.iter().map(|a| dot(a, &self.theta0)).collect(),
        }
    }

    /// Rescaled per-arm regret rates; zero for every optimal arm.
    pub fn regret_gaps(&self) -> Vec<f64> {
        match self.mode {
            BanditMode::Mab => self.gaps.clone(),
            BanditMode::Linear => {
                let means = self.rescaled_means();
                let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                means.iter().map(|m| best - m).collect()
            }
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonSpec {
    pub n: usize,
    #[serde(default = "one")]
    pub batch_size: usize,
}

fn one() -> usize {
    1
}

impl HorizonSpec {
    pub fn new(n: usize) -> Self {
        Self { n, batch_size: 1 }
    }

    pub fn batched(n: usize, batch_size: usize) -> Self {
        Self { n, batch_size }
    }

    /// Grid time `t_j = j / n`.
    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.time(j)).collect()
    }
}

/// Arguments `(u, v)` of the sampling kernels: occupation fractions and
/// rescaled noise coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPoint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl KernelPoint {
    /// Checks shapes and that every `u_k` lies in `[0, 1]`.
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::InvalidPoint(format!(
                "u has {} coordinates but v has {}",
                u.len(),
                v.len()
            )));
        }
        if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidPoint(format!(
                "occupation {x} outside [0, 1]"
            )));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "noise coordinate {x} is not finite"
            )));
        }
        Ok(Self { u, v })
    }

    pub fn origin(arms: usize) -> Self {
        Self {
            u: vec![0.0; arms],
            v: vec![0.0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.u.len()
    }

    /// Whether the occupations can come from one unit horizon.
    pub fn is_feasible(&self) -> bool {
        self.u.iter().sum::<f64>() <= 1.0 + OCCUPATION_TOLERANCE
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Lists every invariant the spec/horizon pair violates. Empty means valid.
pub fn validate_spec(spec: &BanditSpec, horizon: &HorizonSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = spec.arms;
    if k == 0 {
        out.push(Violation::new("arms", "arm count must be positive"));
    }

    match spec.mode {
        BanditMode::Mab => {
            if spec.gaps.len() != k {
                out.push(Violation::new(
                    "gaps",
                    format!("expected {k} gaps, got {}", spec.gaps.len()),
                ));
            }
            if spec.gaps.iter().any(|g| !g.is_finite() || *g < 0.0) {
                out.push(Violation::new(
                    "gaps",
                    "gaps must be finite and nonnegative",
                ));
            } else if !spec.gaps.is_empty() {
                let min = spec.gaps.iter().copied().fold(f64::INFINITY, f64::min);
                if min != 0.0 {
                    out.push(Violation::new("gaps", "no optimal arm: min gap ≠ 0"));
                }
            }
        }
        BanditMode::Linear => {
            if spec.contexts.len() != k {
                out.push(Violation::new(
                    "contexts",
                    format!("expected {k} context vectors, got {}", spec.contexts.len()),
                ));
            }
            let d = spec.context_dim();
            if spec.contexts.iter().any(|a| a.len() != d) {
                out.push(Violation::new("contexts", "context dimension mismatch"));
            } else if d == 0 {
                out.push(Violation::new(
                    "contexts",
                    "contexts must be nonempty vectors",
                ));
            }
            if spec.contexts.iter().flatten().any(|x| !x.is_finite()) {
                out.push(Violation::new("contexts", "contexts must be finite"));
            }
            if spec.theta0.len() != d {
                out.push(Violation::new(
                    "theta0",
                    format!(
                        "theta0 has dimension {}, contexts have {d}",
                        spec.theta0.len()
                    ),
                ));
            }
            if spec.theta0.iter().any(|x| !x.is_finite()) {
                out.push(Violation::new("theta0", "theta0 must be finite"));
            }
        }
    }

    if !(spec.prior_scale > 0.0 && spec.prior_scale.is_finite()) {
        out.push(Violation::new(
            "prior_scale",
            "prior scale b² must be positive",
        ));
    }
    if !spec.arm_sd.is_empty() && spec.arm_sd.len() != k {
        out.push(Violation::new(
            "arm_sd",
            format!(
                "expected {k} standard deviations, got {}",
                spec.arm_sd.len()
            ),
        ));
    }
    if spec.arm_sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        out.push(Violation::new(
            "arm_sd",
            "standard deviations must be positive",
        ));
    }

    if let Some(t) = spec.burn_in {
        if !(t > 0.0 && t < 1.0) {
            out.push(Violation::new(
                "burn_in",
                "burn-in t_eps must lie in (0, 1)",
            ));
        }
    }
    if spec.variance_mode != VarianceMode::KnownUnit {
        if spec.burn_in.is_none() {
            out.push(Violation::new(
                "burn_in",
                "variance estimation requires a burn-in t_eps",
            ));
        }
        if spec.mode != BanditMode::Mab {
            out.push(Violation::new(
                "variance_mode",
                "variance estimation is only defined for MAB mode",
            ));
        }
    }

    if horizon.n == 0 {
        out.push(Violation::new("n", "horizon n must be positive"));
    }
    if horizon.batch_size == 0 {
        out.push(Violation::new("batch_size", "batch size must be positive"));
    } else if horizon.batch_size > horizon.n {
        out.push(Violation::new(
            "batch_size",
            "batch size exceeds the horizon",
        ));
    }
    out
}

/// Validation without a horizon, for operations that do not use one.
pub fn validate_problem(spec: &BanditSpec) -> Vec<Violation> {
    validate_spec(spec, &HorizonSpec::new(1))
}

pub(crate) fn ensure_valid(spec: &BanditSpec, horizon: &HorizonSpec) -> Result<()> {
    let v = validate_spec(spec, horizon);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(v))
    }
}
