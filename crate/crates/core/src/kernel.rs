//! Arm-selection probabilities of Thompson sampling in rescaled coordinates.
//!
//! At a state `(u, v)` (occupation fractions and rescaled noise sums) the
//! sampler draws one rescaled posterior sample per arm and plays the argmax.
//! For a multi-armed bandit those samples are independent normals with
//!
//! ```text
//! mean_k = (v_k + u_k m_k) / (b² + u_k),    var_k = 1 / (b² + u_k),
//! ```
//!
//! where `m_k` is arm `k`'s rescaled true mean. With two arms the play
//! probability is a single normal CDF; with more arms it is the one-dimensional
//! integral `∫ φ_k(x) Π_{j≠k} Φ_j(x) dx`, evaluated by adaptive quadrature.
//! Linear bandits replace the independent posteriors with the ridge posterior
//! `N(S(u)⁻¹ c, S(u)⁻¹)`, `S(u) = b² I + Σ u_k A_k A_kᵀ`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{dot, BanditMode, BanditSpec, KernelPoint, VarianceMode};
use crate::quadrature;
use crate::rng::{self, tag};
use crate::special::normal_cdf;

/// Absolute error target handed to the quadrature routine.
pub const QUADRATURE_TOL: f64 = 1e-11;
/// Posterior draws used by the linear kernel when `K > 2`.
pub const LINEAR_MC_DRAWS: usize = 100_000;
/// Fixed stream for the linear Monte Carlo kernel, so the kernel is a
/// deterministic function of its arguments.
pub const LINEAR_MC_SEED: u64 = 0x6c69_6e65_6172;
/// Half-width of the quadrature window, in posterior standard deviations.
const TAIL_SDS: f64 = 10.0;
const QUADRATURE_PANELS: usize = 16;

/// Independent normal posteriors, one per arm (rescaled by `sqrt(n)`).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl PosteriorSummary {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::InvalidArgument(format!(
                "{} means but {} variances",
                means.len(),
                variances.len()
            )));
        }
        if variances.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(
                "posterior variances must be positive and finite".into(),
            ));
        }
        Ok(Self { means, variances })
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    /// Probability that each arm's draw is the largest.
    pub fn argmax_probabilities(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arms()];
        argmax_into(&self.means, &self.variances, &mut out)?;
        Ok(out)
    }

    /// Same as [`argmax_probabilities`](Self::argmax_probabilities) but always
    /// via quadrature, even for two arms.
    pub fn argmax_quadrature(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arms()];
        argmax_by_quadrature(&self.means, &self.variances, &mut out)?;
        Ok(out)
    }
}

#[inline]
fn two_arm_closed_form(m0: f64, var0: f64, m1: f64, var1: f64) -> [f64; 2] {
    let z = (m1 - m0) / (var0 + var1).sqrt();
    [normal_cdf(-z), normal_cdf(z)]
}

pub(crate) fn argmax_into(means: &[f64], variances: &[f64], out: &mut [f64]) -> Result<()> {
    match means.len() {
        0 => Ok(()),
        1 => {
            out[0] = 1.0;
            Ok(())
        }
        2 => {
            let p = two_arm_closed_form(means[0], variances[0], means[1], variances[1]);
            out.copy_from_slice(&p);
            Ok(())
        }
        _ => argmax_by_quadrature(means, variances, out),
    }
}

fn argmax_by_quadrature(means: &[f64], variances: &[f64], out: &mut [f64]) -> Result<()> {
    let k = means.len();
    let sds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let lo = means
        .iter()
        .zip(&sds)
        .map(|(m, s)| m - TAIL_SDS * s)
        .fold(f64::INFINITY, f64::min);
    let hi = means
        .iter()
        .zip(&sds)
        .map(|(m, s)| m + TAIL_SDS * s)
        .fold(f64::NEG_INFINITY, f64::max);

    let integrand = |x: f64, fx: &mut [f64]| {
        // fx_k = φ_k(x) Π_{j≠k} Φ_j(x), built from prefix/suffix products.
        let mut cdf = [0.0f64; 16];
        let mut cdf_vec;
        let cdf: &mut [f64] = if k <= 16 {
            &mut cdf[..k]
        } else {
            cdf_vec = vec![0.0; k];
            &mut cdf_vec
        };
        for j in 0..k {
            cdf[j] = normal_cdf((x - means[j]) / sds[j]);
        }
        let mut prefix = 1.0;
        for j in 0..k {
            let z = (x - means[j]) / sds[j];
            fx[j] = prefix * (-0.5 * z * z).exp() / (sds[j] * (2.0 * std::f64::consts::PI).sqrt());
            prefix *= cdf[j];
        }
        let mut suffix = 1.0;
        for j in (0..k).rev() {
            fx[j] *= suffix;
            suffix *= cdf[j];
        }
    };
    let r = quadrature::integrate(integrand, lo, hi, k, QUADRATURE_PANELS, QUADRATURE_TOL)?;
    out.copy_from_slice(&r.values);
    Ok(())
}

fn check_arms(
    op: &'static str,
    spec: &BanditSpec,
    point: &KernelPoint,
    two_only: bool,
) -> Result<()> {
    if two_only && spec.arms != 2 {
        return Err(Error::ArmCount {
            op,
            expected: "2".into(),
            actual: spec.arms,
        });
    }
    if !two_only && spec.arms < 2 {
        return Err(Error::ArmCount {
            op,
            expected: "at least 2".into(),
            actual: spec.arms,
        });
    }
    if point.arms() != spec.arms {
        return Err(Error::PointDimension {
            expected: spec.arms,
            actual: point.arms(),
        });
    }
    Ok(())
}

fn require_mode(op: &'static str, spec: &BanditSpec, mode: BanditMode) -> Result<()> {
    if spec.mode != mode {
        return Err(Error::WrongMode {
            op,
            mode: spec.mode.to_string(),
        });
    }
    Ok(())
}

/// Posterior summary of the unit-variance MAB sampler at `(u, v)`.
pub fn mab_posterior(u: &[f64], v: &[f64], spec: &BanditSpec) -> PosteriorSummary {
    let means = spec.rescaled_means();
    let b2 = spec.prior_scale;
    PosteriorSummary {
        means: (0..u.len())
            .map(|k| (v[k] + u[k] * means[k]) / (b2 + u[k]))
            .collect(),
        variances: u.iter().map(|uk| 1.0 / (b2 + uk)).collect(),
    }
}

/// Posterior summary of the limiting variance-aware sampler.
///
/// `v` is the noise normalised by each arm's true standard deviation, so the
/// raw noise sum is `v_k σ_k`. With `assume_unit` the posterior variance keeps
/// the unit-variance form, otherwise it is `σ_k² / (b² + u_k)`.
pub fn sigma_posterior(
    u: &[f64],
    v: &[f64],
    spec: &BanditSpec,
    sigma: &[f64],
    assume_unit: bool,
) -> PosteriorSummary {
    let means = spec.rescaled_means();
    let b2 = spec.prior_scale;
    PosteriorSummary {
        means: (0..u.len())
            .map(|k| (v[k] * sigma[k] + u[k] * means[k]) / (b2 + u[k]))
            .collect(),
        variances: (0..u.len())
            .map(|k| {
                let s2 = if assume_unit {
                    1.0
                } else {
                    sigma[k] * sigma[k]
                };
                s2 / (b2 + u[k])
            })
            .collect(),
    }
}

/// Two-arm MAB kernel `(Γ₁, Γ₂)` in closed form.
pub fn gamma_two_arm(point: &KernelPoint, spec: &BanditSpec) -> Result<[f64; 2]> {
    check_arms("gamma_two_arm", spec, point, true)?;
    require_mode("gamma_two_arm", spec, BanditMode::Mab)?;
    let post = mab_posterior(&point.u, &point.v, spec);
    Ok(two_arm_closed_form(
        post.means[0],
        post.variances[0],
        post.means[1],
        post.variances[1],
    ))
}

/// K-arm MAB kernel by quadrature of the max-of-normals integral.
pub fn gamma_k_arm(point: &KernelPoint, spec: &BanditSpec) -> Result<Vec<f64>> {
    check_arms("gamma_k_arm", spec, point, false)?;
    require_mode("gamma_k_arm", spec, BanditMode::Mab)?;
    mab_posterior(&point.u, &point.v, spec).argmax_quadrature()
}

/// Variance-aware two-arm kernel `Γ^σ`.
///
/// ADAPTIVE uses `σ̂_k² / (b² + u_k)` as posterior variances. MISSPECIFIED_UNIT
/// and KNOWN_UNIT keep unit variances, since the sampler assumes unit noise.
pub fn gamma_sigma(point: &KernelPoint, spec: &BanditSpec, sigma_hat: &[f64]) -> Result<[f64; 2]> {
    check_arms("gamma_sigma", spec, point, true)?;
    require_mode("gamma_sigma", spec, BanditMode::Mab)?;
    if sigma_hat.len() != 2 || sigma_hat.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::NonPositiveSigma(sigma_hat.to_vec()));
    }
    let assume_unit = spec.variance_mode != VarianceMode::Adaptive;
    let post = sigma_posterior(&point.u, &point.v, spec, sigma_hat, assume_unit);
    Ok(two_arm_closed_form(
        post.means[0],
        post.variances[0],
        post.means[1],
        post.variances[1],
    ))
}

/// Ridge-regression posterior `N(mean, S⁻¹)` of the rescaled parameter.
#[derive(Debug, Clone)]
pub struct LinearPosterior {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// Cholesky factor of `S(u)`.
    pub chol: Vec<f64>,
}

/// `S(u) = b² I + Σ_k u_k A_k A_kᵀ` (row-major).
pub fn design_matrix(u: &[f64], spec: &BanditSpec) -> Vec<f64> {
    let d = spec.context_dim();
    let mut s = vec![0.0; d * d];
    design_matrix_into(u, spec, &mut s);
    s
}

fn design_matrix_into(u: &[f64], spec: &BanditSpec, s: &mut [f64]) {
    let d = spec.context_dim();
    s.fill(0.0);
    for i in 0..d {
        s[i * d + i] = spec.prior_scale;
    }
    for (a, &uk) in spec.contexts.iter().zip(u) {
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] += uk * a[i] * a[j];
            }
        }
    }
}

pub fn linear_posterior(u: &[f64], v: &[f64], spec: &BanditSpec) -> LinearPosterior {
    let d = spec.context_dim();
    let mut post = LinearPosterior {
        dim: d,
        mean: vec![0.0; d],
        chol: vec![0.0; d * d],
    };
    let mut s = vec![0.0; d * d];
    linear_posterior_into(u, v, spec, &spec.rescaled_means(), &mut s, &mut post);
    post
}

fn linear_posterior_into(
    u: &[f64],
    v: &[f64],
    spec: &BanditSpec,
    true_means: &[f64],
    s: &mut [f64],
    post: &mut LinearPosterior,
) {
    let d = post.dim;
    design_matrix_into(u, spec, s);
    let spd = linalg::cholesky_into(s, d, &mut post.chol);
    assert!(spd, "S(u) has eigenvalues >= b² > 0");
    post.mean.fill(0.0);
    for (k, a) in spec.contexts.iter().enumerate() {
        let w = v[k] + u[k] * true_means[k];
        for i in 0..d {
            post.mean[i] += a[i] * w;
        }
    }
    linalg::cholesky_solve(&post.chol, d, &mut post.mean);
}

fn check_distinct_contexts(spec: &BanditSpec) -> Result<()> {
    for i in 0..spec.arms {
        for j in i + 1..spec.arms {
            if spec.contexts[i] == spec.contexts[j] {
                return Err(Error::DegenerateContexts(i, j));
            }
        }
    }
    Ok(())
}

fn lambda_two_arm(post: &LinearPosterior, spec: &BanditSpec) -> [f64; 2] {
    let d = post.dim;
    let diff: Vec<f64> = (0..d)
        .map(|i| spec.contexts[1][i] - spec.contexts[0][i])
        .collect();
    let mut w = vec![0.0; d];
    lambda_two_arm_with(post, &diff, &mut w)
}

/// `diff = A_2 - A_1`; `w` is scratch of length `d`.
fn lambda_two_arm_with(post: &LinearPosterior, diff: &[f64], w: &mut [f64]) -> [f64; 2] {
    w.copy_from_slice(diff);
    linalg::cholesky_solve(&post.chol, post.dim, w);
    let z = dot(diff, &post.mean) / dot(diff, w).sqrt();
    [normal_cdf(-z), normal_cdf(z)]
}

fn lambda_monte_carlo(
    post: &LinearPosterior,
    spec: &BanditSpec,
    draws: usize,
    seed: u64,
    out: &mut [f64],
) {
    let d = post.dim;
    let mut rng = rng::stream(seed, &[tag::LINEAR_MC]);
    let mut counts = vec![0u64; spec.arms];
    let mut z = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let pairs = draws.div_ceil(2);
    for _ in 0..pairs {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        // L⁻ᵀ z has covariance S⁻¹.
        linalg::backward_solve_transpose(&post.chol, d, &mut z);
        for sign in [1.0, -1.0] {
            for i in 0..d {
                theta[i] = post.mean[i] + sign * z[i];
            }
            counts[argmax_context(&spec.contexts, &theta)] += 1;
        }
    }
    let total = (2 * pairs) as f64;
    for (o, c) in out.iter_mut().zip(&counts) {
        *o = *c as f64 / total;
    }
}

fn argmax_context(contexts: &[Vec<f64>], theta: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, a) in contexts.iter().enumerate() {
        let val = dot(a, theta);
        if val > best_val {
            best = k;
            best_val = val;
        }
    }
    best
}

/// Linear-bandit kernel `Λ`: closed form for two arms, Monte Carlo over the
/// ridge posterior (with [`LINEAR_MC_DRAWS`] antithetic draws) otherwise.
pub fn lambda_linear(point: &KernelPoint, spec: &BanditSpec) -> Result<Vec<f64>> {
    lambda_linear_with(point, spec, LINEAR_MC_DRAWS, LINEAR_MC_SEED)
}

/// [`lambda_linear`] with an explicit Monte Carlo budget for `K > 2`.
pub fn lambda_linear_with(
    point: &KernelPoint,
    spec: &BanditSpec,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_arms("lambda_linear", spec, point, false)?;
    require_mode("lambda_linear", spec, BanditMode::Linear)?;
    check_distinct_contexts(spec)?;
    let post = linear_posterior(&point.u, &point.v, spec);
    if spec.arms == 2 {
        Ok(lambda_two_arm(&post, spec).to_vec())
    } else {
        let mut out = vec![0.0; spec.arms];
        lambda_monte_carlo(&post, spec, draws, seed, &mut out);
        Ok(out)
    }
}

/// Which probability function drives a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Unit-variance MAB kernel `Γ`.
    Gamma,
    /// Linear-bandit kernel `Λ`.
    Lambda,
    /// Limiting variance-aware kernel `Γ^σ` with the spec's `arm_sd`.
    GammaSigma { assume_unit: bool },
}

/// Reusable kernel evaluator for the simulation inner loops.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: BanditSpec,
    kind: KernelKind,
    true_means: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    sigma: Vec<f64>,
    mc_draws: usize,
    linear: Option<LinearScratch>,
}

#[derive(Debug, Clone)]
struct LinearScratch {
    s: Vec<f64>,
    post: LinearPosterior,
    diff: Vec<f64>,
    w: Vec<f64>,
}

impl Kernel {
    pub fn new(spec: &BanditSpec, kind: KernelKind) -> Result<Self> {
        match kind {
            KernelKind::Lambda => {
                require_mode("Λ kernel", spec, BanditMode::Linear)?;
                check_distinct_contexts(spec)?;
            }
            _ => require_mode("Γ kernel", spec, BanditMode::Mab)?,
        }
        Ok(Self {
            spec: spec.clone(),
            kind,
            true_means: spec.rescaled_means(),
            means: vec![0.0; spec.arms],
            variances: vec![0.0; spec.arms],
            sigma: spec.sds(),
            mc_draws: LINEAR_MC_DRAWS,
            linear: (kind == KernelKind::Lambda).then(|| {
                let d = spec.context_dim();
                LinearScratch {
                    s: vec![0.0; d * d],
                    post: LinearPosterior {
                        dim: d,
                        mean: vec![0.0; d],
                        chol: vec![0.0; d * d],
                    },
                    diff: match spec.contexts.as_slice() {
                        [a0, a1, ..] => (0..d).map(|i| a1[i] - a0[i]).collect(),
                        _ => vec![0.0; d],
                    },
                    w: vec![0.0; d],
                }
            }),
        })
    }

    /// `Γ` for MAB specs, `Λ` for linear ones.
    pub fn for_spec(spec: &BanditSpec) -> Result<Self> {
        let kind = match spec.mode {
            BanditMode::Mab => KernelKind::Gamma,
            BanditMode::Linear => KernelKind::Lambda,
        };
        Self::new(spec, kind)
    }

    /// `Γ^σ` matching the spec's variance mode.
    pub fn sigma_for_spec(spec: &BanditSpec) -> Result<Self> {
        let assume_unit = spec.variance_mode != VarianceMode::Adaptive;
        Self::new(spec, KernelKind::GammaSigma { assume_unit })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn arms(&self) -> usize {
        self.spec.arms
    }

    /// Writes the play probabilities at `(u, v)` into `out`.
    pub fn eval(&mut self, u: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let b2 = self.spec.prior_scale;
        match self.kind {
            KernelKind::Gamma | KernelKind::GammaSigma { .. } => {
                for k in 0..u.len() {
                    let (scale, s2) = match self.kind {
                        KernelKind::GammaSigma { assume_unit } => {
                            let s = self.sigma[k];
                            (s, if assume_unit { 1.0 } else { s * s })
                        }
                        _ => (1.0, 1.0),
                    };
                    self.means[k] = (v[k] * scale + u[k] * self.true_means[k]) / (b2 + u[k]);
                    self.variances[k] = s2 / (b2 + u[k]);
                }
                argmax_into(&self.means, &self.variances, out)
            }
            KernelKind::Lambda => {
                let lin = self.linear.as_mut().expect("allocated for Λ");
                linear_posterior_into(
                    u,
                    v,
                    &self.spec,
                    &self.true_means,
                    &mut lin.s,
                    &mut lin.post,
                );
                if self.spec.arms == 2 {
                    out.copy_from_slice(&lambda_two_arm_with(&lin.post, &lin.diff, &mut lin.w));
                } else {
                    lambda_monte_carlo(&lin.post, &self.spec, self.mc_draws, LINEAR_MC_SEED, out);
                }
                Ok(())
            }
        }
    }
}

/// Monte Carlo estimate of the play probabilities with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub draws: usize,
    pub counts: Vec<u64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Estimates the kernel at `point` by sampling the posterior comparison
/// directly: one draw per arm (MAB) or one parameter draw (linear), then the
/// argmax is counted. Variance-aware specs sample with the spec's `arm_sd`.
pub fn mc_oracle(
    point: &KernelPoint,
    spec: &BanditSpec,
    draws: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    if draws < 1000 {
        return Err(Error::InvalidArgument(format!(
            "mc_oracle needs at least 1000 draws, got {draws}"
        )));
    }
    check_arms("mc_oracle", spec, point, false)?;
    let k = spec.arms;
    let b2 = spec.prior_scale;
    let mut rng = rng::stream(seed, &[tag::ORACLE]);
    let mut counts = vec![0u64; k];

    match spec.mode {
        BanditMode::Mab => {
            // Posterior of arm k after u_k n plays with noise sum sqrt(n) v_k σ_k,
            // in sqrt(n) units.
            let top = spec.gaps.iter().copied().fold(0.0, f64::max);
            let mut loc = vec![0.0; k];
            let mut scale = vec![0.0; k];
            for j in 0..k {
                let mu = top - spec.gaps[j];
                let (noise_scale, var) = match spec.variance_mode {
                    VarianceMode::KnownUnit => (1.0, 1.0),
                    VarianceMode::Adaptive => (spec.sd(j), spec.sd(j).powi(2)),
                    VarianceMode::MisspecifiedUnit => (spec.sd(j), 1.0),
                };
                let precision = b2 + point.u[j];
                loc[j] = (point.v[j] * noise_scale + point.u[j] * mu) / precision;
                scale[j] = (var / precision).sqrt();
            }
            for _ in 0..draws {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for j in 0..k {
                    let x = loc[j] + scale[j] * rng.sample::<f64, _>(StandardNormal);
                    if x > best_val {
                        best = j;
                        best_val = x;
                    }
                }
                counts[best] += 1;
            }
        }
        BanditMode::Linear => {
            check_distinct_contexts(spec)?;
            let d = spec.context_dim();
            let s = design_matrix(&point.u, spec);
            let chol = linalg::cholesky(&s, d).expect("S(u) is positive definite");
            let mut rhs = vec![0.0; d];
            for (j, a) in spec.contexts.iter().enumerate() {
                let w = point.v[j] + point.u[j] * dot(a, &spec.theta0);
                for i in 0..d {
                    rhs[i] += a[i] * w;
                }
            }
            linalg::cholesky_solve(&chol, d, &mut rhs);
            let mut z = vec![0.0; d];
            let mut theta = vec![0.0; d];
            for _ in 0..draws {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                linalg::backward_solve_transpose(&chol, d, &mut z);
                for i in 0..d {
                    theta[i] = rhs[i] + z[i];
                }
                counts[argmax_context(&spec.contexts, &theta)] += 1;
            }
        }
    }

    let n = draws as f64;
    let estimates: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let std_errors = estimates
        .iter()
        .map(|p| (p * (1.0 - p) / n).sqrt())
        .collect();
    Ok(OracleEstimate {
        draws,
        counts,
        estimates,
        std_errors,
    })
}
