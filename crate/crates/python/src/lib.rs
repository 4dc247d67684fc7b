//! Python bindings for the `tsdiffusion` core crate.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tsdiffusion::analysis;
use tsdiffusion::discrete;
use tsdiffusion::limit;
use tsdiffusion::{HorizonSpec, KernelPoint, VarianceMode};

fn err(e: tsdiffusion::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(u: Vec<f64>, v: Vec<f64>) -> PyResult<KernelPoint> {
    KernelPoint::new(u, v).map_err(err)
}

/// A bandit instance under diffusion scaling.
#[pyclass(name = "BanditSpec", module = "tsdiffusion_py", from_py_object)]
#[derive(Clone)]
struct PyBanditSpec {
    inner: tsdiffusion::BanditSpec,
}

#[pymethods]
impl PyBanditSpec {
    /// Multi-armed spec with rescaled gaps (one of them zero) and prior scale b².
    #[staticmethod]
    fn mab(gaps: Vec<f64>, prior_scale: f64) -> Self {
        Self {
            inner: tsdiffusion::BanditSpec::mab(gaps, prior_scale),
        }
    }

    #[staticmethod]
    fn linear(contexts: Vec<Vec<f64>>, theta0: Vec<f64>, prior_scale: f64) -> Self {
        Self {
            inner: tsdiffusion::BanditSpec::linear(contexts, theta0, prior_scale),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: tsdiffusion::BanditSpec::from_toml(text).map_err(err)?,
        })
    }

    /// Copy with a variance mode: "ADAPTIVE", "MISSPECIFIED_UNIT" or "KNOWN_UNIT".
    fn with_variance(&self, mode: &str, arm_sd: Vec<f64>, burn_in: f64) -> PyResult<Self> {
        let mode = match mode.to_ascii_uppercase().as_str() {
            "KNOWN_UNIT" => VarianceMode::KnownUnit,
            "ADAPTIVE" => VarianceMode::Adaptive,
            "MISSPECIFIED_UNIT" => VarianceMode::MisspecifiedUnit,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown variance mode {other:?}"
                )))
            }
        };
        Ok(Self {
            inner: self.inner.clone().with_variance(mode, arm_sd, burn_in),
        })
    }

    /// Violation messages for horizon `n` (empty when valid).
    fn validate(&self, n: usize) -> Vec<String> {
        tsdiffusion::validate_spec(&self.inner, &HorizonSpec::new(n))
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[getter]
    fn arms(&self) -> usize {
        self.inner.arms
    }

    #[getter]
    fn spec_hash(&self) -> String {
        self.inner.spec_hash()
    }

    fn __repr__(&self) -> String {
        format!(
            "BanditSpec(arms={}, mode={}, prior_scale={})",
            self.inner.arms, self.inner.mode, self.inner.prior_scale
        )
    }
}

#[pyfunction]
fn gamma_two_arm(spec: &PyBanditSpec, u: Vec<f64>, v: Vec<f64>) -> PyResult<(f64, f64)> {
    let g = tsdiffusion::gamma_two_arm(&point(u, v)?, &spec.inner).map_err(err)?;
    Ok((g[0], g[1]))
}

#[pyfunction]
fn gamma_k_arm(spec: &PyBanditSpec, u: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
    tsdiffusion::gamma_k_arm(&point(u, v)?, &spec.inner).map_err(err)
}

#[pyfunction]
fn gamma_sigma(
    spec: &PyBanditSpec,
    u: Vec<f64>,
    v: Vec<f64>,
    sigma: Vec<f64>,
) -> PyResult<(f64, f64)> {
    let g = tsdiffusion::gamma_sigma(&point(u, v)?, &spec.inner, &sigma).map_err(err)?;
    Ok((g[0], g[1]))
}

#[pyfunction]
fn lambda_linear(spec: &PyBanditSpec, u: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
    tsdiffusion::lambda_linear(&point(u, v)?, &spec.inner).map_err(err)
}

/// Monte Carlo argmax frequencies: `(estimates, std_errors)`.
#[pyfunction]
#[pyo3(signature = (spec, u, v, draws = 1_000_000, seed = 0))]
fn mc_oracle(
    spec: &PyBanditSpec,
    u: Vec<f64>,
    v: Vec<f64>,
    draws: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let est = tsdiffusion::mc_oracle(&point(u, v)?, &spec.inner, draws, seed).map_err(err)?;
    Ok((est.estimates, est.std_errors))
}

type Paths = HashMap<&'static str, Vec<Vec<f64>>>;

/// Finite-n Thompson sampling. `view` is "sde", "ode", or "variance".
/// Returns per-arm grid paths keyed `occupation`, `noise`, `martingale`,
/// and `brownian` (SDE-form runs only).
#[pyfunction]
#[pyo3(signature = (spec, n, seed, view = "sde", batch_size = 1))]
fn simulate(
    spec: &PyBanditSpec,
    n: usize,
    seed: u64,
    view: &str,
    batch_size: usize,
) -> PyResult<Paths> {
    let horizon = HorizonSpec::batched(n, batch_size);
    let b = match view {
        "sde" if batch_size == 1 => discrete::simulate_sde_view(&spec.inner, &horizon, seed),
        "sde" => discrete::simulate_batched(&spec.inner, &horizon, seed),
        "ode" => discrete::simulate_ode_view(&spec.inner, &horizon, seed),
        "variance" => {
            discrete::simulate_variance_adaptive(&spec.inner, &horizon, seed).map(|r| r.0)
        }
        other => return Err(PyValueError::new_err(format!("unknown view {other:?}"))),
    }
    .map_err(err)?;
    let mut out = HashMap::new();
    out.insert("occupation", b.occupation);
    out.insert("noise", b.noise);
    out.insert("martingale", b.martingale);
    if !b.brownian.is_empty() {
        out.insert("brownian", b.brownian);
    }
    Ok(out)
}

/// Rescaled regret `Σ gap_k R_k(1)` of one simulated run.
#[pyfunction]
#[pyo3(signature = (spec, n, seed, batch_size = 1))]
fn rescaled_regret(spec: &PyBanditSpec, n: usize, seed: u64, batch_size: usize) -> PyResult<f64> {
    let b = discrete::simulate_batched(&spec.inner, &HorizonSpec::batched(n, batch_size), seed)
        .map_err(err)?;
    Ok(discrete::rescaled_regret(&b, &spec.inner))
}

fn limit_paths(p: limit::LimitPath) -> Paths {
    let mut out = HashMap::new();
    out.insert("occupation", p.occupation);
    out.insert("noise", p.noise);
    out.insert("brownian", p.brownian.values);
    out
}

/// Euler–Maruyama solution of the limiting SDE on `{0, h, ..., 1}`.
#[pyfunction]
fn solve_sde(spec: &PyBanditSpec, h: f64, seed: u64) -> PyResult<Paths> {
    limit::solve_sde(&spec.inner, h, seed)
        .map(limit_paths)
        .map_err(err)
}

#[pyfunction]
fn solve_random_ode(spec: &PyBanditSpec, h: f64, seed: u64) -> PyResult<Paths> {
    limit::solve_random_ode(&spec.inner, h, seed)
        .map(limit_paths)
        .map_err(err)
}

#[pyfunction]
fn solve_sde_variance_start(spec: &PyBanditSpec, h: f64, seed: u64) -> PyResult<Paths> {
    limit::solve_sde_variance_start(&spec.inner, h, seed)
        .map(limit_paths)
        .map_err(err)
}

/// Two-sample Kolmogorov–Smirnov statistic.
#[pyfunction]
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> PyResult<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(PyValueError::new_err("samples must be nonempty"));
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(analysis::ks_statistic(&a, &b))
}

#[pyfunction]
fn quadratic_variation(values: Vec<f64>) -> f64 {
    analysis::quadratic_variation(&values)
}

#[pymodule]
fn tsdiffusion_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBanditSpec>()?;
    m.add_function(wrap_pyfunction!(gamma_two_arm, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_k_arm, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_linear, m)?)?;
    m.add_function(wrap_pyfunction!(mc_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rescaled_regret, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sde, m)?)?;
    m.add_function(wrap_pyfunction!(solve_random_ode, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sde_variance_start, m)?)?;
    m.add_function(wrap_pyfunction!(ks_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_variation, m)?)?;
    Ok(())
}
