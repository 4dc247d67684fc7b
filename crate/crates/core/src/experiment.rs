//! Replication sweeps over solvers and horizons.
//!
//! A plan expands into cells: one per (discrete solver, n) pair and one per
//! limit solver. Replication `r` of cell `c` uses the seed
//! `derive_seed(master_seed, [c, r])`, so outputs do not depend on worker
//! count or scheduling. Each (cell, functional) pair yields one distribution
//! file; `manifest.json` lists them with per-cell wall-clock times.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    format_sample, mean, nearest_rank, parse_sample, sample_sd, EmpiricalDistribution, Provenance,
};
use crate::discrete::{self, PathBundle};
use crate::error::{Error, Result};
use crate::limit::{self, LimitPath};
use crate::model::{validate_spec, BanditSpec, HorizonSpec, VarianceMode};
use crate::rng::derive_seed;

/// Overrides the plan's output directory when set.
pub const OUTPUT_DIR_ENV: &str = "TSDIFF_OUTPUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HISTOGRAM_BINS: usize = 50;
pub const QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolverChoice {
    SdeView,
    OdeView,
    Batched {
        batch_size: usize,
    },
    SdeEm {
        h: f64,
    },
    RandomOde {
        h: f64,
    },
    /// Variance-estimating sampler with round-robin burn-in up to `burn_in`.
    Variance {
        burn_in: f64,
    },
}

impl SolverChoice {
    pub fn is_limit(&self) -> bool {
        matches!(self, Self::SdeEm { .. } | Self::RandomOde { .. })
    }

    fn slug(&self) -> String {
        match self {
            Self::SdeView => "sde_view".into(),
            Self::OdeView => "ode_view".into(),
            Self::Batched { batch_size } => format!("batched_m{batch_size}"),
            Self::SdeEm { h } => format!("sde_em_h{h}"),
            Self::RandomOde { h } => format!("random_ode_h{h}"),
            Self::Variance { burn_in } => format!("variance_t{burn_in}"),
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SdeView => write!(f, "SDE_VIEW"),
            Self::OdeView => write!(f, "ODE_VIEW"),
            Self::Batched { batch_size } => write!(f, "BATCHED(m={batch_size})"),
            Self::SdeEm { h } => write!(f, "SDE_EM(h={h})"),
            Self::RandomOde { h } => write!(f, "RANDOM_ODE(h={h})"),
            Self::Variance { burn_in } => write!(f, "VARIANCE(t_eps={burn_in})"),
        }
    }
}

/// Scalar summaries of one replication. Arms are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Functional {
    /// `R_arm(time)`.
    Occupation {
        arm: usize,
        #[serde(default = "one")]
        time: f64,
    },
    /// `Σ_k gap_k R_k(1)`.
    Regret,
}

fn one() -> f64 {
    1.0
}

impl Functional {
    fn slug(&self) -> String {
        match self {
            Self::Occupation { arm, time } => format!("occupation_arm{arm}_t{time}"),
            Self::Regret => "regret".into(),
        }
    }

    fn of_bundle(&self, b: &PathBundle, spec: &BanditSpec) -> f64 {
        match *self {
            Self::Occupation { arm, time } => b.occupation_at(arm, time),
            Self::Regret => discrete::rescaled_regret(b, spec),
        }
    }

    fn of_limit(&self, p: &LimitPath, spec: &BanditSpec) -> f64 {
        match *self {
            Self::Occupation { arm, time } => p.occupation_at(arm, time),
            Self::Regret => p.rescaled_regret(spec),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Occupation { arm, time } => write!(f, "R_{arm}({time})"),
            Self::Regret => write!(f, "regret"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub spec: BanditSpec,
    pub horizons: Vec<usize>,
    pub solvers: Vec<SolverChoice>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub functionals: Vec<Functional>,
    pub output_dir: PathBuf,
}

/// One unit of work: a solver at a horizon (`None` for limit solvers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub solver: SolverChoice,
    pub n: Option<usize>,
}

impl Cell {
    pub fn label(&self) -> String {
        match self.n {
            Some(n) => format!("{}/n={n}", self.solver),
            None => self.solver.to_string(),
        }
    }

    fn file_name(&self, functional: &Functional) -> String {
        let n = self.n.map(|n| format!("_n{n}")).unwrap_or_default();
        format!(
            "cell{:03}_{}{}_{}.dist",
            self.index,
            self.solver.slug(),
            n,
            functional.slug()
        )
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// The plan's output directory, or the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &solver in &self.solvers {
            if solver.is_limit() {
                cells.push(Cell {
                    index: cells.len(),
                    solver,
                    n: None,
                });
            } else {
                for &n in &self.horizons {
                    cells.push(Cell {
                        index: cells.len(),
                        solver,
                        n: Some(n),
                    });
                }
            }
        }
        cells
    }

    fn cell_spec(&self, solver: &SolverChoice) -> BanditSpec {
        let mut spec = self.spec.clone();
        if let SolverChoice::Variance { burn_in } = solver {
            spec.burn_in = Some(*burn_in);
        }
        spec
    }

    /// Checks every cell before anything runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return bad("plan lists no solvers".into());
        }
        if self.horizons.is_empty() && self.solvers.iter().any(|s| !s.is_limit()) {
            return bad("discrete solvers need at least one horizon".into());
        }
        for f in &self.functionals {
            if let Functional::Occupation { arm, time } = *f {
                if arm >= self.spec.arms {
                    return bad(format!(
                        "functional {f} refers to arm {arm} of {}",
                        self.spec.arms
                    ));
                }
                if !(0.0..=1.0).contains(&time) {
                    return bad(format!("functional {f} has time outside [0, 1]"));
                }
            }
        }
        for cell in self.cells() {
            let spec = self.cell_spec(&cell.solver);
            let horizon = match (cell.solver, cell.n) {
                (SolverChoice::Batched { batch_size }, Some(n)) => {
                    HorizonSpec::batched(n, batch_size)
                }
                (_, Some(n)) => HorizonSpec::new(n),
                (_, None) => HorizonSpec::new(1),
            };
            let violations = validate_spec(&spec, &horizon);
            if !violations.is_empty() {
                return Err(Error::InvalidSpec(violations));
            }
            let variance = spec.variance_mode != VarianceMode::KnownUnit;
            match cell.solver {
                SolverChoice::Variance { .. } if !variance => {
                    return bad(format!(
                        "{} needs an ADAPTIVE or MISSPECIFIED_UNIT spec",
                        cell.label()
                    ))
                }
                SolverChoice::Variance { .. } => {}
                _ if variance => {
                    return bad(format!("{} needs a KNOWN_UNIT spec", cell.label()));
                }
                SolverChoice::Batched { batch_size } => {
                    let n = horizon.n;
                    if batch_size > 1 && batch_size > n / 10 {
                        return Err(Error::BatchTooLarge {
                            batch_size,
                            limit: n / 10,
                        });
                    }
                }
                SolverChoice::SdeEm { h } | SolverChoice::RandomOde { h }
                    if !(h > 0.0 && h <= limit::MAX_STEP) =>
                {
                    return Err(Error::StepSize {
                        h,
                        max: limit::MAX_STEP,
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn replicate(
    spec: &BanditSpec,
    cell: &Cell,
    functionals: &[Functional],
    seed: u64,
) -> Result<Vec<f64>> {
    let from_bundle = |b: PathBundle| functionals.iter().map(|f| f.of_bundle(&b, spec)).collect();
    let from_limit = |p: LimitPath| functionals.iter().map(|f| f.of_limit(&p, spec)).collect();
    let n = cell.n.unwrap_or(1);
    Ok(match cell.solver {
        SolverChoice::SdeView => from_bundle(discrete::simulate_sde_view(
            spec,
            &HorizonSpec::new(n),
            seed,
        )?),
        SolverChoice::OdeView => from_bundle(discrete::simulate_ode_view(
            spec,
            &HorizonSpec::new(n),
            seed,
        )?),
        SolverChoice::Batched { batch_size } => from_bundle(discrete::simulate_batched(
            spec,
            &HorizonSpec::batched(n, batch_size),
            seed,
        )?),
        SolverChoice::Variance { .. } => {
            from_bundle(discrete::simulate_variance_adaptive(spec, &HorizonSpec::new(n), seed)?.0)
        }
        SolverChoice::SdeEm { h } => from_limit(limit::solve_sde(spec, h, seed)?),
        SolverChoice::RandomOde { h } => from_limit(limit::solve_random_ode(spec, h, seed)?),
    })
}

/// All replications of one cell; row `r` holds the functionals of replication `r`.
pub fn run_cell(plan: &ExperimentPlan, cell: &Cell) -> Result<Vec<Vec<f64>>> {
    let spec = plan.cell_spec(&cell.solver);
    (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(plan.master_seed, &[cell.index as u64, r as u64]);
            replicate(&spec, cell, &plan.functionals, seed)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFile {
    pub functional: String,
    /// Relative to the manifest's output directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub cell: String,
    pub n: Option<usize>,
    pub wall_clock_secs: f64,
    pub files: Vec<DistributionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub index: usize,
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec_hash: String,
    pub master_seed: u64,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub cells: Vec<CellRecord>,
    pub failed: Vec<FailedCell>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut manifest: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        // resolve files next to the manifest even if the directory moved
        if let Some(parent) = path.parent() {
            manifest.output_dir = parent.to_path_buf();
        }
        Ok(manifest)
    }

    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }

    /// Needs at least two replications; see [`Manifest::sample`] otherwise.
    pub fn distribution(&self, file: &DistributionFile) -> Result<EmpiricalDistribution> {
        EmpiricalDistribution::load(self.output_dir.join(&file.file))
    }

    /// The raw ascending sample of one file, of any size.
    pub fn sample(&self, file: &DistributionFile) -> Result<Vec<f64>> {
        let (mut values, _) = parse_sample(&fs::read_to_string(self.output_dir.join(&file.file))?)?;
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

/// Runs every cell and writes distribution files plus the manifest.
///
/// A cell that fails is listed under `failed` and leaves no files behind;
/// the other cells are unaffected.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Manifest> {
    plan.validate()?;
    let dir = plan.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    let spec_hash = plan.spec.spec_hash();
    let mut manifest = Manifest {
        spec_hash: spec_hash.clone(),
        master_seed: plan.master_seed,
        replications: plan.replications,
        output_dir: dir.clone(),
        cells: Vec::new(),
        failed: Vec::new(),
    };
    for cell in plan.cells() {
        let start = Instant::now();
        let outcome =
            run_cell(plan, &cell).and_then(|rows| write_cell(plan, &cell, &rows, &dir, &spec_hash));
        match outcome {
            Ok(files) => manifest.cells.push(CellRecord {
                index: cell.index,
                cell: cell.label(),
                n: cell.n,
                wall_clock_secs: start.elapsed().as_secs_f64(),
                files,
            }),
            Err(e) => manifest.failed.push(FailedCell {
                index: cell.index,
                cell: cell.label(),
                error: e.to_string(),
            }),
        }
    }
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

fn write_cell(
    plan: &ExperimentPlan,
    cell: &Cell,
    rows: &[Vec<f64>],
    dir: &Path,
    spec_hash: &str,
) -> Result<Vec<DistributionFile>> {
    let mut staged = Vec::with_capacity(plan.functionals.len());
    for (i, f) in plan.functionals.iter().enumerate() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        values.sort_by(f64::total_cmp);
        let provenance = Provenance {
            spec_hash: spec_hash.to_string(),
            source: format!("{} {}", cell.label(), f),
            master_seed: plan.master_seed,
        };
        staged.push((
            cell.file_name(f),
            f.to_string(),
            format_sample(&values, &provenance),
        ));
    }
    let mut written: Vec<DistributionFile> = Vec::with_capacity(staged.len());
    for (name, functional, text) in staged {
        if let Err(e) = fs::write(dir.join(&name), text) {
            for done in &written {
                let _ = fs::remove_file(dir.join(&done.file));
            }
            return Err(e.into());
        }
        written.push(DistributionFile {
            functional,
            file: name,
        });
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: String,
    pub functional: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub q01: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub q99: f64,
}

impl SummaryRow {
    /// Summary of an ascending sample; `sd` is zero for a single value.
    pub fn of(cell: &str, functional: &str, sorted: &[f64]) -> Self {
        let q = QUANTILES.map(|p| nearest_rank(sorted, p));
        Self {
            cell: cell.to_string(),
            functional: functional.to_string(),
            count: sorted.len(),
            mean: mean(sorted),
            sd: sample_sd(sorted),
            q01: q[0],
            q05: q[1],
            q25: q[2],
            q50: q[3],
            q75: q[4],
            q95: q[5],
            q99: q[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub cell: String,
    pub functional: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Equal-width bins over the sample range; the last bin is closed.
pub fn histogram(sorted: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let v = sorted;
    let (mut lo, mut hi) = (v[0], v[v.len() - 1]);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in v {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            (
                lo + i as f64 * width,
                if i + 1 == bins {
                    hi
                } else {
                    lo + (i + 1) as f64 * width
                },
                c,
            )
        })
        .collect()
}

pub fn summarize(manifest: &Manifest) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for cell in &manifest.cells {
        for f in &cell.files {
            rows.push(SummaryRow::of(
                &cell.cell,
                &f.functional,
                &manifest.sample(f)?,
            ));
        }
    }
    Ok(rows)
}

/// Writes `summary.{csv,json}` (and `histograms.{csv,json}` with
/// `include_plot_data`) into the manifest's directory; returns the paths.
pub fn emit_results(
    manifest: &Manifest,
    format: Format,
    include_plot_data: bool,
) -> Result<Vec<PathBuf>> {
    let rows = summarize(manifest)?;
    let mut bins = Vec::new();
    if include_plot_data {
        for cell in &manifest.cells {
            for f in &cell.files {
                let d = manifest.sample(f)?;
                bins.extend(
                    histogram(&d, HISTOGRAM_BINS)
                        .into_iter()
                        .map(|(lo, hi, count)| HistogramBin {
                            cell: cell.cell.clone(),
                            functional: f.functional.clone(),
                            bin_lo: lo,
                            bin_hi: hi,
                            count,
                        }),
                );
            }
        }
    }
    let mut out = vec![write_table(manifest, "summary", &rows, format)?];
    if include_plot_data {
        out.push(write_table(manifest, "histograms", &bins, format)?);
    }
    Ok(out)
}

const SUMMARY_HEADER: [&str; 12] = [
    "cell",
    "functional",
    "count",
    "mean",
    "sd",
    "q01",
    "q05",
    "q25",
    "q50",
    "q75",
    "q95",
    "q99",
];
const HISTOGRAM_HEADER: [&str; 5] = ["cell", "functional", "bin_lo", "bin_hi", "count"];

fn write_table<T: Serialize>(
    manifest: &Manifest,
    stem: &str,
    rows: &[T],
    format: Format,
) -> Result<PathBuf> {
    let path = match format {
        Format::Csv => manifest.output_dir.join(format!("{stem}.csv")),
        Format::Json => manifest.output_dir.join(format!("{stem}.json")),
    };
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(&path)?;
            // explicit header so an empty table still has one
            let header: &[&str] = if stem == "summary" {
                &SUMMARY_HEADER
            } else {
                &HISTOGRAM_HEADER
            };
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => fs::write(&path, serde_json::to_string_pretty(rows)?)?,
    }
    Ok(path)
}
