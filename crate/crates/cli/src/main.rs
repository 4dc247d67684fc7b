use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tsdiffusion::analysis::{ks_two_sample, EmpiricalDistribution};
use tsdiffusion::experiment::{emit_results, run_experiment, ExperimentPlan, Format, Manifest};

/// Diffusion-limit experiments for Thompson sampling.
#[derive(Parser)]
#[command(name = "tsdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a TOML experiment plan.
    Run { plan: PathBuf },
    /// Write a summary table (and optional histograms) for a manifest.
    Summarize {
        manifest: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        plot_data: bool,
    },
    /// Two-sample KS comparison of two distribution files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        threshold: f64,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { plan } => {
            let plan = ExperimentPlan::load(&plan)
                .with_context(|| format!("loading plan {}", plan.display()))?;
            let manifest = run_experiment(&plan)?;
            for cell in &manifest.cells {
                println!("ok     {:<32} {:>8.2}s", cell.cell, cell.wall_clock_secs);
            }
            for cell in &manifest.failed {
                println!("failed {:<32} {}", cell.cell, cell.error);
            }
            println!(
                "manifest: {}",
                manifest
                    .output_dir
                    .join(tsdiffusion::experiment::MANIFEST_FILE)
                    .display()
            );
            Ok(if manifest.is_complete() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Summarize {
            manifest,
            format,
            plot_data,
        } => {
            let format: Format = format.parse()?;
            let manifest = Manifest::load(&manifest)
                .with_context(|| format!("loading manifest {}", manifest.display()))?;
            for path in emit_results(&manifest, format, plot_data)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { a, b, threshold } => {
            let da = EmpiricalDistribution::load(&a)
                .with_context(|| format!("reading {}", a.display()))?;
            let db = EmpiricalDistribution::load(&b)
                .with_context(|| format!("reading {}", b.display()))?;
            let out = ks_two_sample(&da, &db, threshold);
            let verdict = if out.pass { "PASS" } else { "FAIL" };
            println!("ks={} threshold={} {verdict}", out.statistic, out.threshold);
            Ok(if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
