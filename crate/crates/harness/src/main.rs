use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bergman_harness::battery::{run_battery, SizeBounds};
use bergman_harness::{emit_report, run_scenarios, Format, RunReport, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bergman-lab", version, about = "Run weighted Bergman kernel checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Multiplier applied to every tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the seeded random battery.
    Battery {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SizeBounds::default().max_nodes)]
        max_nodes: usize,
        #[arg(long, default_value_t = SizeBounds::default().max_dim)]
        max_dim: usize,
    },
}

fn execute(cli: Cli) -> anyhow::Result<RunReport> {
    let c = &cli.common;
    anyhow::ensure!(c.tol_scale > 0.0, "--tol-scale must be positive");
    match cli.command {
        Command::Run { files } => {
            let configs = files
                .iter()
                .map(|f| ScenarioConfig::load(f))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(run_scenarios(&configs, c.tol_scale, c.workers)?)
        }
        Command::Battery {
            n,
            seed,
            max_nodes,
            max_dim,
        } => {
            let bounds = SizeBounds {
                max_nodes,
                max_dim,
                ..SizeBounds::default()
            };
            anyhow::ensure!(bounds.min_nodes <= max_nodes, "--max-nodes must be at least {}", bounds.min_nodes);
            Ok(run_battery(n, seed, bounds, c.tol_scale, c.workers)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (out, format) = (cli.common.out.clone(), cli.common.format);
    let result = execute(cli).and_then(|report| {
        emit_report(&report, format, &out).with_context(|| format!("writing {}", out.display()))?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            let failed = report.n_failed();
            println!(
                "{} checks, {} failed; reports in {}",
                report.checks.len(),
                failed,
                out.display()
            );
            if let Some(f) = report.first_failure() {
                eprintln!(
                    "first failure: {} / {}: {}",
                    f.scenario_id,
                    f.check.name(),
                    f.failure.as_deref().unwrap_or("")
                );
            }
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
