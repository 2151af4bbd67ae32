use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use slice_auction_cli::config::{ExperimentConfig, ScenarioTemplate};
use slice_auction_cli::experiment::{run_experiment, sweep_mvno_count, work_estimate};

/// Hierarchical combinatorial auction simulator for virtualized wireless
/// resources.
#[derive(Parser)]
#[command(name = "slice-auction", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured schemes over a seed range and write a CSV table.
    Run(RunArgs),
    /// Sweep the number of MVNOs at fixed totals and report utilization.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; CLI flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario template to start from.
    #[arg(long, value_parser = ["paper", "desk"])]
    template: Option<String>,
    /// Scheme to run (repeat or comma-separate): FS, GS, DPA[:g], GA, MS1, MS2.
    #[arg(long = "scheme", value_delimiter = ',')]
    schemes: Vec<String>,
    /// Number of seeds (seed values are 0..N).
    #[arg(long)]
    seeds: Option<u32>,
    /// Override the template's MVNO count.
    #[arg(long)]
    mvnos: Option<u32>,
    /// Worker threads for seed-level parallelism (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV path; plot data lands next to it with a .plot.csv suffix.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Run even when the per-seed work estimate exceeds the budget.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// MVNO counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    counts: Vec<u32>,
}

fn build_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &args.template {
        config.template = ScenarioTemplate::by_name(name)?;
    }
    if !args.schemes.is_empty() {
        config.schemes = args
            .schemes
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(mvnos) = args.mvnos {
        config.template.mvno_count = mvnos;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    config.force |= args.force;
    Ok(config)
}

fn plot_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "results".into());
    name.push(".plot.csv");
    out.with_file_name(name)
}

fn write_outputs(out: &Path, csv: &str, plot: &str) -> Result<()> {
    fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    let plot_file = plot_path(out);
    fs::write(&plot_file, plot).with_context(|| format!("writing {}", plot_file.display()))?;
    println!("wrote {} and {}", out.display(), plot_path(out).display());
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = build_config(&args.common)?;
            eprintln!(
                "work estimate: {:.3e} table cells per seed (budget {:.0e})",
                work_estimate(&config.template),
                slice_auction_cli::config::WORK_BUDGET
            );
            let table = run_experiment(&config)?;
            write_outputs(&args.common.out, &table.to_csv(), &table.to_plot_csv())
        }
        Command::Sweep(args) => {
            let config = build_config(&args.common)?;
            let table = sweep_mvno_count(&config, &args.counts)?;
            write_outputs(&args.common.out, &table.to_csv(), &table.to_plot_csv())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
