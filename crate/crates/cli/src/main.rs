use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinsqueeze_cli::{resolve, run, CliError, Overrides, RunConfig, Task};

#[derive(Parser)]
#[command(name = "spinsqueeze", version, about = "Dissipative spin-squeezing simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state of one configuration.
    Steady(Common),
    /// Time evolution on the configured grid.
    Evolve(Common),
    /// Dissipative gap.
    Gap(Common),
    /// Steady states over the sweep axes.
    Sweep(Common),
    /// Minimize an objective over one or two free axes.
    Optimize(Common),
    /// Oracle-equivalence and invariant checks.
    Validate(Common),
    /// Reproduce a figure's data set.
    Preset {
        #[arg(value_parser = spinsqueeze_cli::presets::PRESETS)]
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, preset, common) = match cli.command {
        Command::Steady(c) => (Task::Steady, None, c),
        Command::Evolve(c) => (Task::Evolve, None, c),
        Command::Gap(c) => (Task::Gap, None, c),
        Command::Sweep(c) => (Task::Sweep, None, c),
        Command::Optimize(c) => (Task::Optimize, None, c),
        Command::Validate(c) => (Task::Validate, None, c),
        Command::Preset { name, common } => (Task::Preset, Some(name), common),
    };
    match go(task, preset, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn go(task: Task, preset: Option<String>, common: Common) -> Result<(), CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None if matches!(task, Task::Preset | Task::Validate) => RunConfig { name: task.name().into(), ..RunConfig::from_toml_str("")? },
        None => return Err(CliError::schema("--config", format!("`{}` needs a configuration file", task.name()))),
    };
    Overrides { task: Some(task), preset, out: common.out, workers: common.workers, seed: common.seed }.apply(&mut config);
    let config = resolve(config)?;
    let written = run(&config)?;
    let mut failed_checks = (0, 0);
    for (t, csv, _) in &written {
        let failed = t.failed();
        eprintln!("{}: {} rows, {} failed -> {}", t.name, t.rows.len(), failed, csv.display());
        failed_checks = (failed_checks.0 + failed, failed_checks.1 + t.rows.len());
    }
    if task == Task::Validate && failed_checks.0 > 0 {
        return Err(CliError::ValidationFailed { failed: failed_checks.0, total: failed_checks.1 });
    }
    Ok(())
}
