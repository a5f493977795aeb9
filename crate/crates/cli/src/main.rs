use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use tradeaudit_core::harness::{
    aggregate_csv, load_config, plan_experiment, replay, run_experiment, CellFilter, HarnessError, ReportSet,
};

/// Exit status for configuration and data errors.
const EXIT_CONFIG: u8 = 2;
/// Exit status when some cells failed or replay diverged.
const EXIT_PARTIAL: u8 = 1;

#[derive(Parser)]
#[command(name = "tradeaudit", version, about = "Run and audit trading-agent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every agent x mode x window x ticker cell of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Restrict cells, e.g. `agent=oracle,mode=strict`.
        #[arg(long)]
        only: Option<String>,
        /// Print the planned cells without running them.
        #[arg(long)]
        dry_run: bool,
    },
    /// Re-run a finished experiment from its transcripts and compare reports.
    Replay {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the aggregate report of a finished experiment.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn run(config: &Path, only: Option<&str>, dry_run: bool) -> Result<u8, HarnessError> {
    let config = load_config(config)?;
    let filter = match only {
        Some(spec) => CellFilter::parse(spec)?,
        None => CellFilter::all(),
    };
    if dry_run {
        let plan = plan_experiment(&config, &filter)?;
        for cell in &plan.cells {
            println!("{}\t{} days", cell.key.run_id(), cell.window.len());
        }
        println!("{} cells planned", plan.cells.len());
        return Ok(0);
    }
    let outcome = run_experiment(&config, &filter)?;
    for failure in &outcome.report_set.failures {
        eprintln!("cell failed: {}: {}", failure.run_id, failure.error);
    }
    println!(
        "{} cells, {} failed; results in {}",
        outcome.n_cells,
        outcome.n_failed,
        outcome.output_dir.display()
    );
    Ok(if outcome.n_failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn replay_dir(dir: &Path) -> Result<u8, HarnessError> {
    let outcome = replay(dir)?;
    for flag in &outcome.flags {
        println!("{}", serde_json::to_string(flag).unwrap_or_default());
    }
    println!(
        "{} runs replayed; report set {}",
        outcome.report_set.runs.len(),
        if outcome.identical { "identical" } else { "differs" }
    );
    Ok(if outcome.identical && outcome.flags.is_empty() {
        0
    } else {
        EXIT_PARTIAL
    })
}

fn report(dir: &Path, format: Format) -> anyhow::Result<()> {
    let path = dir.join("report_set.json");
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let rs: ReportSet = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    match format {
        Format::Csv => print!("{}", aggregate_csv(&rs.aggregates, false)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&rs)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            only,
            dry_run,
        } => run(&config, only.as_deref(), dry_run),
        Command::Replay { dir } => replay_dir(&dir),
        Command::Report { dir, format } => {
            return match report(&dir, format) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
