//! Config-driven runner: `run` executes the tasks in a config file, `sweep`
//! repeats them over a list of parameter values. Reports are JSON (stdout or
//! --out); sweep tables are additionally written as CSV next to the report.
//!
//! Exit codes: 0 all tasks succeeded and expectations held, 1 a task failed
//! at runtime or an expectation was missed, 2 the config did not parse or
//! validate. No other codes.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{build_experiment, check_preconditions, load_config, SweepParam, TaskSpec};
use report::{execute_tasks, Outcome, Report, Tool, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "gaborstab", version, about = "Gabor frame bounds and jitter-stability runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the tasks listed in a config file.
    Run(RunArgs),
    /// Repeat the config's tasks over a list of values for one parameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Seed for randomized pieces (jitter draws without an explicit seed,
    /// power-iteration start vectors).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the grid point count (power of two).
    #[arg(long)]
    grid_points: Option<usize>,
    /// Report path; stdout when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
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
    /// Parameter to sweep: amplitude, a, b, or p.
    #[arg(long)]
    param: String,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run(args) => run_command(args.common, None),
        Cmd::Sweep(args) => {
            let Some(param) = SweepParam::parse(&args.param) else {
                eprintln!(
                    "error: unknown sweep parameter {:?}; expected amplitude, a, b, or p",
                    args.param
                );
                return ExitCode::from(2);
            };
            run_command(args.common, Some((param, args.values)))
        }
    };
    ExitCode::from(code)
}

fn run_command(args: CommonArgs, sweep: Option<(SweepParam, Vec<f64>)>) -> u8 {
    match execute(args, sweep) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn execute(args: CommonArgs, sweep: Option<(SweepParam, Vec<f64>)>) -> Result<u8, String> {
    let started = std::time::Instant::now();
    let mut cfg = load_config(&args.config).map_err(|e| e.to_string())?;

    if let Some(n) = args.grid_points {
        cfg.grid.points = n;
    }
    let seed = args.seed.or(cfg.seed);
    cfg.seed = seed;
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.display().to_string());
    }
    if let Some((param, values)) = sweep {
        // The subcommand wraps the config's task list into one sweep task.
        let inner = std::mem::take(&mut cfg.tasks);
        cfg.tasks = vec![TaskSpec::Sweep { param, values, tasks: inner }];
    }

    config::validate_structure(&cfg).map_err(|e| e.to_string())?;
    let exp = build_experiment(&cfg, &args.config).map_err(|e| e.to_string())?;
    for (i, task) in cfg.tasks.iter().enumerate() {
        check_preconditions(&exp, task).map_err(|e| format!("tasks[{i}]: {e}"))?;
    }

    let mut outcome = Outcome::default();
    let tasks = cfg.tasks.clone();
    let mut results = execute_tasks(&cfg, &exp, &tasks, &args.config, seed, &mut outcome);

    let out_path = cfg.output.path.clone().map(PathBuf::from);
    if let Some(report_path) = &out_path {
        write_sweep_csvs(report_path, &mut results)?;
    }

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: Tool { name: "gaborstab", version: env!("CARGO_PKG_VERSION") },
        seed,
        config: cfg,
        results,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| format!("report serialization: {e}"))?
        + "\n";

    match &out_path {
        Some(path) => {
            std::fs::write(path, &json)
                .map_err(|e| format!("cannot write report {}: {e}", path.display()))?;
            eprintln!("report written to {}", path.display());
        }
        None => print!("{json}"),
    }
    eprintln!("total: {:.1} ms", started.elapsed().as_secs_f64() * 1e3);

    if outcome.task_error || outcome.expectation_failed {
        Ok(1)
    } else {
        Ok(0)
    }
}

/// Writes each sweep task's table as `<report stem>.sweep-<task index>.csv`
/// beside the report and records the path in the result.
fn write_sweep_csvs(
    report_path: &Path,
    results: &mut [report::TaskResult],
) -> Result<(), String> {
    let stem = report_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report")
        .to_string();
    let dir = report_path.parent().unwrap_or(Path::new("."));
    for (i, result) in results.iter_mut().enumerate() {
        if let Some(sweep) = &mut result.sweep {
            let path = dir.join(format!("{stem}.sweep-{i}.csv"));
            std::fs::write(&path, &sweep.csv)
                .map_err(|e| format!("cannot write sweep table {}: {e}", path.display()))?;
            sweep.csv_path = Some(path.display().to_string());
        }
    }
    Ok(())
}
