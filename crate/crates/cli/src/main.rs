//! `evpt`: run powertrain scenarios, sweep component physics, fit and check
//! table surrogates, and run scenario batches.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use evpt_core::harness::assemble::run_report;
use evpt_core::harness::batch::expand_glob;
use evpt_core::harness::{fit_dataset, load_config, run_batch, run_scenario, run_sweep, GridSpec, HarnessError, Plants, SweepComponent};
use evpt_core::surrogate::{load_model, save_model, summarize, validate, Dataset, OutputMetrics};

/// Exit status when some configs in a batch failed and others succeeded.
const PARTIAL_BATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "evpt", version, about = "Co-simulation of EV powertrains with swappable table surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace and energy report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV, one row per step. Omit to skip the trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Energy report JSON. Printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a component's physics core over a grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// battery, inverter, motor or thermal.
        #[arg(long)]
        component: SweepComponent,
        /// Grid TOML file, or inline `name=start:stop:count,...`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Fit a table surrogate from a sweep dataset.
    FitTable {
        #[arg(long)]
        data: PathBuf,
        /// Grid TOML file, or inline `name=start:stop:count,...`. Axis
        /// columns become inputs and every other column an output.
        #[arg(long)]
        axes: String,
        #[arg(long)]
        out: PathBuf,
        /// Dataset used to record validation metrics in the model.
        #[arg(long)]
        holdout: Option<PathBuf>,
    },
    /// Print per-output error metrics of a model on a holdout dataset.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        holdout: PathBuf,
    },
    /// Run every matching scenario config and write a summary CSV.
    Batch {
        /// Glob pattern, e.g. `scenarios/*.toml`.
        #[arg(long)]
        configs: String,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn read_dataset(path: &Path) -> Result<Dataset, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    Dataset::read_csv(f).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// RFC 3339 timestamp, honouring SOURCE_DATE_EPOCH for reproducible output.
fn created_stamp() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(|s| UNIX_EPOCH + Duration::from_secs(s))
        .unwrap_or_else(SystemTime::now);
    humantime::format_rfc3339_seconds(t).to_string()
}

fn resolve_jobs(jobs: usize) -> usize {
    if jobs > 0 {
        jobs
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

fn metrics_json(metrics: &[OutputMetrics]) -> String {
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "outputs": metrics })).expect("metrics serialize");
    s.push('\n');
    s
}

fn run(cmd: Command) -> Result<u8, HarnessError> {
    match cmd {
        Command::Simulate { config, trace, report } => {
            let cfg = load_config(&config)?;
            let rep = match &trace {
                Some(path) => {
                    let run = run_scenario(&cfg)?;
                    let mut w = create(path)?;
                    run.trace.write_csv(&mut w).map_err(|e| io_err(path, e))?;
                    w.flush().map_err(|e| io_err(path, e))?;
                    run.report
                }
                None => run_report(&cfg)?,
            };
            match report {
                Some(path) => std::fs::write(&path, rep.to_json()).map_err(|e| io_err(&path, e))?,
                None => print!("{}", rep.to_json()),
            }
            Ok(0)
        }
        Command::Sweep { config, component, grid, out, jobs } => {
            let cfg = load_config(&config)?;
            let plants = Plants::from_config(&cfg)?;
            let grid = GridSpec::from_arg(&grid)?;
            let data = run_sweep(&plants, component, &grid, resolve_jobs(jobs))?;
            data.write_csv(create(&out)?).map_err(|e| io_err(&out, e))?;
            Ok(0)
        }
        Command::FitTable { data, axes, out, holdout } => {
            let dataset = read_dataset(&data)?;
            let grid = GridSpec::from_arg(&axes)?;
            let source = data.file_name().map_or_else(|| data.display().to_string(), |n| n.to_string_lossy().into_owned());
            let mut model = fit_dataset(&dataset, &grid, &source, &created_stamp())?;
            if let Some(h) = holdout {
                let samples = read_dataset(&h)?.samples_for(&model)?;
                let metrics = validate(&model, &samples)?;
                model.metadata.validation = Some(summarize(&metrics));
                eprint!("{}", metrics_json(&metrics));
            }
            save_model(&model, &out).map_err(|e| io_err(&out, e))?;
            Ok(0)
        }
        Command::Validate { model, holdout } => {
            let model = load_model(&model)?;
            let samples = read_dataset(&holdout)?.samples_for(&model)?;
            print!("{}", metrics_json(&validate(&model, &samples)?));
            Ok(0)
        }
        Command::Batch { configs, jobs, out } => {
            let paths = expand_glob(&configs)?;
            let summary = run_batch(&paths, resolve_jobs(jobs))?;
            summary.write_csv(create(&out)?)?;
            for row in &summary.rows {
                if let Err(e) = &row.result {
                    eprintln!("{}: {e}", row.config);
                }
            }
            Ok(if summary.failures() > 0 { PARTIAL_BATCH } else { 0 })
        }
    }
}
