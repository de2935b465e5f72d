use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochevm::pipeline::{cmd_analyze, cmd_chart, cmd_simulate, RunConfig, DEFAULT_EV_LEVELS};
use stochevm::project::load_project;
use stochevm::{Error, ErrorKind, Execution};

/// Stochastic earned-value project control.
#[derive(Debug, Parser)]
#[command(name = "stochevm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the project and write one triad CSV per EV level.
    Simulate(SimulateArgs),
    /// Score an observed status (AT, AC, EV) against the simulated runs.
    Analyze(AnalyzeArgs),
    /// Draw the control charts of a saved report.
    Chart(ChartArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long)]
    runs: u64,
    #[arg(long)]
    seed: u64,
    /// Comma-separated fractions of BAC.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EV_LEVELS.to_vec())]
    ev_levels: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    project: PathBuf,
    /// Actual time.
    #[arg(long)]
    at: f64,
    /// Actual cost.
    #[arg(long)]
    ac: f64,
    /// Earned value, in cost units.
    #[arg(long)]
    ev: f64,
    /// Directory written by `simulate`. Without it the runs are simulated here.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Runs to simulate when no data directory is given.
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where report.json and the grids are written.
    #[arg(long, default_value = "analysis")]
    out: PathBuf,
    /// Runs used to train and select the classifiers and regressors.
    #[arg(long)]
    train_rows: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ChartArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn execution(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

/// Prints to stdout, tolerating a reader that has gone away (`| head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(a) => {
            let spec = load_project(&a.project)?;
            let mut config = RunConfig::new(a.project.display().to_string(), a.runs, a.seed, a.ev_levels);
            config.output_dir = Some(a.out.display().to_string());
            let manifest = cmd_simulate(&config, &spec, &a.out, execution(&a.common))?;
            emit(&serde_json::to_string_pretty(&manifest)?);
        }
        Command::Analyze(a) => {
            let spec = load_project(&a.project)?;
            let mut config = RunConfig::new(a.project.display().to_string(), a.runs, a.seed, Vec::new());
            config.output_dir = Some(a.out.display().to_string());
            if let Some(n) = a.train_rows {
                config.selection.train_rows = n;
            }
            let analysis = cmd_analyze(
                &config,
                &spec,
                a.at,
                a.ac,
                a.ev,
                a.data.as_deref(),
                execution(&a.common),
            )?;
            let mut summary = serde_json::to_value(&analysis.report)?;
            if let Some(obj) = summary.as_object_mut() {
                obj.remove("overlays");
            }
            emit(&serde_json::to_string_pretty(&summary)?);
            log::info!("report written to {}", Path::new(&a.out).join("report.json").display());
        }
        Command::Chart(a) => {
            let twin = cmd_chart(&a.report, &a.out)?;
            emit(&serde_json::to_string_pretty(&twin.files)?);
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
