//! `gridrisk` command-line runner.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridrisk::risk::LossConfig;
use gridrisk::scenarios::occluded_intersection;
use gridrisk::sim::{Cooperation, RunOptions, RunOutput, Scenario, Simulation, DEFAULT_SEED};
use gridrisk::FilterConfig;
use serde::Deserialize;
use thiserror::Error;

use gridrisk_cli::{CompareRow, RunRecord};

const THREADS_VAR: &str = "GRIDRISK_THREADS";

#[derive(Debug, Error)]
enum CliError {
    /// Bad input: flags, files or parameters. Exit status 2.
    #[error("{0}")]
    Config(String),
    /// Failure while running or writing results. Exit status 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "gridrisk", version, about = "Dynamic occupancy grid risk evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write risk.csv, run.json and map snapshots.
    Run(RunArgs),
    /// Run ego-only and cooperative modes with the same seed and write compare.csv.
    Compare(CommonArgs),
    /// Print the JSON Schema of the scenario file format.
    DumpScenarioSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    #[value(name = "ego", alias = "ego-only")]
    Ego,
    #[value(name = "coop", alias = "cooperative")]
    Coop,
}

impl From<Mode> for Cooperation {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ego => Cooperation::EgoOnly,
            Mode::Coop => Cooperation::Cooperative,
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario JSON file. Defaults to the bundled occluded intersection.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the grid cell size (m).
    #[arg(long)]
    cell_size: Option<f64>,
    /// Override the epoch duration (s).
    #[arg(long)]
    tau: Option<f64>,
    /// JSON file with optional `filter` and `loss` sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "coop")]
    mode: Mode,
    /// Comma-separated epochs at which to write map_<epoch>.csv.
    #[arg(long, value_delimiter = ',')]
    snapshot_epochs: Vec<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    #[serde(default)]
    filter: FilterConfig,
    #[serde(default)]
    loss: LossConfig,
}

/// Everything a run needs, resolved from flags and files.
struct Setup {
    scenario: Scenario,
    scenario_source: String,
    filter: FilterConfig,
    loss: LossConfig,
    seed: u64,
    out: PathBuf,
}

fn read_file(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {what} `{}`: {e}", path.display())))
}

fn setup(args: &CommonArgs) -> Result<Setup> {
    let (mut scenario, scenario_source) = match &args.scenario {
        Some(path) => {
            let text = read_file(path, "scenario file")?;
            let s = Scenario::from_json(&text).map_err(|e| config(format!("scenario `{}`: {e}", path.display())))?;
            (s, path.display().to_string())
        }
        None => (occluded_intersection(), "bundled:occluded_intersection".to_string()),
    };
    if let Some(cs) = args.cell_size {
        scenario = scenario
            .with_cell_size(cs)
            .map_err(|e| config(format!("--cell-size: {e}")))?;
    }
    if let Some(tau) = args.tau {
        scenario = scenario.with_tau(tau).map_err(|e| config(format!("--tau: {e}")))?;
    }
    let overrides = match &args.config {
        Some(path) => {
            let text = read_file(path, "config file")?;
            serde_json::from_str::<Overrides>(&text).map_err(|e| config(format!("config `{}`: {e}", path.display())))?
        }
        None => Overrides::default(),
    };
    overrides.filter.validate().map_err(config)?;
    overrides.loss.validate().map_err(config)?;
    Ok(Setup {
        scenario,
        scenario_source,
        filter: overrides.filter,
        loss: overrides.loss,
        seed: args.seed,
        out: args.out.clone(),
    })
}

fn simulate(setup: &Setup, mode: Mode, snapshot_epochs: BTreeSet<u64>) -> Result<RunOutput> {
    let options = RunOptions {
        cooperation: mode.into(),
        seed: setup.seed,
        snapshot_epochs,
        ..RunOptions::default()
    };
    // Construction only validates inputs, so its errors are config errors.
    let sim = Simulation::new(&setup.scenario, setup.filter, setup.loss, options).map_err(config)?;
    sim.run().map_err(runtime)
}

fn run_record(setup: &Setup, mode: Mode, snapshots: &BTreeSet<u64>, out: &RunOutput) -> RunRecord {
    RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: setup.seed,
        mode: mode.into(),
        scenario: setup.scenario_source.clone(),
        grid: setup.scenario.spec,
        duration: setup.scenario.duration,
        epochs: setup.scenario.epochs(),
        filter: FilterConfig {
            seed: setup.seed,
            ..setup.filter
        },
        loss: setup.loss,
        snapshot_epochs: snapshots.iter().copied().collect(),
        accumulation: "per-epoch means and variances summed; epochs treated as independent".to_string(),
        max_weight_discrepancy: out.max_weight_discrepancy,
        peak_particles: out.peak_particles,
        final_epoch: out.profile.last().copied(),
    }
}

fn create_file(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| runtime(format!("cannot create `{}`: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create output directory `{}`: {e}", dir.display())))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let setup = setup(&args.common)?;
    let epochs = setup.scenario.epochs();
    let snapshots: BTreeSet<u64> = args.snapshot_epochs.iter().copied().collect();
    if let Some(bad) = snapshots.iter().find(|&&e| e >= epochs) {
        return Err(config(format!(
            "--snapshot-epochs: epoch {bad} is past the last epoch {}",
            epochs - 1
        )));
    }
    let out = simulate(&setup, args.mode, snapshots.clone())?;
    prepare_out(&setup.out)?;

    out.profile
        .write_csv(create_file(&setup.out, "risk.csv")?)
        .map_err(runtime)?;
    for snap in &out.snapshots {
        snap.cells
            .write_csv(create_file(&setup.out, &format!("map_{}.csv", snap.epoch))?)
            .map_err(runtime)?;
    }
    let record = run_record(&setup, args.mode, &snapshots, &out);
    record.write(create_file(&setup.out, "run.json")?).map_err(runtime)?;

    if let Some(last) = out.profile.last() {
        println!(
            "{} epochs, accumulated risk {:.3} (+2 sigma {:.3})",
            out.profile.len(),
            last.acc_mean,
            last.acc_plus_2sigma
        );
    }
    Ok(())
}

fn cmd_compare(args: &CommonArgs) -> Result<()> {
    let setup = setup(args)?;
    let ego = simulate(&setup, Mode::Ego, BTreeSet::new())?;
    let coop = simulate(&setup, Mode::Coop, BTreeSet::new())?;
    prepare_out(&setup.out)?;
    let rows = CompareRow::pair(&ego.profile, &coop.profile);
    CompareRow::write_csv(&rows, create_file(&setup.out, "compare.csv")?).map_err(runtime)?;

    let (e, c) = match (ego.profile.last(), coop.profile.last()) {
        (Some(e), Some(c)) => (e, c),
        _ => return Err(runtime("scenario produced no epochs")),
    };
    println!("final epoch {} at t = {:.2} s", e.epoch, e.t);
    println!("                   ego-only   cooperative   delta");
    for (name, a, b) in [
        ("accumulated mean", e.acc_mean, c.acc_mean),
        ("accumulated var", e.acc_var, c.acc_var),
        ("mean + 2 sigma", e.acc_plus_2sigma, c.acc_plus_2sigma),
    ] {
        println!("{name:<18} {a:>10.3} {b:>13.3} {:>7.3}", b - a);
    }
    Ok(())
}

fn cmd_schema() -> Result<()> {
    let schema = schemars::schema_for!(Scenario);
    let text = serde_json::to_string_pretty(&schema).map_err(runtime)?;
    println!("{text}");
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config(format!("{THREADS_VAR}: expected a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::DumpScenarioSchema => cmd_schema(),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
