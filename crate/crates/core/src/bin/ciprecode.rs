use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ciprecode::harness::{emit_csv, run_scenario, ScenarioConfig, ScenarioId};
use ciprecode::Error;

/// Worker threads for trial-parallel scenarios; results do not depend on it.
const THREADS_ENV: &str = "CIPRECODE_THREADS";

#[derive(Parser)]
#[command(name = "ciprecode", version, about = "Constructive-interference precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its table as CSV.
    Run {
        #[arg(long)]
        scenario: String,
        /// JSON file overriding scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Offset search grid step in degrees.
        #[arg(long = "phi-grid-step")]
        phi_grid_step: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the available scenario ids.
    ListScenarios,
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_config() || matches!(err, Error::Io { .. }) {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))
}

fn run(
    scenario: &str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<u64>,
    out: &PathBuf,
    phi_grid_step: Option<f64>,
    quiet: bool,
) -> Result<(), Error> {
    let id = ScenarioId::parse(scenario)?;
    let mut cfg = match config {
        Some(path) => ScenarioConfig::from_file(Some(id), &path)?,
        None => ScenarioConfig::defaults(id),
    };
    if cfg.scenario != id {
        return Err(Error::Config(format!(
            "config is for '{}' but --scenario is '{scenario}'",
            cfg.scenario.name()
        )));
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(step) = phi_grid_step {
        cfg.phi_grid_step_deg = step;
    }
    cfg.validate()?;
    configure_threads()?;
    let table = run_scenario(&cfg)?;
    emit_csv(&table, out)?;
    if !quiet {
        eprintln!(
            "{}: {} rows written to {}",
            id.name(),
            table.rows().len(),
            out.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for id in ScenarioId::ALL {
                println!("{:<8} {}", id.name(), id.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            scenario,
            config,
            seed,
            trials,
            out,
            phi_grid_step,
            quiet,
        } => match run(&scenario, config, seed, trials, &out, phi_grid_step, quiet) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    }
}
