//! `tempologic` — scenario runner for time-domain models of computing
//! fabrics and oscillator-neuron assemblies.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tempologic::error::{Error, Result};
use tempologic::scenario::{
    parse_config, run_scenario, run_sweep, schema_value, sweep_values, RunPaths, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "tempologic",
    version,
    about = "Time-domain scenario simulator: finite interaction speed, bus contention, \
             payload efficiency and oscillator-neuron synchronization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config; writes trace, summary and manifest artifacts
    Run {
        /// Path to the JSON scenario config
        config: PathBuf,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (falls back to $TEMPOLOGIC_OUT, then the
        /// config's output_dir, then ./tempologic-out)
        #[arg(long, env = "TEMPOLOGIC_OUT")]
        out: Option<PathBuf>,
    },
    /// Sweep one declared scalar parameter across a range
    Sweep {
        /// Path to the JSON scenario config
        config: PathBuf,
        /// Parameter to sweep (see the per-scenario sweepable list)
        #[arg(long)]
        param: String,
        /// First value
        #[arg(long)]
        from: f64,
        /// Last value
        #[arg(long)]
        to: f64,
        /// Number of evenly spaced values, endpoints included
        #[arg(long)]
        steps: usize,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (falls back to $TEMPOLOGIC_OUT, then the
        /// config's output_dir, then ./tempologic-out)
        #[arg(long, env = "TEMPOLOGIC_OUT")]
        out: Option<PathBuf>,
    },
    /// Print the JSON config schema
    Schema,
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn resolve_out_dir(flag: Option<PathBuf>, config: &ScenarioConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("tempologic-out"))
}

fn report(paths: &RunPaths) {
    for p in paths.all() {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let config = load_config(&config, seed)?;
            let out_dir = resolve_out_dir(out, &config);
            let paths = run_scenario(&config, &out_dir)?;
            report(&paths);
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
            seed,
            out,
        } => {
            let config = load_config(&config, seed)?;
            let out_dir = resolve_out_dir(out, &config);
            let values = sweep_values(from, to, steps)?;
            let paths = run_sweep(&config, &param, &values, &out_dir)?;
            report(&paths);
        }
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&schema_value()).expect("schema serializes")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
