use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crnsim_cli::config::{load_config, ExperimentKind, ExperimentSpec};
use crnsim_cli::error::{CliError, Result};
use crnsim_cli::experiment::run_experiment;
use crnsim_cli::output::{csv_path, write_sidecar, CsvSink};
use crnsim_core::waveform::network_presets;

#[derive(Parser)]
#[command(name = "crnsim", version, about = "Blind beamforming and interference cancellation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<kind>.csv` and `<kind>.json` into the output directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `output`, then the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `sweep.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `sweep.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config and print its resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Network parameter presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Print the fully defaulted config of an experiment kind.
    Defaults {
        #[arg(value_parser = parse_kind)]
        experiment: ExperimentKind,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    s.parse()
}

fn simulate(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    episodes: Option<usize>,
    threads: Option<usize>,
) -> Result<()> {
    let mut spec = load_config(config)?;
    if let Some(seed) = seed {
        spec.sweep.seed = seed;
    }
    if let Some(n) = episodes {
        spec.sweep.episodes = Some(n);
    }
    spec.validate()?;
    if threads == Some(0) {
        return Err(CliError::invalid("--threads", "must be at least 1"));
    }
    let dir = out.or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let mut sink = CsvSink::create(&dir, spec.experiment)?;
    pool.install(|| run_experiment(&spec, &mut sink))?;
    let rows = sink.finish()?;
    write_sidecar(&dir, &spec, rows)?;
    eprintln!("{rows} rows -> {}", csv_path(&dir, spec.experiment).display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            episodes,
            threads,
        } => simulate(&config, out, seed, episodes, threads),
        Command::Validate { config } => {
            let spec = load_config(&config)?;
            print!("{}", spec.to_toml()?);
            Ok(())
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            println!("{}", serde_json::to_string_pretty(&network_presets())?);
            Ok(())
        }
        Command::Defaults { experiment } => {
            print!("{}", ExperimentSpec::defaults(experiment).to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
