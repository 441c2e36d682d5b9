use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entroflow_cli::{run, ConfigFile, Experiment};

#[derive(Parser)]
#[command(name = "entroflow", version, about = "Entropy and free-energy currents in open quantum conductors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-static level sweep: reservoir changes and entropy versus T.
    Drive(RunArgs),
    /// Bond-resolved persistent currents of a flux-threaded ring.
    Ring(RunArgs),
    /// Floating-probe chains: entropy production versus Joule heating.
    Probes(RunArgs),
    /// Run the invariant suite.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used for anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep points.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Drive(a) => (Experiment::Drive, a),
        Command::Ring(a) => (Experiment::Ring, a),
        Command::Probes(a) => (Experiment::Probes, a),
        Command::Verify(a) => (Experiment::Verify, a),
    };
    let result = match &args.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
    .and_then(|config| run(experiment, &config, &args.out, args.workers));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
