use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};

use identikit::commands::{
    cmd_bootstrap, cmd_fit, cmd_forward, cmd_profile, cmd_simulate, cmd_sobol, cmd_structural,
    cmd_workflow, Ctx,
};
use identikit::config::RunConfig;
use identikit::CliError;

/// Uncertainty quantification and identifiability toolkit for compartmental
/// epidemic models.
#[derive(Parser)]
#[command(name = "identikit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override every configured seed (derived per component).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit SVG charts next to the CSV outputs.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model at fixed parameters.
    Simulate(RunArgs),
    /// Prior-based forward UQ: bands, moments and QoI pdfs.
    Forward(RunArgs),
    /// Time-resolved Sobol sensitivity indices.
    Sobol(RunArgs),
    /// Maximum-likelihood / MAP fit with Fisher-Gaussian posterior.
    Fit(RunArgs),
    /// Profile likelihood with chi-square identifiability verdicts.
    Profile(RunArgs),
    /// Bootstrap average relative errors over noise levels.
    Bootstrap(RunArgs),
    /// Structural identifiability from the input-output map catalogue.
    Structural(RunArgs),
    /// The full staged workflow: screening, gates, inversion, prediction.
    Workflow(RunArgs),
}

fn init_threads() {
    if let Ok(v) = std::env::var("IDENTIKIT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                // ignore failure: the pool may already exist in tests
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    let (args, run): (&RunArgs, fn(&Ctx) -> Result<(), CliError>) = match cmd {
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Forward(a) => (a, cmd_forward),
        Command::Sobol(a) => (a, cmd_sobol),
        Command::Fit(a) => (a, cmd_fit),
        Command::Profile(a) => (a, cmd_profile),
        Command::Bootstrap(a) => (a, cmd_bootstrap),
        Command::Structural(a) => (a, cmd_structural),
        Command::Workflow(a) => (a, cmd_workflow),
    };
    let cfg = RunConfig::from_path(&args.config)?;
    let ctx = Ctx::new(cfg, args.seed, args.out.clone(), args.plot);
    run(&ctx)
}

fn main() -> ProcessExit {
    init_threads();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ProcessExit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ProcessExit::from(e.exit_code() as u8)
        }
    }
}
