use clap::{Parser, Subcommand};

use conedirac::config::{Experiment, RunConfig};
use conedirac::experiments::{run, RunStatus};

/// Characteristic initial-value experiments for the Dirac equation on
/// light-cones: constraint integration, opened-cone Goursat solves and
/// verification reports.
#[derive(Parser)]
#[command(name = "conedirac", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the constraints on the cone and check the vertex matching
    Constraints(CommonArgs),
    /// Solve the characteristic problem through opened-cone evolution
    Goursat(CommonArgs),
    /// Evolve oracle data between two slices with outer excision
    Cauchy(CommonArgs),
    /// Tabulate spin coefficients and vertex asymptotics
    Spincoeffs(CommonArgs),
    /// Run a resolution ladder for a configured target
    Convergence(CommonArgs),
    /// Verify oracle identities against the configured tolerances
    OracleCheck(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the TOML run configuration
    #[arg(long)]
    config: String,
    /// Output directory (overrides the config and CONEDIRAC_OUT)
    #[arg(long)]
    out: Option<String>,
    /// Deterministic outputs: fixed reduction order, no timings in artifacts
    #[arg(long)]
    repro: bool,
    /// Reserved; runs are deterministic with or without it
    #[arg(long)]
    seed_free: bool,
}

fn main() {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Constraints(a) => (Experiment::Constraints, a),
        Command::Goursat(a) => (Experiment::Goursat, a),
        Command::Cauchy(a) => (Experiment::Cauchy, a),
        Command::Spincoeffs(a) => (Experiment::Spincoeffs, a),
        Command::Convergence(a) => (Experiment::Convergence, a),
        Command::OracleCheck(a) => (Experiment::OracleCheck, a),
    };
    std::process::exit(run_command(experiment, args));
}

fn run_command(experiment: Experiment, args: &CommonArgs) -> i32 {
    let mut cfg = match RunConfig::from_path(&args.config) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return 1;
        }
    };
    cfg.experiment = experiment;
    if args.repro {
        cfg.run.repro = true;
    }
    match run(&cfg, args.out.as_deref()) {
        Ok(output) => {
            println!("{}", output.summary);
            match output.status {
                RunStatus::Pass => 0,
                RunStatus::ToleranceFailure => 2,
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
