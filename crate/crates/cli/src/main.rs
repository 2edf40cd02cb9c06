use clap::{Parser, Subcommand, ValueEnum};
use deep_hgp_cli::{run, Experiment, ExperimentConfig, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "deep-hgp", version, about = "Deep horseshoe GP studies and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Contraction(Args),
    Freeze(Args),
    HorseshoeCheck(Args),
    DivergenceCheck(Args),
    EquivalenceCheck(Args),
    Concentration(Args),
    PriorSample(Args),
    /// Print a starter config for a command.
    Template { command: CommandName },
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config output_dir, then $DEEP_HGP_OUT/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CommandName {
    Contraction,
    Freeze,
    HorseshoeCheck,
    DivergenceCheck,
    EquivalenceCheck,
    Concentration,
    PriorSample,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Template { command } => {
            print!("{}", template(command));
            return ExitCode::SUCCESS;
        }
        Command::Contraction(a) => (Experiment::Contraction, a),
        Command::Freeze(a) => (Experiment::Freeze, a),
        Command::HorseshoeCheck(a) => (Experiment::HorseshoeCheck, a),
        Command::DivergenceCheck(a) => (Experiment::DivergenceCheck, a),
        Command::EquivalenceCheck(a) => (Experiment::EquivalenceCheck, a),
        Command::Concentration(a) => (Experiment::Concentration, a),
        Command::PriorSample(a) => (Experiment::PriorSample, a),
    };
    let result = ExperimentConfig::load(&args.config).and_then(|cfg| {
        let opts = RunOptions { seed: args.seed, out: args.out, threads: Some(args.threads) };
        run(experiment, cfg, &opts)
    });
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("deep-hgp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn template(c: CommandName) -> &'static str {
    match c {
        CommandName::Contraction => include_str!("../configs/contraction.toml"),
        CommandName::Freeze => include_str!("../configs/freeze.toml"),
        CommandName::HorseshoeCheck => include_str!("../configs/horseshoe-check.toml"),
        CommandName::DivergenceCheck => include_str!("../configs/divergence-check.toml"),
        CommandName::EquivalenceCheck => include_str!("../configs/equivalence-check.toml"),
        CommandName::Concentration => include_str!("../configs/concentration.toml"),
        CommandName::PriorSample => include_str!("../configs/prior-sample.toml"),
    }
}
