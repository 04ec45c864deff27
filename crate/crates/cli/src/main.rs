use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use djl_cli::{cmd_align, cmd_evaluate, cmd_fit, cmd_predict, cmd_simulate, Options};

#[derive(Parser)]
#[command(name = "djl", version, about = "Dynamic joint latent-factor model for multiplex networks with nodal attributes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's data directory; must exist.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset, mask it, and write data, ledger and truth files.
    Simulate,
    /// Run the Gibbs sampler and write the posterior archive.
    Fit {
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Score observed, masked and future cells.
    Predict {
        /// Average Bernoulli edge draws instead of probabilities.
        #[arg(long)]
        bernoulli_scores: bool,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compute AUC, MSPE and interval metrics per scenario.
    Evaluate,
    /// Write aligned 2-D latent positions.
    Align {
        /// Grid indices; all when omitted.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<usize>>,
        /// Also write the J x J Gram matrices.
        #[arg(long)]
        gram: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let result = Options::load(&config, cli.seed, cli.out).and_then(|opts| match cli.command {
        Command::Simulate => cmd_simulate(&opts),
        Command::Fit { chains } => cmd_fit(&opts, chains),
        Command::Predict {
            bernoulli_scores,
            threshold,
        } => cmd_predict(&opts, bernoulli_scores, threshold),
        Command::Evaluate => cmd_evaluate(&opts),
        Command::Align { times, gram } => cmd_align(&opts, times, gram),
    });
    match result {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
