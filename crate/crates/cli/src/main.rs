//! `corpusforge` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on runtime or I/O failure, 2 when the
//! configuration (or the command line) is invalid.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "corpusforge",
    version,
    about = "Corpus preprocessing and FSDP planning"
)]
struct Cli {
    /// Print machine-readable JSON instead of the summary line.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the config-driven commands.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// YAML configuration document.
    #[arg(short, long)]
    config: PathBuf,
    /// Node to build; defaults to the only node of the command's interface.
    #[arg(long)]
    root: Option<String>,
    /// Override `node.config.param=value`; may be repeated.
    #[arg(long = "set", value_name = "ASSIGNMENT")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a configuration document and report diagnostics.
    Resolve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also run every factory in the root's closure.
        #[arg(long)]
        instantiate: bool,
    },
    /// Build the `.didx` document index of a JSONL corpus.
    Index { raw_path: PathBuf },
    /// Tokenize a corpus into a packed file.
    Tokenize {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a seeded document permutation next to a packed file.
    Shuffle {
        packed: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Defaults to `<packed>.perm`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a packed file into `k` chunks following a permutation.
    Chunk {
        packed: PathBuf,
        #[arg(long)]
        perm: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the token ids of fixed-length sample `s`.
    Sample {
        packed: PathBuf,
        s: u64,
        seq_len: u64,
    },
    /// Print the FSDP message-size table as CSV.
    Plan {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a pipeline throughput sweep and print CSV.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CORPUSFORGE_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match commands::run(cli.command, cli.json) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report(cli.json);
            ExitCode::from(e.exit_code())
        }
    }
}
