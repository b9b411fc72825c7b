//! `hashbridge`: ingest, train, inspect, serve and query hashtag snapshots.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "hashbridge",
    version,
    about = "Category-to-hashtag recommendation",
    arg_required_else_help = true
)]
struct Cli {
    /// More logging (repeat for debug output). `RUST_LOG` overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Posts file, one JSON record per line.
    #[arg(long)]
    posts: PathBuf,
    /// Categories file, one JSON record per line.
    #[arg(long)]
    categories: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Category id (or exact category name).
    #[arg(long, conflicts_with = "keyword", required_unless_present = "keyword")]
    category: Option<String>,
    /// Free-text keyword instead of a category.
    #[arg(long)]
    keyword: Option<String>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    min_posts: Option<u64>,
    #[arg(long)]
    max_posts: Option<u64>,
    /// `global_mean` or `hashtag_users`.
    #[arg(long, default_value = "global_mean")]
    user_context: String,
    /// Print JSON instead of the table / CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse both corpora, build the graph and report counts and rejected records.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        json: bool,
    },
    /// Train every component and write a snapshot.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// TOML file with training parameters; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Print the training report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Dump a snapshot's inverted index as JSON.
    Index {
        #[arg(long)]
        snapshot: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Ranked hashtags as a fixed-width table (same rows as GET /topn).
    Query(RankArgs),
    /// Ranked hashtags as CSV (same bytes as GET /export.csv).
    Export {
        #[command(flatten)]
        rank: RankArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every hand-written gradient.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
