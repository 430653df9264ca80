//! `avatar` — single entrypoint for the portrait-video pipeline:
//! generate, curate, bench validate/score, inspect mask/anchors.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
//! Diagnostics go to stderr; machine outputs go to files (or stdout for
//! the inspect subcommands, which exist to be read).

mod commands;
mod errors;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avatar", version, about = "Audio-driven portrait video pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a portrait video from an image, driving audio, and prompt.
    Generate(commands::generate::GenerateArgs),
    /// Score clip directories and emit a keep/drop manifest.
    Curate(commands::curate::CurateArgs),
    /// Benchmark manifest validation and GSB scoring.
    Bench(commands::bench_cmd::BenchArgs),
    /// Print pipeline internals (attention masks, anchor tables).
    Inspect(commands::inspect::InspectArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate::run(args),
        Command::Curate(args) => commands::curate::run(args),
        Command::Bench(args) => commands::bench_cmd::run(args),
        Command::Inspect(args) => commands::inspect::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
