use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

mod commands;
mod config;
mod error;
mod setup;
mod store;

#[derive(Parser)]
#[command(name = "twoscope", version, about = "Multi-hop retrieval over a public and a private corpus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, chunk and deduplicate a corpus.
    Ingest(commands::ingest::IngestArgs),
    /// Build and persist sparse and dense indices for one corpus.
    BuildIndex(commands::build_index::BuildIndexArgs),
    /// Serve a public corpus to private orchestrators.
    ServePublic(commands::serve::ServeArgs),
    /// Answer one question.
    Query(commands::query::QueryArgs),
    /// Run a benchmark and write reports and risk-coverage curves.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Hop-1 retrieval scores of every passage, per scope.
    ScoreDist(commands::score_dist::ScoreDistArgs),
    /// Write the synthetic two-hop benchmark.
    Synth(commands::synth::SynthArgs),
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest::run(a),
        Command::BuildIndex(a) => commands::build_index::run(a),
        Command::ServePublic(a) => commands::serve::run(a),
        Command::Query(a) => commands::query::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::ScoreDist(a) => commands::score_dist::run(a),
        Command::Synth(a) => commands::synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
