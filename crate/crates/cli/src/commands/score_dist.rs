use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::Args;

use twoscope_core::corpus::Scope;
use twoscope_core::multihop::{score_distributions, write_score_csv, LocalIndices};

use crate::config::RunArgs;
use crate::error::{CliError, Result};
use crate::setup::{corpus_for, embedders, index_for};

#[derive(Debug, Args)]
pub struct ScoreDistArgs {
    #[command(flatten)]
    run: RunArgs,
    /// One question per line.
    #[arg(long)]
    questions: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: ScoreDistArgs) -> Result<()> {
    let config = args.run.resolve()?;
    let file = std::fs::File::open(&args.questions).map_err(|e| CliError::data(format!("{}: {e}", args.questions.display())))?;
    let questions: Vec<String> = std::io::BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if questions.is_empty() {
        return Err(CliError::data(format!("{}: no questions", args.questions.display())));
    }
    let mut local = LocalIndices::new();
    let mut corpora = Vec::new();
    for scope in Scope::ALL {
        let corpus = corpus_for(&config, scope)?.ok_or_else(|| CliError::usage(format!("a {scope} corpus is required")))?;
        corpora.push(corpus);
    }
    let (embedder, _) = embedders(&config, corpora.first())?;
    for corpus in &corpora {
        local = local.with_scope(index_for(&config, corpus, &embedder)?, corpus.scope());
    }
    let emit = |w: &mut dyn Write| -> Result<()> {
        for (i, q) in questions.iter().enumerate() {
            let dists = score_distributions(q, &local, config.beam.retriever)?;
            write_score_csv(i, &dists, &mut *w, i == 0)?;
        }
        Ok(())
    };
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            emit(&mut w)?;
            w.flush()?;
        }
        None => emit(&mut std::io::stdout().lock())?,
    }
    Ok(())
}
