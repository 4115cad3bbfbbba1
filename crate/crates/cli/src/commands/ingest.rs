use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use twoscope_core::corpus::{chunk_corpus, dedup, load_corpus, write_corpus, Scope};

use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    scope: Scope,
    #[arg(long)]
    output: PathBuf,
    /// Chunk passages into windows of this many words (default 150 when
    /// only --stride is given).
    #[arg(long)]
    window: Option<usize>,
    /// Words between window starts (default: half the window).
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    no_dedup: bool,
}

#[derive(Serialize)]
struct Summary {
    input_passages: usize,
    chunks: usize,
    output_passages: usize,
    duplicates_removed: usize,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let chunking = match (args.window, args.stride) {
        (None, None) => None,
        (w, s) => {
            let window = w.unwrap_or(150);
            let stride = s.unwrap_or((window / 2).max(1));
            if window == 0 || stride == 0 || stride > window {
                return Err(CliError::usage(format!(
                    "need 0 < stride <= window, got window={window} stride={stride}"
                )));
            }
            Some((window, stride))
        }
    };
    let corpus = load_corpus(&args.input, args.scope).map_err(|e| CliError::from(e).context(args.input.display()))?;
    let input_passages = corpus.len();
    let chunked = match chunking {
        Some((w, s)) => chunk_corpus(&corpus, w, s)?,
        None => corpus,
    };
    let chunks = chunked.len();
    let out = if args.no_dedup { chunked } else { dedup(&chunked) };
    write_corpus(&out, &args.output)?;
    super::print_json(&Summary {
        input_passages,
        chunks,
        output_passages: out.len(),
        duplicates_removed: chunks - out.len(),
    })
}
