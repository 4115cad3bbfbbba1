use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use twoscope_core::corpus::Scope;
use twoscope_core::enclave::{orchestrate, AuditSummary};
use twoscope_core::policy::PrivacyMode;
use twoscope_core::reader::{LexicalReader, OracleReader, Reader, ScoreFile};

use crate::config::{ReaderChoice, RunArgs};
use crate::error::{CliError, Result};
use crate::setup::{prepare, Needs};

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    question: String,
    /// Gold answer, for the oracle reader.
    #[arg(long)]
    gold_answer: Option<String>,
    /// Gold passage id, for the oracle reader; repeatable.
    #[arg(long = "gold-passage")]
    gold_passages: Vec<String>,
    /// Example id to look up in the reader score file.
    #[arg(long, default_value = "query")]
    example_id: String,
    /// Write the full audit log (payloads included) as JSONL.
    #[arg(long)]
    audit_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct HopView {
    passage_id: String,
    scope: Scope,
    score: f64,
}

#[derive(Serialize)]
struct ChainView {
    chain_score: f64,
    hops: Vec<HopView>,
}

#[derive(Serialize)]
struct QueryOutput {
    question: String,
    mode: PrivacyMode,
    answer: String,
    confidence: f64,
    chains: Vec<ChainView>,
    audit_summary: AuditSummary,
}

pub(crate) fn load_scores(path: Option<&PathBuf>) -> Result<ScoreFile> {
    let path = path.ok_or_else(|| CliError::usage("reader \"scores\" needs --reader-scores"))?;
    let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(ScoreFile::read(std::io::BufReader::new(file))?)
}

pub fn run(args: QueryArgs) -> Result<()> {
    if args.question.trim().is_empty() {
        return Err(CliError::usage("--question is empty"));
    }
    let config = args.run.resolve()?;
    let scores = match config.reader {
        ReaderChoice::Scores => Some(load_scores(config.reader_scores.as_ref())?),
        _ => None,
    };
    let reader: Box<dyn Reader + '_> = match config.reader {
        ReaderChoice::Lexical => Box::new(LexicalReader),
        ReaderChoice::Oracle => {
            let answer = args
                .gold_answer
                .clone()
                .ok_or_else(|| CliError::usage("the oracle reader needs --gold-answer"))?;
            Box::new(OracleReader::new(answer, args.gold_passages.clone()))
        }
        ReaderChoice::Scores => Box::new(scores.as_ref().expect("loaded above").for_example(&args.example_id)),
    };
    let mut env = prepare(
        &config,
        Needs {
            public_corpus: false,
            retrieval: true,
        },
    )?;
    let result = orchestrate(
        &args.question,
        &env.local,
        env.gateway.as_mut(),
        &config.beam,
        reader.as_ref(),
        config.confidence,
    )?;
    if let Some(path) = &args.audit_out {
        env.audit.write_jsonl(path)?;
    }
    super::print_json(&QueryOutput {
        question: args.question,
        mode: config.beam.mode,
        answer: result.answer.answer_text,
        confidence: result.confidence,
        chains: result
            .chains
            .iter()
            .map(|c| ChainView {
                chain_score: c.chain_score,
                hops: c
                    .hops
                    .iter()
                    .map(|h| HopView {
                        passage_id: h.passage_id.clone(),
                        scope: h.scope,
                        score: h.score,
                    })
                    .collect(),
            })
            .collect(),
        audit_summary: AuditSummary::of(&env.audit.entries()),
    })
}
