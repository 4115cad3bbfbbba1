use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};

use twoscope_core::corpus::{load_benchmark, write_corpus_to, BenchmarkExample, Corpus, PathLabel};
use twoscope_core::enclave::{orchestrate, AuditSummary};
use twoscope_core::metrics::{evaluate_run, exact_match, f1, AnswerScores, RetrievalScores};
use twoscope_core::multihop::{Chain, Hop, Retriever};
use twoscope_core::policy::PrivacyMode;
use twoscope_core::reader::{answer, confidence, ConfidenceKind, LexicalReader, OracleReader, Reader};
use twoscope_core::selective::{risk_coverage_curve, slice_by_path, write_curve_csv, Prediction, RiskMetric};

use crate::config::{ReaderChoice, RunArgs, RunConfig};
use crate::error::{CliError, Result};
use crate::setup::{prepare, Needs};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// "all" for the three-mode sweep, or a comma-separated list of modes.
    #[arg(long)]
    modes: Option<String>,
    /// Score the gold chain of every example instead of retrieving.
    #[arg(long)]
    oracle_retrieval: bool,
}

#[derive(Serialize)]
struct RunInfo {
    mode: PrivacyMode,
    k: usize,
    n_hops: usize,
    retriever: Retriever,
    balanced: bool,
    reader: ReaderChoice,
    confidence: ConfidenceKind,
    risk_metric: RiskMetric,
    oracle_retrieval: bool,
    n_examples: usize,
    dataset_hash: String,
    config_hash: String,
}

#[derive(Serialize)]
struct ReportFile {
    run: RunInfo,
    overall: AnswerScores,
    per_path: BTreeMap<PathLabel, AnswerScores>,
    retrieval: RetrievalScores,
    audit: AuditSummary,
}

fn parse_modes(spec: Option<&str>, default: PrivacyMode) -> Result<Vec<PrivacyMode>> {
    match spec {
        None => Ok(vec![default]),
        Some("all") => Ok(vec![
            PrivacyMode::NoPrivacyMultiIndex,
            PrivacyMode::DocumentPrivacy,
            PrivacyMode::QueryPrivacy,
        ]),
        Some(list) => list
            .split(',')
            .map(|m| m.trim().parse::<PrivacyMode>().map_err(CliError::usage))
            .collect(),
    }
}

fn dataset_hash(benchmark: &Path, public: &Corpus, private: &Corpus) -> Result<String> {
    let mut h = Sha256::new();
    h.update(std::fs::read(benchmark)?);
    for c in [public, private] {
        let mut buf = Vec::new();
        write_corpus_to(c, &mut buf)?;
        h.update(&buf);
    }
    Ok(hex::encode(h.finalize()))
}

fn gold_chain(example: &BenchmarkExample, public: &Corpus, private: &Corpus) -> Result<Chain> {
    let mut chain = Chain::empty(example.question.clone());
    for id in example.supporting_passages() {
        let p = public
            .get(id)
            .or_else(|| private.get(id))
            .ok_or_else(|| CliError::data(format!("example {}: unknown passage {id}", example.id)))?;
        chain.hops.push(Hop {
            passage_id: p.id.clone(),
            scope: p.scope,
            score: 1.0,
            title: p.title.clone(),
            text: p.text.clone(),
        });
        chain.chain_score += 1.0;
    }
    Ok(chain)
}

struct ModeSummary {
    report: ReportFile,
}

fn evaluate_mode(config: &RunConfig, oracle_retrieval: bool, dir: &Path) -> Result<ModeSummary> {
    let benchmark = config
        .benchmark
        .as_ref()
        .ok_or_else(|| CliError::usage("--benchmark is required"))?;
    let mut env = prepare(
        config,
        Needs {
            public_corpus: true,
            retrieval: !oracle_retrieval,
        },
    )?;
    let public = env.public.take().expect("prepare loads the public corpus");
    let examples = load_benchmark(benchmark, &public, &env.private).map_err(|e| CliError::from(e).context(benchmark.display()))?;
    if examples.is_empty() {
        return Err(CliError::data(format!("{}: no examples", benchmark.display())));
    }
    let scores = match config.reader {
        ReaderChoice::Scores => Some(super::query::load_scores(config.reader_scores.as_ref())?),
        _ => None,
    };

    let mut predictions = Vec::with_capacity(examples.len());
    let mut chains_per_example = HashMap::new();
    for ex in &examples {
        let reader: Box<dyn Reader + '_> = match config.reader {
            ReaderChoice::Lexical => Box::new(LexicalReader),
            ReaderChoice::Oracle => Box::new(OracleReader::new(ex.answer.clone(), ex.supporting_passages())),
            ReaderChoice::Scores => Box::new(scores.as_ref().expect("loaded above").for_example(&ex.id)),
        };
        let (text, conf, chains) = if oracle_retrieval {
            let chains = vec![gold_chain(ex, &public, &env.private)?];
            let (best, candidates) = answer(&ex.question, &chains, reader.as_ref())?;
            (best.answer_text, confidence(config.confidence, &candidates)?, chains)
        } else {
            let o = orchestrate(&ex.question, &env.local, env.gateway.as_mut(), &config.beam, reader.as_ref(), config.confidence)
                .map_err(|e| CliError::from(e).context(format!("example {}", ex.id)))?;
            (o.answer.answer_text, o.confidence, o.chains)
        };
        predictions.push(Prediction {
            example_id: ex.id.clone(),
            em: exact_match(&text, &ex.answer),
            f1: f1(&text, &ex.answer),
            answer: text,
            confidence: conf,
            hop_path: ex.path_label(),
        });
        chains_per_example.insert(ex.id.clone(), chains);
    }

    let eval = evaluate_run(&predictions, &examples, &chains_per_example, config.beam.k)?;
    std::fs::create_dir_all(dir)?;
    let curve = risk_coverage_curve(&predictions, config.risk_metric)?;
    super::write_file(&dir.join("risk_coverage.csv"), |w| write_curve_csv(&curve, w))?;
    for (label, preds) in slice_by_path(&predictions) {
        if label == PathLabel::Unlabeled {
            continue;
        }
        let curve = risk_coverage_curve(&preds, config.risk_metric)?;
        super::write_file(&dir.join(format!("risk_coverage_{label}.csv")), |w| write_curve_csv(&curve, w))?;
    }
    super::write_file(&dir.join("predictions.jsonl"), |w| {
        for p in &predictions {
            serde_json::to_writer(&mut *w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;

    let report = ReportFile {
        run: RunInfo {
            mode: config.beam.mode,
            k: config.beam.k,
            n_hops: config.beam.n_hops,
            retriever: config.beam.retriever,
            balanced: config.beam.balanced,
            reader: config.reader,
            confidence: config.confidence,
            risk_metric: config.risk_metric,
            oracle_retrieval,
            n_examples: examples.len(),
            dataset_hash: dataset_hash(benchmark, &public, &env.private)?,
            config_hash: config.hash(),
        },
        overall: eval.overall,
        per_path: eval.per_path,
        retrieval: eval.retrieval,
        audit: AuditSummary::of(&env.audit.entries()),
    };
    super::write_file(&dir.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")
    })?;
    Ok(ModeSummary { report })
}

fn comparison_rows(summaries: &[ModeSummary]) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["mode", "n", "em", "f1", "EE_em", "EW_em", "WE_em", "WW_em", "recall"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()];
    for s in summaries {
        let r = &s.report;
        let mut row = vec![
            r.run.mode.to_string(),
            r.overall.n.to_string(),
            format!("{:.4}", r.overall.em),
            format!("{:.4}", r.overall.f1),
        ];
        for label in PathLabel::LABELED {
            row.push(r.per_path.get(&label).map_or("-".into(), |a| format!("{:.4}", a.em)));
        }
        row.push(format!("{:.4}", r.retrieval.avg_passage_recall_at_k));
        rows.push(row);
    }
    rows
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let base = args.run.resolve()?;
    let modes = parse_modes(args.modes.as_deref(), base.beam.mode)?;
    let sweep = args.modes.is_some() && modes.len() > 1;
    let mut summaries = Vec::new();
    for mode in &modes {
        let mut config = base.clone();
        config.beam.mode = *mode;
        let dir = if sweep { args.out.join(mode.as_str()) } else { args.out.clone() };
        summaries.push(evaluate_mode(&config, args.oracle_retrieval, &dir)?);
    }
    let rows = comparison_rows(&summaries);
    if sweep {
        super::write_file(&args.out.join("comparison.csv"), |w| {
            for r in &rows {
                writeln!(w, "{}", r.join(","))?;
            }
            Ok(())
        })?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "| {} |", rows[0].join(" | "))?;
    writeln!(out, "|{}", "---|".repeat(rows[0].len()))?;
    for r in &rows[1..] {
        writeln!(out, "| {} |", r.join(" | "))?;
    }
    Ok(())
}
