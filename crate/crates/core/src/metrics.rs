//! Answer metrics (EM/F1), retrieval metrics, and the run report.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BenchmarkExample, PathLabel};
use crate::multihop::Chain;
use crate::selective::Prediction;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("gold passage set is empty")]
    EmptyGold,
    #[error("no example with id {0:?}")]
    UnknownExample(String),
    #[error("example {0:?} has no prediction")]
    MissingPrediction(String),
}

/// Lowercase, strip punctuation, drop articles, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

/// Token-multiset F1 over normalized answers.
pub fn f1(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let p: Vec<&str> = p.split_whitespace().collect();
    let g: Vec<&str> = g.split_whitespace().collect();
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    // 2PR/(P+R) with P = o/|p|, R = o/|g|, reduced to one division.
    2.0 * overlap as f64 / (p.len() + g.len()) as f64
}

/// Fraction of gold passages appearing anywhere in the chains.
pub fn passage_recall_at_k(chains: &[Chain], gold_ids: &HashSet<String>) -> Result<f64, MetricsError> {
    if gold_ids.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    let found: HashSet<&str> = chains.iter().flat_map(Chain::hop_ids).collect();
    let hits = gold_ids.iter().filter(|g| found.contains(g.as_str())).count();
    Ok(hits as f64 / gold_ids.len() as f64)
}

/// 1 iff the chain's passages are exactly the gold set.
pub fn chain_em(top_chain: &Chain, gold_ids: &HashSet<String>) -> u8 {
    let ids: HashSet<String> = top_chain.hop_ids().map(str::to_string).collect();
    u8::from(&ids == gold_ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerScores {
    pub em: f64,
    pub f1: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScores {
    pub avg_passage_recall_at_k: f64,
    pub chain_em: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: AnswerScores,
    pub per_path: BTreeMap<PathLabel, AnswerScores>,
    pub retrieval: RetrievalScores,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// Aggregates a run. Predictions and chains are matched to examples by id;
/// sums are taken in example-id order so the result does not depend on the
/// input order.
pub fn evaluate_run(
    predictions: &[Prediction],
    examples: &[BenchmarkExample],
    chains_per_example: &HashMap<String, Vec<Chain>>,
    k: usize,
) -> Result<EvalReport, MetricsError> {
    let by_id: HashMap<&str, &BenchmarkExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut preds: Vec<&Prediction> = predictions.iter().collect();
    preds.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    for p in &preds {
        if !by_id.contains_key(p.example_id.as_str()) {
            return Err(MetricsError::UnknownExample(p.example_id.clone()));
        }
    }
    let predicted: HashSet<&str> = preds.iter().map(|p| p.example_id.as_str()).collect();
    let mut ids: Vec<&str> = by_id.keys().copied().collect();
    ids.sort();
    if let Some(missing) = ids.iter().find(|id| !predicted.contains(*id)) {
        return Err(MetricsError::MissingPrediction(missing.to_string()));
    }

    let scores = |ps: &[&Prediction]| AnswerScores {
        em: mean(ps.iter().map(|p| p.em as f64)),
        f1: mean(ps.iter().map(|p| p.f1)),
        n: ps.len(),
    };
    let mut per_path_preds: BTreeMap<PathLabel, Vec<&Prediction>> = BTreeMap::new();
    for p in &preds {
        per_path_preds.entry(by_id[p.example_id.as_str()].path_label()).or_default().push(p);
    }

    let mut recalls = Vec::new();
    let mut chain_ems = Vec::new();
    for id in &ids {
        let ex = by_id[id];
        let gold: HashSet<String> = ex.supporting_passages().into_iter().map(str::to_string).collect();
        if gold.is_empty() {
            continue;
        }
        let chains = chains_per_example.get(*id).map(Vec::as_slice).unwrap_or(&[]);
        recalls.push(passage_recall_at_k(chains, &gold)?);
        chain_ems.push(chains.first().map_or(0.0, |c| chain_em(c, &gold) as f64));
    }

    Ok(EvalReport {
        overall: scores(&preds),
        per_path: per_path_preds.iter().map(|(l, ps)| (*l, scores(ps))).collect(),
        retrieval: RetrievalScores {
            avg_passage_recall_at_k: mean(recalls.into_iter()),
            chain_em: mean(chain_ems.into_iter()),
            k,
        },
    })
}
