//! Answer extraction over retrieved chains and confidence scores.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::softmax;
use crate::metrics::normalize_answer;
use crate::multihop::Chain;
use crate::text::{lexical_token_spans, whitespace_token_spans};

#[derive(Debug, Error)]
pub enum ReaderError {
    #[error("no chains to read")]
    NoChains,
    #[error("no candidates")]
    NoCandidates,
    #[error("no external score for example {example:?} chain {chain:?}")]
    MissingScore { example: String, chain: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub answer_text: String,
    pub chain: Chain,
    pub reader_score: f64,
}

pub trait Reader {
    fn score_chain(&self, question: &str, chain: &Chain) -> Result<AnswerCandidate, ReaderError>;
}

pub const STOP_WORDS: [&str; 16] = [
    "a", "an", "the", "of", "in", "on", "at", "to", "is", "was", "what", "which", "who", "when", "where", "how",
];
pub const MAX_SPAN_TOKENS: usize = 8;
pub const PROXIMITY_WINDOW: usize = 20;
pub const LENGTH_PENALTY: f64 = 0.01;

/// Proximity-based span picker.
///
/// Candidate spans are runs of 1..=8 tokens containing no question content
/// token. A span scores the fraction of question content tokens found within
/// 20 tokens of it, minus 0.01 per span token. Ties go to the earliest span
/// (hop order, then position), then the shorter one.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalReader;

struct Best {
    score: f64,
    hop: usize,
    start: usize,
    len: usize,
    text: String,
}

pub fn lexical_reader_score(question: &str, chain: &Chain) -> AnswerCandidate {
    let content: Vec<String> = {
        let mut seen = HashSet::new();
        crate::text::lexical_tokens(question)
            .into_iter()
            .filter(|t| !STOP_WORDS.contains(&t.as_str()))
            .filter(|t| seen.insert(t.clone()))
            .collect()
    };
    let content_set: HashSet<&str> = content.iter().map(String::as_str).collect();
    let mut best: Option<Best> = None;
    for (hop, h) in chain.hops.iter().enumerate() {
        let spans = lexical_token_spans(&h.text);
        let toks: Vec<String> = spans.iter().map(|&(s, e)| h.text[s..e].to_lowercase()).collect();
        let positions: Vec<Vec<usize>> = content
            .iter()
            .map(|c| toks.iter().enumerate().filter(|(_, t)| *t == c).map(|(i, _)| i).collect())
            .collect();
        for start in 0..toks.len() {
            for len in 1..=MAX_SPAN_TOKENS {
                let end = start + len - 1;
                if end >= toks.len() || content_set.contains(toks[end].as_str()) {
                    break;
                }
                let lo = start.saturating_sub(PROXIMITY_WINDOW);
                let hi = end + PROXIMITY_WINDOW;
                let near = positions.iter().filter(|ps| ps.iter().any(|&p| p >= lo && p <= hi)).count();
                let frac = if content.is_empty() { 0.0 } else { near as f64 / content.len() as f64 };
                let score = frac - LENGTH_PENALTY * len as f64;
                let better = match &best {
                    None => true,
                    Some(b) => score > b.score || (score == b.score && (hop, start, len) < (b.hop, b.start, b.len)),
                };
                if better {
                    best = Some(Best {
                        score,
                        hop,
                        start,
                        len,
                        text: h.text[spans[start].0..spans[end].1].to_string(),
                    });
                }
            }
        }
    }
    match best {
        Some(b) => AnswerCandidate {
            answer_text: b.text,
            chain: chain.clone(),
            reader_score: b.score,
        },
        None => AnswerCandidate {
            answer_text: String::new(),
            chain: chain.clone(),
            reader_score: 0.0,
        },
    }
}

impl Reader for LexicalReader {
    fn score_chain(&self, question: &str, chain: &Chain) -> Result<AnswerCandidate, ReaderError> {
        Ok(lexical_reader_score(question, chain))
    }
}

/// Knows the gold answer: full marks for chains covering the gold passages.
#[derive(Debug, Clone)]
pub struct OracleReader {
    pub answer: String,
    pub supporting: HashSet<String>,
}

impl OracleReader {
    pub fn new(answer: impl Into<String>, supporting: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            answer: answer.into(),
            supporting: supporting.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn oracle_reader_score(chain: &Chain, answer: &str, supporting: &HashSet<String>) -> AnswerCandidate {
    let ids: HashSet<&str> = chain.hop_ids().collect();
    if supporting.iter().all(|s| ids.contains(s.as_str())) {
        return AnswerCandidate {
            answer_text: answer.to_string(),
            chain: chain.clone(),
            reader_score: 1.0,
        };
    }
    let distractor = chain
        .hops
        .first()
        .map(|h| {
            let spans = whitespace_token_spans(&h.text);
            match spans.get(..3.min(spans.len())) {
                Some([first, .., last]) => h.text[first.0..last.1].to_string(),
                Some([only]) => h.text[only.0..only.1].to_string(),
                _ => String::new(),
            }
        })
        .unwrap_or_default();
    AnswerCandidate {
        answer_text: distractor,
        chain: chain.clone(),
        reader_score: 0.1,
    }
}

impl Reader for OracleReader {
    fn score_chain(&self, _question: &str, chain: &Chain) -> Result<AnswerCandidate, ReaderError> {
        Ok(oracle_reader_score(chain, &self.answer, &self.supporting))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ScoreLine {
    pub example_id: String,
    pub chain_key: String,
    pub answer: String,
    pub score: f64,
}

/// Replays reader outputs produced elsewhere, keyed by
/// (example id, chain key).
#[derive(Debug, Clone, Default)]
pub struct ScoreFile {
    entries: HashMap<(String, String), (String, f64)>,
}

impl ScoreFile {
    pub fn read(reader: impl BufRead) -> Result<Self, ReaderError> {
        let mut entries = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: ScoreLine = serde_json::from_str(&line).map_err(|e| ReaderError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.insert((l.example_id, l.chain_key), (l.answer, l.score));
        }
        Ok(Self { entries })
    }

    pub fn for_example<'a>(&'a self, example_id: &'a str) -> ScoreFileReader<'a> {
        ScoreFileReader { file: self, example_id }
    }
}

pub struct ScoreFileReader<'a> {
    file: &'a ScoreFile,
    example_id: &'a str,
}

impl Reader for ScoreFileReader<'_> {
    fn score_chain(&self, _question: &str, chain: &Chain) -> Result<AnswerCandidate, ReaderError> {
        let key = chain.key();
        let (answer, score) = self
            .file
            .entries
            .get(&(self.example_id.to_string(), key.clone()))
            .ok_or_else(|| ReaderError::MissingScore {
                example: self.example_id.to_string(),
                chain: key,
            })?;
        Ok(AnswerCandidate {
            answer_text: answer.clone(),
            chain: chain.clone(),
            reader_score: *score,
        })
    }
}

/// Scores every chain and returns the best candidate (earliest chain on
/// ties) along with all candidates in chain order.
pub fn answer(
    question: &str,
    chains: &[Chain],
    reader: &dyn Reader,
) -> Result<(AnswerCandidate, Vec<AnswerCandidate>), ReaderError> {
    if chains.is_empty() {
        return Err(ReaderError::NoChains);
    }
    let candidates = chains
        .iter()
        .map(|c| reader.score_chain(question, c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.reader_score > candidates[best].reader_score {
            best = i;
        }
    }
    Ok((candidates[best].clone(), candidates))
}

/// Largest softmax probability over reader scores.
pub fn confidence_maxprob(candidates: &[AnswerCandidate]) -> Result<f64, ReaderError> {
    if candidates.is_empty() {
        return Err(ReaderError::NoCandidates);
    }
    let probs = softmax(&candidates.iter().map(|c| c.reader_score).collect::<Vec<_>>());
    Ok(probs.into_iter().fold(0.0, f64::max))
}

/// Largest summed softmax probability over candidates sharing a normalized
/// answer.
pub fn confidence_grouped(candidates: &[AnswerCandidate]) -> Result<f64, ReaderError> {
    if candidates.is_empty() {
        return Err(ReaderError::NoCandidates);
    }
    let probs = softmax(&candidates.iter().map(|c| c.reader_score).collect::<Vec<_>>());
    let mut groups: HashMap<String, f64> = HashMap::new();
    for (c, p) in candidates.iter().zip(probs) {
        *groups.entry(normalize_answer(&c.answer_text)).or_default() += p;
    }
    Ok(groups.into_values().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceKind {
    #[default]
    Maxprob,
    Grouped,
}

impl std::str::FromStr for ConfidenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxprob" => Ok(Self::Maxprob),
            "grouped" => Ok(Self::Grouped),
            _ => Err(format!("unknown confidence {s:?}")),
        }
    }
}

pub fn confidence(kind: ConfidenceKind, candidates: &[AnswerCandidate]) -> Result<f64, ReaderError> {
    match kind {
        ConfidenceKind::Maxprob => confidence_maxprob(candidates),
        ConfidenceKind::Grouped => confidence_grouped(candidates),
    }
}
