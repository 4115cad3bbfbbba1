//! Iterative beam search over scoped indices under a privacy mode.
//!
//! Hop 1 queries with the bare question. Later hops query with the question
//! composed with the chain's passages so far. Each hop keeps the global
//! top-k extensions of all frontier chains, ranked by cumulative score.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Passage, Scope};
use crate::index::{Bm25Params, Embedder, IndexError, PassageIndex, ScoredHit};
use crate::policy::{allowed_targets, chain_taint, PrivacyMode, Violation};
use crate::text::whitespace_token_spans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retriever {
    Dense,
    Sparse,
}

impl Retriever {
    pub fn as_str(self) -> &'static str {
        match self {
            Retriever::Dense => "dense",
            Retriever::Sparse => "sparse",
        }
    }
}

impl fmt::Display for Retriever {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Retriever {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Retriever::Dense),
            "sparse" | "bm25" => Ok(Retriever::Sparse),
            _ => Err(format!("unknown retriever {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamConfig {
    pub k: usize,
    pub n_hops: usize,
    pub mode: PrivacyMode,
    pub retriever: Retriever,
    /// Keep `ceil(k/2)` extensions per scope instead of the global top-k.
    pub balanced: bool,
    pub hop2_query_token_budget: usize,
    pub separator: String,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            k: 100,
            n_hops: 2,
            mode: PrivacyMode::DocumentPrivacy,
            retriever: Retriever::Dense,
            balanced: false,
            hop2_query_token_budget: 350,
            separator: " [SEP] ".to_string(),
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), BeamError> {
        if self.k == 0 {
            return Err(BeamError::InvalidConfig("k must be at least 1".into()));
        }
        if !(1..=2).contains(&self.n_hops) {
            return Err(BeamError::InvalidConfig(format!("n_hops must be 1 or 2, got {}", self.n_hops)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub passage_id: String,
    pub scope: Scope,
    pub score: f64,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub question: String,
    pub hops: Vec<Hop>,
    pub chain_score: f64,
}

impl Chain {
    pub fn empty(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            hops: Vec::new(),
            chain_score: 0.0,
        }
    }

    pub fn taint(&self) -> Scope {
        chain_taint(self.hops.iter().map(|h| h.scope))
    }

    pub fn contains(&self, passage_id: &str) -> bool {
        self.hops.iter().any(|h| h.passage_id == passage_id)
    }

    pub fn hop_ids(&self) -> impl Iterator<Item = &str> {
        self.hops.iter().map(|h| h.passage_id.as_str())
    }

    /// Hop ids joined with '+'.
    pub fn key(&self) -> String {
        self.hop_ids().collect::<Vec<_>>().join("+")
    }

    pub fn scopes(&self) -> Vec<Scope> {
        self.hops.iter().map(|h| h.scope).collect()
    }

    fn extend(&self, hit: RetrievedPassage) -> Chain {
        let mut hops = self.hops.clone();
        let chain_score = self.chain_score + hit.hit.score;
        hops.push(Hop {
            passage_id: hit.hit.passage_id,
            scope: hit.hit.scope,
            score: hit.hit.score,
            title: hit.title,
            text: hit.text,
        });
        Chain {
            question: self.question.clone(),
            hops,
            chain_score,
        }
    }
}

/// Chain score descending, then hop ids lexicographically ascending.
pub fn chain_order(a: &Chain, b: &Chain) -> Ordering {
    b.chain_score
        .partial_cmp(&a.chain_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.hop_ids().cmp(b.hop_ids()))
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("question has {tokens} tokens, over the budget of {budget}")]
    QuestionOverBudget { tokens: usize, budget: usize },
}

/// `question ++ sep ++ (title ++ " " ++ text)` for each passage, cut to
/// `budget` whitespace tokens from the right. The question is never cut.
pub fn compose_query<'a>(
    question: &str,
    passages: impl IntoIterator<Item = (&'a str, &'a str)>,
    budget: usize,
    separator: &str,
) -> Result<String, ComposeError> {
    let q_tokens = whitespace_token_spans(question).len();
    if q_tokens > budget {
        return Err(ComposeError::QuestionOverBudget { tokens: q_tokens, budget });
    }
    let mut out = question.to_string();
    for (title, text) in passages {
        out.push_str(separator);
        if !title.is_empty() {
            out.push_str(title);
            out.push(' ');
        }
        out.push_str(text);
    }
    let spans = whitespace_token_spans(&out);
    if spans.len() > budget {
        out.truncate(spans[budget - 1].1);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexTarget {
    /// The single index over both corpora.
    Merged,
    Scoped(Scope),
}

impl fmt::Display for IndexTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexTarget::Merged => f.write_str("merged"),
            IndexTarget::Scoped(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedPassage {
    pub hit: ScoredHit,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum HopError {
    #[error("no index configured for scope {0}")]
    NoIndex(IndexTarget),
    #[error(transparent)]
    Violation(#[from] Violation),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("remote retrieval failed: {0}")]
    Remote(String),
}

/// Where hop searches are executed: local indices, a remote public
/// service, or both.
pub trait HopRetriever {
    /// Top `k` hits of `query` on `target`. `taint` is the scope of the
    /// content composed into `query`.
    fn retrieve(
        &mut self,
        target: IndexTarget,
        retriever: Retriever,
        query: &str,
        k: usize,
        taint: Scope,
    ) -> Result<Vec<RetrievedPassage>, HopError>;
}

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("invalid beam config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Hop(#[from] HopError),
}

fn hop_query(chain: &Chain, config: &BeamConfig) -> Result<String, ComposeError> {
    if chain.hops.is_empty() {
        return Ok(chain.question.clone());
    }
    compose_query(
        &chain.question,
        chain.hops.iter().map(|h| (h.title.as_str(), h.text.as_str())),
        config.hop2_query_token_budget,
        &config.separator,
    )
}

fn targets(config: &BeamConfig, taint: Scope) -> Vec<IndexTarget> {
    if config.mode == PrivacyMode::NoPrivacySingleIndex {
        return vec![IndexTarget::Merged];
    }
    allowed_targets(config.mode, taint).into_iter().map(IndexTarget::Scoped).collect()
}

/// Extends every frontier chain by one hop and keeps the global top-k.
pub fn retrieve_hop(
    frontiers: &[Chain],
    retriever: &mut dyn HopRetriever,
    config: &BeamConfig,
) -> Result<Vec<Chain>, BeamError> {
    config.validate()?;
    let mut extensions = Vec::new();
    for chain in frontiers {
        let query = hop_query(chain, config)?;
        let taint = chain.taint();
        // Over-fetch by the chain length so excluding the chain's own
        // passages still leaves k candidates.
        let fetch = config.k + chain.hops.len();
        for target in targets(config, taint) {
            let hits = match retriever.retrieve(target, config.retriever, &query, fetch, taint) {
                Ok(hits) => hits,
                // The gate refused this send: the branch yields nothing.
                Err(HopError::Violation(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            extensions.extend(
                hits.into_iter()
                    .filter(|h| !chain.contains(&h.hit.passage_id))
                    .map(|h| chain.extend(h)),
            );
        }
    }
    Ok(select(extensions, config))
}

fn select(mut extensions: Vec<Chain>, config: &BeamConfig) -> Vec<Chain> {
    if config.balanced {
        let per_scope = config.k.div_ceil(2);
        let mut by_scope: BTreeMap<Scope, Vec<Chain>> = BTreeMap::new();
        for c in extensions {
            let scope = c.hops.last().expect("extension has a hop").scope;
            by_scope.entry(scope).or_default().push(c);
        }
        extensions = by_scope
            .into_values()
            .flat_map(|mut v| {
                v.sort_by(chain_order);
                v.truncate(per_scope);
                v
            })
            .collect();
    }
    extensions.sort_by(chain_order);
    extensions.truncate(config.k);
    extensions
}

/// Runs `n_hops` rounds of [`retrieve_hop`] starting from the bare question.
pub fn beam_search(question: &str, retriever: &mut dyn HopRetriever, config: &BeamConfig) -> Result<Vec<Chain>, BeamError> {
    config.validate()?;
    let mut frontier = vec![Chain::empty(question)];
    for _ in 0..config.n_hops {
        frontier = retrieve_hop(&frontier, retriever, config)?;
    }
    Ok(frontier)
}

/// Local indices keyed by scope, plus an optional merged index for the
/// single-index baseline. Local searches ignore taint: nothing here crosses
/// an enclave boundary.
#[derive(Debug, Clone, Default)]
pub struct LocalIndices {
    scoped: HashMap<Scope, PassageIndex>,
    merged: Option<PassageIndex>,
}

impl LocalIndices {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_scope(mut self, index: PassageIndex, scope: Scope) -> Self {
        self.scoped.insert(scope, index);
        self
    }

    pub fn with_merged(mut self, index: PassageIndex) -> Self {
        self.merged = Some(index);
        self
    }

    /// Indexes each corpus under its own scope and, when both are present,
    /// a merged index over the two.
    pub fn build(
        public: Option<&Corpus>,
        private: Option<&Corpus>,
        embedder: Arc<dyn Embedder>,
        params: Bm25Params,
    ) -> Result<Self, IndexError> {
        let mut out = Self::new();
        for corpus in [public, private].into_iter().flatten() {
            let idx = PassageIndex::from_corpus(corpus, embedder.clone(), params)?;
            out.scoped.insert(corpus.scope(), idx);
        }
        if let (Some(a), Some(b)) = (public, private) {
            out.merged = Some(PassageIndex::build(a.passages().chain(b.passages()), embedder, params)?);
        }
        Ok(out)
    }

    pub fn get(&self, target: IndexTarget) -> Option<&PassageIndex> {
        match target {
            IndexTarget::Merged => self.merged.as_ref(),
            IndexTarget::Scoped(s) => self.scoped.get(&s),
        }
    }

    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.scoped.values().find_map(|i| i.get(id)).or_else(|| self.merged.as_ref()?.get(id))
    }

    pub fn search(&self, target: IndexTarget, retriever: Retriever, query: &str, k: usize) -> Result<Vec<RetrievedPassage>, HopError> {
        let index = self.get(target).ok_or(HopError::NoIndex(target))?;
        let hits = match retriever {
            Retriever::Dense => index.dense_search(query, k)?,
            Retriever::Sparse => index.sparse_search(query, k),
        };
        Ok(hits
            .into_iter()
            .map(|hit| {
                let p = index.get(&hit.passage_id).expect("hit resolves in its own index");
                RetrievedPassage {
                    title: p.title.clone(),
                    text: p.text.clone(),
                    hit,
                }
            })
            .collect())
    }
}

impl HopRetriever for LocalIndices {
    fn retrieve(
        &mut self,
        target: IndexTarget,
        retriever: Retriever,
        query: &str,
        k: usize,
        _taint: Scope,
    ) -> Result<Vec<RetrievedPassage>, HopError> {
        self.search(target, retriever, query, k)
    }
}

/// Every passage's hop-1 score, per scope.
pub fn score_distributions(
    question: &str,
    indices: &LocalIndices,
    retriever: Retriever,
) -> Result<BTreeMap<Scope, Vec<ScoredHit>>, HopError> {
    let mut out = BTreeMap::new();
    for scope in Scope::ALL {
        let target = IndexTarget::Scoped(scope);
        let index = indices.get(target).ok_or(HopError::NoIndex(target))?;
        let hits = match retriever {
            Retriever::Dense => index.dense_search(question, index.len())?,
            Retriever::Sparse => index.sparse().score_all(question),
        };
        out.insert(scope, hits);
    }
    Ok(out)
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rows `question,scope,passage_id,score`, where `question` is the index of
/// the question in its set. Writes the header when `header` is set.
pub fn write_score_csv(
    question: usize,
    dists: &BTreeMap<Scope, Vec<ScoredHit>>,
    out: &mut (impl Write + ?Sized),
    header: bool,
) -> std::io::Result<()> {
    if header {
        writeln!(out, "question,scope,passage_id,score")?;
    }
    for (scope, hits) in dists {
        for h in hits {
            writeln!(out, "{},{},{},{}", question, scope, csv_field(&h.passage_id), h.score)?;
        }
    }
    Ok(())
}
