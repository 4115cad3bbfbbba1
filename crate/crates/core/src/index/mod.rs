//! Exact sparse (BM25) and dense (inner product) retrieval over passages.

use std::cmp::Ordering;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Passage, Scope};

mod dense;
mod embed;
mod sparse;

pub use dense::{retrieval_probabilities, softmax, DenseIndex};
pub use embed::{hashed_tfidf_embed, Embedder, HashedConfig, HashedTfidfEmbedder, PrecomputedEmbedder};
pub use sparse::{Bm25Params, SparseIndex};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty collection")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedder config: {0}")]
    InvalidConfig(String),
    #[error("no precomputed vector for passage {0:?}")]
    MissingVector(String),
    #[error("no precomputed vector for query {0:?}")]
    UnknownQuery(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate vector id {0:?}")]
    DuplicateVector(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A retrieval result. Lists are ordered by [`hit_order`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub passage_id: String,
    pub score: f64,
    pub scope: Scope,
}

/// Score descending, then passage id ascending. `0.0` and `-0.0` compare equal.
pub fn hit_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_id.cmp(b_id))
}

pub(crate) fn sort_hits(hits: &mut [ScoredHit]) {
    hits.sort_by(|a, b| hit_order(a.score, &a.passage_id, b.score, &b.passage_id));
}

/// Passages plus both indices over them, sharing one embedder.
///
/// A collection may mix scopes; the merged single-index baseline uses one
/// built over both corpora.
#[derive(Clone)]
pub struct PassageIndex {
    passages: IndexMap<String, Passage>,
    sparse: SparseIndex,
    dense: DenseIndex,
    embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for PassageIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PassageIndex")
            .field("passages", &self.passages.len())
            .field("embedder", &self.embedder.fingerprint())
            .finish()
    }
}

impl PassageIndex {
    pub fn build<'a>(
        passages: impl IntoIterator<Item = &'a Passage>,
        embedder: Arc<dyn Embedder>,
        params: Bm25Params,
    ) -> Result<Self, IndexError> {
        let passages: IndexMap<String, Passage> = passages.into_iter().map(|p| (p.id.clone(), p.clone())).collect();
        let sparse = SparseIndex::build(passages.values(), params)?;
        let dense = DenseIndex::build(passages.values(), embedder.as_ref())?;
        Ok(Self {
            passages,
            sparse,
            dense,
            embedder,
        })
    }

    pub fn from_corpus(corpus: &Corpus, embedder: Arc<dyn Embedder>, params: Bm25Params) -> Result<Self, IndexError> {
        Self::build(corpus.passages(), embedder, params)
    }

    /// Reassembles a collection from persisted parts.
    pub fn from_parts(
        corpus: &Corpus,
        sparse: SparseIndex,
        dense: DenseIndex,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, IndexError> {
        if dense.dim() != embedder.dim() {
            return Err(IndexError::DimensionMismatch {
                expected: dense.dim(),
                got: embedder.dim(),
            });
        }
        if dense.embedder_fingerprint() != embedder.fingerprint() {
            return Err(IndexError::InvalidConfig(format!(
                "dense index was built with embedder {} but {} was supplied",
                dense.embedder_fingerprint(),
                embedder.fingerprint()
            )));
        }
        if dense.len() != corpus.len() || sparse.len() != corpus.len() {
            return Err(IndexError::InvalidConfig("index size does not match corpus".into()));
        }
        Ok(Self {
            passages: corpus.passages().map(|p| (p.id.clone(), p.clone())).collect(),
            sparse,
            dense,
            embedder,
        })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.passages.get(id)
    }

    pub fn passages(&self) -> impl Iterator<Item = &Passage> {
        self.passages.values()
    }

    pub fn sparse(&self) -> &SparseIndex {
        &self.sparse
    }

    pub fn dense(&self) -> &DenseIndex {
        &self.dense
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn sparse_search(&self, query: &str, k: usize) -> Vec<ScoredHit> {
        self.sparse.search(query, k)
    }

    pub fn dense_search(&self, query: &str, k: usize) -> Result<Vec<ScoredHit>, IndexError> {
        let v = self.embedder.embed_query(query)?;
        self.dense.search(&v, k)
    }
}
