//! On-disk index directories: `corpus.jsonl`, `sparse.json`, `dense.json`
//! and `meta.json`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twoscope_core::corpus::{load_corpus, write_corpus, Corpus, Scope};
use twoscope_core::index::{Bm25Params, DenseIndex, Embedder, HashedConfig, HashedTfidfEmbedder, PassageIndex, SparseIndex};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderMeta {
    Hashed(HashedConfig),
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format_version: u32,
    pub scope: Scope,
    pub passage_count: usize,
    pub embedder: EmbedderMeta,
    pub embedder_fingerprint: String,
    pub bm25: Bm25Params,
    pub sparse_sha256: String,
    pub dense_sha256: String,
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn save(dir: &Path, corpus: &Corpus, index: &PassageIndex, embedder: EmbedderMeta, bm25: Bm25Params) -> Result<IndexMeta> {
    fs::create_dir_all(dir)?;
    let sparse = serde_json::to_vec(index.sparse())?;
    let dense = serde_json::to_vec(index.dense())?;
    write_corpus(corpus, &dir.join("corpus.jsonl"))?;
    fs::write(dir.join("sparse.json"), &sparse)?;
    fs::write(dir.join("dense.json"), &dense)?;
    let meta = IndexMeta {
        format_version: FORMAT_VERSION,
        scope: corpus.scope(),
        passage_count: corpus.len(),
        embedder,
        embedder_fingerprint: index.embedder().fingerprint(),
        bm25,
        sparse_sha256: sha(&sparse),
        dense_sha256: sha(&dense),
    };
    fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
    Ok(meta)
}

pub fn read_meta(dir: &Path) -> Result<IndexMeta> {
    let path = dir.join("meta.json");
    let bytes = fs::read(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let meta: IndexMeta = serde_json::from_slice(&bytes)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(CliError::data(format!(
            "{}: unsupported index format {}",
            dir.display(),
            meta.format_version
        )));
    }
    Ok(meta)
}

/// Loads a hashed-embedder index, verifying file checksums.
pub fn load(dir: &Path, scope: Scope) -> Result<(Corpus, PassageIndex)> {
    let meta = read_meta(dir)?;
    if meta.scope != scope {
        return Err(CliError::data(format!("{} holds a {} index, expected {scope}", dir.display(), meta.scope)));
    }
    let EmbedderMeta::Hashed(config) = meta.embedder else {
        return Err(CliError::usage(format!(
            "{} was built from precomputed vectors; pass the corpus and --vectors instead",
            dir.display()
        )));
    };
    let corpus = load_corpus(&dir.join("corpus.jsonl"), scope)?;
    let sparse_bytes = fs::read(dir.join("sparse.json"))?;
    let dense_bytes = fs::read(dir.join("dense.json"))?;
    if sha(&sparse_bytes) != meta.sparse_sha256 || sha(&dense_bytes) != meta.dense_sha256 {
        return Err(CliError::data(format!("{}: index files do not match meta.json", dir.display())));
    }
    let sparse: SparseIndex = serde_json::from_slice(&sparse_bytes)?;
    let dense: DenseIndex = serde_json::from_slice(&dense_bytes)?;
    let embedder: Arc<dyn Embedder> = Arc::new(HashedTfidfEmbedder::new(config)?);
    let index = PassageIndex::from_parts(&corpus, sparse, dense, embedder)?;
    Ok((corpus, index))
}
