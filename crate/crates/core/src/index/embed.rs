use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IndexError;
use crate::corpus::Passage;
use crate::text::lexical_tokens;

/// Query and passage encoder. Equal inputs under equal fingerprints must
/// produce identical vectors.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn fingerprint(&self) -> String;
    fn embed_query(&self, text: &str) -> Result<Vec<f64>, IndexError>;
    fn embed_passage(&self, passage: &Passage) -> Result<Vec<f64>, IndexError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HashedConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashedConfig {
    fn default() -> Self {
        Self { dim: 512, seed: 0 }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

// splitmix64 finalizer; FNV's low bits are weak on short keys.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Signed feature hashing of term frequencies, L2-normalized.
///
/// Each token picks a bucket in `[0, dim)` and a sign from a seeded hash.
/// Text without tokens maps to the zero vector.
pub fn hashed_tfidf_embed(config: HashedConfig, text: &str) -> Vec<f64> {
    let mut v = vec![0.0f64; config.dim];
    for tok in lexical_tokens(text) {
        let h = mix(fnv1a(config.seed, tok.as_bytes()));
        let bucket = (h % config.dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    v
}

#[derive(Debug, Clone)]
pub struct HashedTfidfEmbedder {
    config: HashedConfig,
}

impl HashedTfidfEmbedder {
    pub fn new(config: HashedConfig) -> Result<Self, IndexError> {
        if config.dim < 8 {
            return Err(IndexError::InvalidConfig(format!("dim must be at least 8, got {}", config.dim)));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> HashedConfig {
        self.config
    }
}

impl Embedder for HashedTfidfEmbedder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn fingerprint(&self) -> String {
        let desc = format!("hashed-tfidf/v1/fnv1a-splitmix/dim={}/seed={}", self.config.dim, self.config.seed);
        hex::encode(Sha256::digest(desc.as_bytes()))
    }

    fn embed_query(&self, text: &str) -> Result<Vec<f64>, IndexError> {
        Ok(hashed_tfidf_embed(self.config, text))
    }

    fn embed_passage(&self, passage: &Passage) -> Result<Vec<f64>, IndexError> {
        if passage.title.is_empty() {
            Ok(hashed_tfidf_embed(self.config, &passage.text))
        } else {
            Ok(hashed_tfidf_embed(self.config, &format!("{} {}", passage.title, passage.text)))
        }
    }
}

#[derive(Deserialize)]
struct VectorLine {
    id: String,
    vector: Vec<f64>,
}

/// Vectors produced elsewhere, keyed by passage id. Query vectors are keyed
/// by the exact query text.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    dim: usize,
    passages: HashMap<String, Vec<f64>>,
    queries: HashMap<String, Vec<f64>>,
    fingerprint: String,
}

impl PrecomputedEmbedder {
    pub fn new(passages: HashMap<String, Vec<f64>>, queries: HashMap<String, Vec<f64>>) -> Result<Self, IndexError> {
        let dim = passages
            .values()
            .chain(queries.values())
            .map(Vec::len)
            .next()
            .ok_or(IndexError::Empty)?;
        let mut hasher = Sha256::new();
        hasher.update(b"precomputed/v1");
        for (label, map) in [("p", &passages), ("q", &queries)] {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for k in keys {
                let v = &map[k];
                if v.len() != dim {
                    return Err(IndexError::DimensionMismatch { expected: dim, got: v.len() });
                }
                hasher.update(label.as_bytes());
                hasher.update((k.len() as u64).to_le_bytes());
                hasher.update(k.as_bytes());
                for x in v {
                    hasher.update(x.to_le_bytes());
                }
            }
        }
        Ok(Self {
            dim,
            passages,
            queries,
            fingerprint: hex::encode(hasher.finalize()),
        })
    }

    /// Reads JSONL `{"id": str, "vector": [f64]}` lines.
    pub fn read_vectors(reader: impl BufRead) -> Result<HashMap<String, Vec<f64>>, IndexError> {
        let mut out = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: VectorLine = serde_json::from_str(&line).map_err(|e| IndexError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if out.insert(v.id.clone(), v.vector).is_some() {
                return Err(IndexError::DuplicateVector(v.id));
            }
        }
        Ok(out)
    }
}

impl Embedder for PrecomputedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn embed_query(&self, text: &str) -> Result<Vec<f64>, IndexError> {
        self.queries
            .get(text)
            .cloned()
            .ok_or_else(|| IndexError::UnknownQuery(text.to_string()))
    }

    fn embed_passage(&self, passage: &Passage) -> Result<Vec<f64>, IndexError> {
        self.passages
            .get(&passage.id)
            .cloned()
            .ok_or_else(|| IndexError::MissingVector(passage.id.clone()))
    }
}
