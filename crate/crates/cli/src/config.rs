//! Run configuration: a JSON file with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twoscope_core::index::{Bm25Params, HashedConfig};
use twoscope_core::multihop::{BeamConfig, Retriever};
use twoscope_core::policy::PrivacyMode;
use twoscope_core::reader::ConfidenceKind;
use twoscope_core::selective::RiskMetric;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReaderChoice {
    #[default]
    Lexical,
    Oracle,
    /// External per-chain scores from `reader_scores`.
    Scores,
}

impl std::str::FromStr for ReaderChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Self::Lexical),
            "oracle" => Ok(Self::Oracle),
            "scores" => Ok(Self::Scores),
            _ => Err(format!("unknown reader {s:?} (lexical, oracle, scores)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub public_corpus: Option<PathBuf>,
    pub private_corpus: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    /// Holds `public/` and `private/` directories written by `build-index`.
    pub index_dir: Option<PathBuf>,
    /// Precomputed passage vectors (JSONL), any scope.
    pub vectors: Vec<PathBuf>,
    pub query_vectors: Option<PathBuf>,
    pub embedder: HashedConfig,
    pub bm25: Bm25Params,
    pub beam: BeamConfig,
    pub reader: ReaderChoice,
    pub reader_scores: Option<PathBuf>,
    pub confidence: ConfidenceKind,
    pub risk_metric: RiskMetric,
    /// Address of the public service. Without it, public retrievals run
    /// against a local public index.
    pub service_addr: Option<String>,
    pub connect_timeout_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            public_corpus: None,
            private_corpus: None,
            benchmark: None,
            index_dir: None,
            vectors: Vec::new(),
            query_vectors: None,
            embedder: HashedConfig::default(),
            bm25: Bm25Params::default(),
            beam: BeamConfig::default(),
            reader: ReaderChoice::default(),
            reader_scores: None,
            confidence: ConfidenceKind::default(),
            risk_metric: RiskMetric::default(),
            service_addr: None,
            connect_timeout_ms: 5000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Flags shared by the commands that run the pipeline. Each one overrides
/// the matching config-file field.
#[derive(Debug, Clone, Args, Default)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub public_corpus: Option<PathBuf>,
    #[arg(long)]
    pub private_corpus: Option<PathBuf>,
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    #[arg(long)]
    pub index_dir: Option<PathBuf>,
    /// Precomputed passage vectors; repeatable.
    #[arg(long = "vectors")]
    pub vectors: Vec<PathBuf>,
    #[arg(long)]
    pub query_vectors: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_hops: Option<usize>,
    #[arg(long)]
    pub mode: Option<PrivacyMode>,
    #[arg(long)]
    pub retriever: Option<Retriever>,
    /// Keep ceil(k/2) extensions per scope at each hop.
    #[arg(long)]
    pub balanced: bool,
    /// Whitespace-token budget for composed hop queries.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub reader: Option<ReaderChoice>,
    #[arg(long)]
    pub reader_scores: Option<PathBuf>,
    #[arg(long)]
    pub confidence: Option<ConfidenceKind>,
    #[arg(long)]
    pub risk_metric: Option<RiskMetric>,
    /// Public service address, host:port.
    #[arg(long)]
    pub service: Option<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for (field, flag) in [
            (&mut c.public_corpus, &self.public_corpus),
            (&mut c.private_corpus, &self.private_corpus),
            (&mut c.benchmark, &self.benchmark),
            (&mut c.index_dir, &self.index_dir),
            (&mut c.query_vectors, &self.query_vectors),
            (&mut c.reader_scores, &self.reader_scores),
        ] {
            if flag.is_some() {
                field.clone_from(flag);
            }
        }
        if !self.vectors.is_empty() {
            c.vectors.clone_from(&self.vectors);
        }
        if self.service.is_some() {
            c.service_addr.clone_from(&self.service);
        }
        if let Some(v) = self.dim {
            c.embedder.dim = v;
        }
        if let Some(v) = self.seed {
            c.embedder.seed = v;
        }
        if let Some(v) = self.k {
            c.beam.k = v;
        }
        if let Some(v) = self.n_hops {
            c.beam.n_hops = v;
        }
        if let Some(v) = self.mode {
            c.beam.mode = v;
        }
        if let Some(v) = self.retriever {
            c.beam.retriever = v;
        }
        if self.balanced {
            c.beam.balanced = true;
        }
        if let Some(v) = self.budget {
            c.beam.hop2_query_token_budget = v;
        }
        if let Some(v) = self.reader {
            c.reader = v;
        }
        if let Some(v) = self.confidence {
            c.confidence = v;
        }
        if let Some(v) = self.risk_metric {
            c.risk_metric = v;
        }
        c.beam.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(c)
    }
}
