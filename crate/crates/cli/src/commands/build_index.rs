use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;

use twoscope_core::corpus::{load_corpus, Scope};
use twoscope_core::index::{Bm25Params, Embedder, HashedConfig, HashedTfidfEmbedder, PassageIndex, PrecomputedEmbedder};

use crate::error::{CliError, Result};
use crate::store::{self, EmbedderMeta};

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scope: Scope,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Precomputed passage vectors (JSONL) instead of the hashed embedder.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, default_value_t = HashedConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = HashedConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = Bm25Params::default().k1)]
    k1: f64,
    #[arg(long, default_value_t = Bm25Params::default().b)]
    b: f64,
}

pub fn run(args: BuildIndexArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus, args.scope).map_err(|e| CliError::from(e).context(args.corpus.display()))?;
    let bm25 = Bm25Params { k1: args.k1, b: args.b };
    let (embedder, meta): (Arc<dyn Embedder>, EmbedderMeta) = match &args.vectors {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let vectors = PrecomputedEmbedder::read_vectors(std::io::BufReader::new(file))?;
            (Arc::new(PrecomputedEmbedder::new(vectors, Default::default())?), EmbedderMeta::Precomputed)
        }
        None => {
            let config = HashedConfig { dim: args.dim, seed: args.seed };
            (Arc::new(HashedTfidfEmbedder::new(config)?), EmbedderMeta::Hashed(config))
        }
    };
    let index = PassageIndex::from_corpus(&corpus, embedder, bm25)?;
    let meta = store::save(&args.out, &corpus, &index, meta, bm25)?;
    super::print_json(&meta)
}
