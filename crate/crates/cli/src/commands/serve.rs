use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;

use twoscope_core::corpus::{load_corpus, CorpusError, Scope};
use twoscope_core::index::{Bm25Params, Embedder, HashedConfig, HashedTfidfEmbedder, PassageIndex, PrecomputedEmbedder};
use twoscope_service::{serve_http, serve_ndjson, PublicService};

use crate::error::{CliError, Result};
use crate::store;

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Public corpus JSONL. Every line must be public.
    #[arg(long, conflicts_with = "index")]
    corpus: Option<PathBuf>,
    /// Directory written by build-index for a public corpus.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: SocketAddr,
    /// Also serve the HTTP mirror here.
    #[arg(long)]
    http_bind: Option<SocketAddr>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    query_vectors: Option<PathBuf>,
    #[arg(long, default_value_t = HashedConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = HashedConfig::default().seed)]
    seed: u64,
}

fn read_vectors(path: &PathBuf) -> Result<std::collections::HashMap<String, Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(PrecomputedEmbedder::read_vectors(std::io::BufReader::new(file))?)
}

fn load_index(args: &ServeArgs) -> Result<PassageIndex> {
    if let Some(dir) = &args.index {
        return Ok(store::load(dir, Scope::Public)?.1);
    }
    let path = args
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::usage("one of --corpus or --index is required"))?;
    let corpus = load_corpus(path, Scope::Public).map_err(|e| match e {
        CorpusError::ScopeMismatch { .. } => CliError::policy(format!("refusing to serve {}: {e}", path.display())),
        other => CliError::from(other).context(path.display()),
    })?;
    let embedder: Arc<dyn Embedder> = match &args.vectors {
        Some(v) => {
            let queries = match &args.query_vectors {
                Some(q) => read_vectors(q)?,
                None => Default::default(),
            };
            // Only vectors of served passages; a shared file may hold private ones.
            let mut passages = read_vectors(v)?;
            passages.retain(|id, _| corpus.contains(id));
            Arc::new(PrecomputedEmbedder::new(passages, queries)?)
        }
        None => Arc::new(HashedTfidfEmbedder::new(HashedConfig { dim: args.dim, seed: args.seed })?),
    };
    Ok(PassageIndex::from_corpus(&corpus, embedder, Bm25Params::default())?)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

pub fn run(args: ServeArgs) -> Result<()> {
    let index = load_index(&args)?;
    let service = PublicService::new(index).map_err(|e| CliError::policy(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::transport(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .map_err(|e| CliError::transport(format!("bind {}: {e}", args.bind)))?;
        let http = match args.http_bind {
            Some(a) => Some(
                tokio::net::TcpListener::bind(a)
                    .await
                    .map_err(|e| CliError::transport(format!("bind {a}: {e}")))?,
            ),
            None => None,
        };
        let addr = listener.local_addr()?;
        {
            let mut out = std::io::stdout().lock();
            match &http {
                Some(h) => writeln!(out, "listening ndjson={addr} http={}", h.local_addr()?)?,
                None => writeln!(out, "listening ndjson={addr}")?,
            }
            out.flush()?;
        }
        tracing::info!(passages = service.index().len(), "serving public corpus on {addr}");
        let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
        let http_task = http.map(|l| {
            let svc = service.clone();
            let mut rx = stop_rx.clone();
            tokio::spawn(async move {
                let _ = serve_http(l, svc, async move {
                    let _ = rx.changed().await;
                })
                .await;
            })
        });
        serve_ndjson(listener, service, shutdown_signal()).await;
        let _ = stop_tx.send(true);
        if let Some(t) = http_task {
            let _ = t.await;
        }
        tracing::info!("shut down");
        Ok(())
    })
}
