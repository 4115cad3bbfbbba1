//! Turns a [`RunConfig`] into loaded corpora, local indices and, when the
//! mode needs it, a connected gateway to the public service.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use twoscope_core::corpus::{load_corpus, Corpus, Scope};
use twoscope_core::enclave::{AuditLog, Gateway};
use twoscope_core::index::{Embedder, HashedTfidfEmbedder, PassageIndex, PrecomputedEmbedder};
use twoscope_core::multihop::LocalIndices;
use twoscope_core::policy::PrivacyMode;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::store::{self, EmbedderMeta};

pub struct Env {
    pub public: Option<Corpus>,
    pub private: Corpus,
    pub local: LocalIndices,
    pub gateway: Option<Gateway>,
    pub audit: AuditLog,
}

fn read_vectors(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    PrecomputedEmbedder::read_vectors(BufReader::new(file)).map_err(|e| CliError::from(e).context(path.display()))
}

/// The run's embedder, and the fingerprint the public service must report.
pub fn embedders(config: &RunConfig, public: Option<&Corpus>) -> Result<(Arc<dyn Embedder>, String)> {
    if config.vectors.is_empty() {
        let e = HashedTfidfEmbedder::new(config.embedder)?;
        let fp = e.fingerprint();
        return Ok((Arc::new(e), fp));
    }
    let mut passages = HashMap::new();
    for path in &config.vectors {
        passages.extend(read_vectors(path)?);
    }
    let queries = match &config.query_vectors {
        Some(p) => read_vectors(p)?,
        None => HashMap::new(),
    };
    let public_fp = match public {
        Some(c) => {
            let subset = passages
                .iter()
                .filter(|(id, _)| c.contains(id))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            PrecomputedEmbedder::new(subset, queries.clone())?.fingerprint()
        }
        None => String::new(),
    };
    let e = PrecomputedEmbedder::new(passages, queries)?;
    let fp = if public.is_some() { public_fp } else { e.fingerprint() };
    Ok((Arc::new(e), fp))
}

pub fn scope_dir(config: &RunConfig, scope: Scope) -> Option<PathBuf> {
    let dir = config.index_dir.as_ref()?.join(scope.as_str());
    dir.join("meta.json").exists().then_some(dir)
}

pub fn corpus_for(config: &RunConfig, scope: Scope) -> Result<Option<Corpus>> {
    let path = match scope {
        Scope::Public => &config.public_corpus,
        Scope::Private => &config.private_corpus,
    };
    if let Some(p) = path {
        return Ok(Some(load_corpus(p, scope).map_err(|e| CliError::from(e).context(p.display()))?));
    }
    match scope_dir(config, scope) {
        Some(dir) => Ok(Some(load_corpus(&dir.join("corpus.jsonl"), scope)?)),
        None => Ok(None),
    }
}

/// Reuses a persisted index when it was built with the same settings.
pub fn index_for(config: &RunConfig, corpus: &Corpus, embedder: &Arc<dyn Embedder>) -> Result<PassageIndex> {
    let explicit = match corpus.scope() {
        Scope::Public => config.public_corpus.is_some(),
        Scope::Private => config.private_corpus.is_some(),
    };
    if let (false, true, Some(dir)) = (explicit, config.vectors.is_empty(), scope_dir(config, corpus.scope())) {
        let meta = store::read_meta(&dir)?;
        if meta.embedder == EmbedderMeta::Hashed(config.embedder) && meta.bm25 == config.bm25 {
            return Ok(store::load(&dir, corpus.scope())?.1);
        }
        tracing::info!("{} was built with other settings; rebuilding in memory", dir.display());
    }
    Ok(PassageIndex::from_corpus(corpus, embedder.clone(), config.bm25)?)
}

pub struct Needs {
    /// Public corpus must be available locally (labels, gold chains).
    pub public_corpus: bool,
    /// The run performs retrieval.
    pub retrieval: bool,
}

pub fn prepare(config: &RunConfig, needs: Needs) -> Result<Env> {
    let mode = config.beam.mode;
    let private = corpus_for(config, Scope::Private)?
        .ok_or_else(|| CliError::usage("a private corpus is required (--private-corpus or --index-dir)"))?;
    let public = corpus_for(config, Scope::Public)?;
    if needs.public_corpus && public.is_none() {
        return Err(CliError::usage("a public corpus is required (--public-corpus or --index-dir)"));
    }
    let remote = needs.retrieval
        && mode.uses_public()
        && mode != PrivacyMode::NoPrivacySingleIndex
        && config.service_addr.is_some();
    let local_public = needs.retrieval && mode.uses_public() && !remote;
    if local_public && public.is_none() {
        return Err(CliError::usage(format!(
            "mode {mode} needs a public corpus or a public service (--service)"
        )));
    }

    let (embedder, public_fp) = embedders(config, public.as_ref())?;
    let mut local = LocalIndices::new();
    if needs.retrieval {
        local = local.with_scope(index_for(config, &private, &embedder)?, Scope::Private);
        if local_public {
            let public = public.as_ref().expect("checked above");
            if mode == PrivacyMode::NoPrivacySingleIndex {
                let merged = PassageIndex::build(public.passages().chain(private.passages()), embedder.clone(), config.bm25)?;
                local = local.with_merged(merged);
            } else {
                local = local.with_scope(index_for(config, public, &embedder)?, Scope::Public);
            }
        }
    }

    let audit = AuditLog::new();
    let gateway = if remote {
        let addr = config.service_addr.as_deref().expect("checked above");
        let timeout = Some(Duration::from_millis(config.connect_timeout_ms.max(1)));
        let (gw, info) = twoscope_client::connect(addr, audit.clone(), mode, Some(&public_fp), timeout)
            .map_err(|e| CliError::from(e).context(format!("public service {addr}")))?;
        tracing::info!(passages = info.corpus_passage_count, "connected to public service at {addr}");
        Some(gw)
    } else {
        None
    };

    Ok(Env {
        public,
        private,
        local,
        gateway,
        audit,
    })
}
