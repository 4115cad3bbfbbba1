//! Public retrieval service.
//!
//! Speaks newline-delimited JSON over TCP. Requests on one connection are
//! processed concurrently and answered as they complete, so responses may
//! arrive out of order; clients match them by `id`. The same operations are
//! mirrored over HTTP for tooling.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};

use twoscope_core::corpus::Scope;
use twoscope_core::enclave::{to_line, HandshakeInfo, WireHit, WireOp, WireRequest, WireResponse, PROTOCOL_VERSION};
use twoscope_core::index::PassageIndex;

/// Requests larger than this are answered with an error and the connection
/// is closed.
pub const MAX_LINE_BYTES: usize = 1 << 20;

#[derive(Debug)]
pub struct NotPublic {
    pub passage_id: String,
}

impl std::fmt::Display for NotPublic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "refusing to serve private passage {:?}", self.passage_id)
    }
}

impl std::error::Error for NotPublic {}

/// Immutable public index plus the request handler.
#[derive(Debug, Clone)]
pub struct PublicService {
    index: Arc<PassageIndex>,
}

impl PublicService {
    pub fn new(index: PassageIndex) -> Result<Self, NotPublic> {
        if let Some(p) = index.passages().find(|p| p.scope != Scope::Public) {
            return Err(NotPublic {
                passage_id: p.id.clone(),
            });
        }
        Ok(Self { index: Arc::new(index) })
    }

    pub fn index(&self) -> &PassageIndex {
        &self.index
    }

    pub fn handshake_info(&self) -> HandshakeInfo {
        HandshakeInfo {
            protocol_version: PROTOCOL_VERSION,
            embedder_fingerprint: self.index.embedder().fingerprint(),
            corpus_passage_count: self.index.len(),
        }
    }

    /// Answers one request line. Pure: the result depends only on the line
    /// and the index.
    pub fn respond(&self, line: &str) -> WireResponse {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return WireResponse::error("unknown", format!("malformed request: {e}")),
        };
        let id = match value.get("id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => "unknown".to_string(),
        };
        match value.get("op").and_then(|v| v.as_str()) {
            Some("handshake" | "sparse_search" | "dense_search") => {}
            Some(op) => return WireResponse::error(id, format!("unknown op {op:?}")),
            None => return WireResponse::error(id, "missing op"),
        }
        let request: WireRequest = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return WireResponse::error(id, format!("malformed request: {e}")),
        };
        self.handle(request)
    }

    pub fn handle(&self, request: WireRequest) -> WireResponse {
        let id = request.id;
        if request.op == WireOp::Handshake {
            return WireResponse::handshake(id, self.handshake_info());
        }
        let k = match request.k {
            Some(k) if k >= 1 => k,
            _ => return WireResponse::error(id, "k must be ≥ 1"),
        };
        let Some(query) = request.query_text else {
            return WireResponse::error(id, "query_text is required");
        };
        let hits = match request.op {
            WireOp::SparseSearch => self.index.sparse_search(&query, k),
            WireOp::DenseSearch => match self.index.dense_search(&query, k) {
                Ok(h) => h,
                Err(e) => return WireResponse::error(id, e.to_string()),
            },
            WireOp::Handshake => unreachable!(),
        };
        let hits = hits
            .into_iter()
            .map(|h| {
                let p = self.index.get(&h.passage_id).expect("hit resolves in its own index");
                WireHit {
                    passage_id: h.passage_id,
                    score: h.score,
                    title: p.title.clone(),
                    text: p.text.clone(),
                }
            })
            .collect();
        WireResponse::hits(id, hits)
    }
}

async fn handle_connection(service: PublicService, stream: TcpStream) {
    let peer = stream.peer_addr().ok();
    let (read, mut write) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(mut line) = rx.recv().await {
            line.push('\n');
            if write.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
        let _ = write.shutdown().await;
    });

    let mut reader = BufReader::new(read);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = match (&mut reader).take(MAX_LINE_BYTES as u64 + 1).read_until(b'\n', &mut buf).await {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) => {
                tracing::debug!(?peer, "read error: {e}");
                break;
            }
        };
        if n > MAX_LINE_BYTES && buf.last() != Some(&b'\n') {
            let _ = tx.send(to_line(&WireResponse::error("unknown", "request line too long")));
            break;
        }
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim_end_matches(['\n', '\r']).to_string(),
            Err(_) => {
                let _ = tx.send(to_line(&WireResponse::error("unknown", "request is not UTF-8")));
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let service = service.clone();
        let tx = tx.clone();
        tokio::spawn(async move {
            let response = service.respond(&line);
            let _ = tx.send(to_line(&response));
        });
    }
    drop(tx);
    let _ = writer.await;
}

/// Accepts connections until `shutdown` resolves.
pub async fn serve_ndjson(listener: TcpListener, service: PublicService, shutdown: impl Future<Output = ()>) {
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, _)) => {
                    let _ = stream.set_nodelay(true);
                    tokio::spawn(handle_connection(service.clone(), stream));
                }
                Err(e) => tracing::warn!("accept failed: {e}"),
            },
        }
    }
}

async fn http_handshake(State(service): State<PublicService>) -> Json<WireResponse> {
    Json(WireResponse::handshake("http", service.handshake_info()))
}

async fn http_request(State(service): State<PublicService>, body: String) -> Json<WireResponse> {
    Json(service.respond(&body))
}

pub fn router(service: PublicService) -> Router {
    Router::new()
        .route("/v1/handshake", get(http_handshake))
        .route("/v1/request", post(http_request))
        .with_state(service)
}

pub async fn serve_http(listener: TcpListener, service: PublicService, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}

/// A service running on its own runtime thread, for tests and embedding in
/// synchronous programs. Dropping it shuts the service down.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (and `http_addr`, if given) and serves on a background thread.
pub fn spawn(service: PublicService, addr: SocketAddr, http_addr: Option<SocketAddr>) -> std::io::Result<ServiceHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let (listener, http) = runtime.block_on(async {
        let l = TcpListener::bind(addr).await?;
        let h = match http_addr {
            Some(a) => Some(TcpListener::bind(a).await?),
            None => None,
        };
        Ok::<_, std::io::Error>((l, h))
    })?;
    let bound = listener.local_addr()?;
    let http_bound = http.as_ref().map(|l| l.local_addr()).transpose()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::spawn(move || {
        runtime.block_on(async move {
            let (stop_http_tx, stop_http_rx) = oneshot::channel::<()>();
            let http_task = http.map(|l| {
                let svc = service.clone();
                tokio::spawn(async move {
                    let _ = serve_http(l, svc, async move {
                        let _ = stop_http_rx.await;
                    })
                    .await;
                })
            });
            serve_ndjson(listener, service, async move {
                let _ = rx.await;
            })
            .await;
            let _ = stop_http_tx.send(());
            if let Some(t) = http_task {
                let _ = t.await;
            }
        });
        runtime.shutdown_background();
    });
    Ok(ServiceHandle {
        addr: bound,
        http_addr: http_bound,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use twoscope_core::corpus::{Corpus, Passage};
    use twoscope_core::enclave::WireStatus;
    use twoscope_core::index::{Bm25Params, HashedConfig, HashedTfidfEmbedder};

    fn service() -> PublicService {
        let corpus = Corpus::new(
            Scope::Public,
            [
                Passage::new("d1", "", "enron trading scandal", Scope::Public),
                Passage::new("d2", "", "enron enron energy", Scope::Public),
            ],
        )
        .unwrap();
        let embedder = Arc::new(HashedTfidfEmbedder::new(HashedConfig::default()).unwrap());
        PublicService::new(PassageIndex::from_corpus(&corpus, embedder, Bm25Params::default()).unwrap()).unwrap()
    }

    #[test]
    fn handshake_reports_version_and_fingerprint() {
        let s = service();
        let r = s.respond(r#"{"id":"a","op":"handshake"}"#);
        let h = r.handshake.unwrap();
        assert_eq!(r.id, "a");
        assert_eq!(h.protocol_version, 1);
        assert_eq!(h.embedder_fingerprint, s.index().embedder().fingerprint());
        assert_eq!(h.corpus_passage_count, 2);
    }

    #[test]
    fn k_zero_is_rejected() {
        let r = service().respond(r#"{"id":"z","op":"sparse_search","query_text":"enron","k":0}"#);
        assert_eq!(r.status, WireStatus::Error);
        assert_eq!(r.error_message.as_deref(), Some("k must be ≥ 1"));
        assert_eq!(r.id, "z");
    }

    #[test]
    fn malformed_and_unknown_requests() {
        let s = service();
        assert_eq!(s.respond("{not json").id, "unknown");
        let r = s.respond(r#"{"id":"q","op":"delete_everything"}"#);
        assert_eq!((r.id.as_str(), r.status), ("q", WireStatus::Error));
        assert!(r.error_message.unwrap().contains("unknown op"));
        let r = s.respond(r#"{"id":"q","op":"dense_search","k":2}"#);
        assert_eq!(r.status, WireStatus::Error);
    }

    #[test]
    fn search_returns_sorted_hits_with_text() {
        let r = service().respond(r#"{"id":"s","op":"sparse_search","query_text":"enron","k":1}"#);
        let hits = r.hits.unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].passage_id, "d2");
        assert_eq!(hits[0].text, "enron enron energy");
    }

    #[test]
    fn private_passages_are_refused() {
        let corpus = Corpus::new(Scope::Private, [Passage::new("p", "", "secret", Scope::Private)]).unwrap();
        let embedder = Arc::new(HashedTfidfEmbedder::new(HashedConfig::default()).unwrap());
        let index = PassageIndex::from_corpus(&corpus, embedder, Bm25Params::default()).unwrap();
        assert!(PublicService::new(index).is_err());
    }
}
