//! The boundary between the private orchestrator and the public service.
//!
//! Public retrievals leave the private enclave as newline-delimited JSON
//! requests. Every send goes through [`Gateway`], which checks the policy,
//! appends an audit record, and only then writes to the transport.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Scope;
use crate::index::ScoredHit;
use crate::multihop::{beam_search, BeamConfig, BeamError, Chain, HopError, HopRetriever, IndexTarget, LocalIndices, RetrievedPassage, Retriever};
use crate::policy::{check_outbound, PrivacyMode, Violation};
use crate::reader::{answer, confidence, AnswerCandidate, ConfidenceKind, Reader, ReaderError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireOp {
    Handshake,
    SparseSearch,
    DenseSearch,
}

impl From<Retriever> for WireOp {
    fn from(r: Retriever) -> Self {
        match r {
            Retriever::Dense => WireOp::DenseSearch,
            Retriever::Sparse => WireOp::SparseSearch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: String,
    pub op: WireOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl WireRequest {
    pub fn handshake(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            op: WireOp::Handshake,
            query_text: None,
            k: None,
        }
    }

    pub fn search(id: impl Into<String>, op: WireOp, query_text: impl Into<String>, k: usize) -> Self {
        Self {
            id: id.into(),
            op,
            query_text: Some(query_text.into()),
            k: Some(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireHit {
    pub passage_id: String,
    pub score: f64,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshakeInfo {
    pub protocol_version: u32,
    pub embedder_fingerprint: String,
    pub corpus_passage_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: String,
    pub status: WireStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hits: Option<Vec<WireHit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handshake: Option<HandshakeInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

impl WireResponse {
    pub fn hits(id: impl Into<String>, hits: Vec<WireHit>) -> Self {
        Self {
            id: id.into(),
            status: WireStatus::Ok,
            hits: Some(hits),
            handshake: None,
            error_message: None,
        }
    }

    pub fn handshake(id: impl Into<String>, info: HandshakeInfo) -> Self {
        Self {
            id: id.into(),
            status: WireStatus::Ok,
            hits: None,
            handshake: Some(info),
            error_message: None,
        }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            status: WireStatus::Error,
            hits: None,
            handshake: None,
            error_message: Some(message.into()),
        }
    }
}

/// One compact JSON object, no trailing newline. JSON string escaping
/// guarantees the result contains no raw newline.
pub fn to_line<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("wire messages serialize")
}

pub fn parse_line<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(line.trim_end_matches(['\n', '\r']))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub destination_scope: Scope,
    /// SHA-256 of the payload, hex.
    pub payload_hash: String,
    pub payload_bytes: usize,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    #[serde(flatten)]
    pub record: AuditRecord,
    /// Full payload text. Stays local.
    pub payload: String,
}

pub fn payload_hash(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()))
}

/// Append-only, shareable log of outbound messages.
#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    entries: Arc<Mutex<Vec<AuditEntry>>>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Vec<AuditEntry>> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn append(&self, destination: Scope, payload: &str) -> AuditRecord {
        let mut entries = self.lock();
        let record = AuditRecord {
            seq: entries.len() as u64 + 1,
            destination_scope: destination,
            payload_hash: payload_hash(payload),
            payload_bytes: payload.len(),
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        entries.push(AuditEntry {
            record: record.clone(),
            payload: payload.to_string(),
        });
        record
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.lock().is_empty()
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.lock().clone()
    }

    /// Entries with `seq > after`.
    pub fn entries_since(&self, after: u64) -> Vec<AuditEntry> {
        self.lock().iter().filter(|e| e.record.seq > after).cloned().collect()
    }

    pub fn last_seq(&self) -> u64 {
        self.lock().last().map_or(0, |e| e.record.seq)
    }

    pub fn write_jsonl(&self, path: &Path) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for e in self.lock().iter() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Counts of outbound records per destination.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub outbound: usize,
    pub outbound_bytes: usize,
    pub by_destination: BTreeMap<Scope, usize>,
}

impl AuditSummary {
    pub fn of(entries: &[AuditEntry]) -> Self {
        let mut s = Self::default();
        for e in entries {
            if e.record.destination_scope == Scope::Public {
                s.outbound += 1;
                s.outbound_bytes += e.record.payload_bytes;
            }
            *s.by_destination.entry(e.record.destination_scope).or_default() += 1;
        }
        s
    }
}

/// A reliable, ordered stream of text lines. `send_line` appends the '\n'.
pub trait LineTransport: Send {
    fn send_line(&mut self, line: &str) -> io::Result<()>;
    fn recv_line(&mut self) -> io::Result<String>;
}

#[derive(Debug, Error)]
pub enum EnclaveError {
    #[error("policy violation: {0}")]
    Violation(#[from] Violation),
    #[error("embedder fingerprint mismatch: expected {expected}, public side has {got}")]
    FingerprintMismatch { expected: String, got: String },
    #[error("protocol version mismatch: expected {PROTOCOL_VERSION}, public side speaks {0}")]
    ProtocolVersion(u32),
    #[error("dense search requires a verified handshake")]
    HandshakeRequired,
    #[error("transport: {0}")]
    Transport(#[from] io::Error),
    #[error("response id mismatch: sent {sent:?}, got {got:?}")]
    IdMismatch { sent: String, got: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("public service error: {0}")]
    Remote(String),
}

/// The single choke point for traffic to the public enclave.
pub struct Gateway {
    transport: Box<dyn LineTransport>,
    audit: AuditLog,
    next_id: u64,
    handshake: Option<HandshakeInfo>,
    dense_verified: bool,
}

impl Gateway {
    pub fn new(transport: Box<dyn LineTransport>, audit: AuditLog) -> Self {
        Self {
            transport,
            audit,
            next_id: 0,
            handshake: None,
            dense_verified: false,
        }
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn handshake_info(&self) -> Option<&HandshakeInfo> {
        self.handshake.as_ref()
    }

    fn fresh_id(&mut self, prefix: &str) -> String {
        self.next_id += 1;
        format!("{prefix}{}", self.next_id)
    }

    /// Policy check, then audit, then send; nothing is written on violation.
    fn exchange(&mut self, mode: PrivacyMode, taint: Scope, request: &WireRequest) -> Result<WireResponse, EnclaveError> {
        check_outbound(mode, taint, Scope::Public)?;
        let line = to_line(request);
        self.audit.append(Scope::Public, &line);
        self.transport.send_line(&line)?;
        let reply = self.transport.recv_line()?;
        let response: WireResponse = parse_line(&reply).map_err(|e| EnclaveError::Malformed(e.to_string()))?;
        if response.id != request.id {
            return Err(EnclaveError::IdMismatch {
                sent: request.id.clone(),
                got: response.id,
            });
        }
        if response.status == WireStatus::Error {
            return Err(EnclaveError::Remote(response.error_message.unwrap_or_default()));
        }
        Ok(response)
    }

    /// Exchanges version and fingerprint. Dense searches are allowed only
    /// after a handshake that matched `expected_fingerprint`.
    pub fn handshake(&mut self, mode: PrivacyMode, expected_fingerprint: Option<&str>) -> Result<HandshakeInfo, EnclaveError> {
        let id = self.fresh_id("h");
        let response = self.exchange(mode, Scope::Public, &WireRequest::handshake(id))?;
        let info = response
            .handshake
            .ok_or_else(|| EnclaveError::Malformed("handshake response without handshake body".into()))?;
        if info.protocol_version != PROTOCOL_VERSION {
            return Err(EnclaveError::ProtocolVersion(info.protocol_version));
        }
        self.handshake = Some(info.clone());
        self.dense_verified = false;
        if let Some(expected) = expected_fingerprint {
            if expected != info.embedder_fingerprint {
                return Err(EnclaveError::FingerprintMismatch {
                    expected: expected.to_string(),
                    got: info.embedder_fingerprint,
                });
            }
            self.dense_verified = true;
        }
        Ok(info)
    }

    pub fn remote_search(&mut self, mode: PrivacyMode, taint: Scope, request: &WireRequest) -> Result<Vec<WireHit>, EnclaveError> {
        // Policy comes first so a refused request never reaches the other
        // checks or the wire.
        check_outbound(mode, taint, Scope::Public)?;
        if request.op == WireOp::DenseSearch && !self.dense_verified {
            return Err(EnclaveError::HandshakeRequired);
        }
        let response = self.exchange(mode, taint, request)?;
        response
            .hits
            .ok_or_else(|| EnclaveError::Malformed("search response without hits".into()))
    }

    /// Sends every request before reading any response, then matches
    /// responses to requests by id. Results are in request order.
    pub fn remote_search_pipelined(
        &mut self,
        mode: PrivacyMode,
        taint: Scope,
        requests: &[WireRequest],
    ) -> Result<Vec<Vec<WireHit>>, EnclaveError> {
        check_outbound(mode, taint, Scope::Public)?;
        if requests.iter().any(|r| r.op == WireOp::DenseSearch) && !self.dense_verified {
            return Err(EnclaveError::HandshakeRequired);
        }
        let mut slots: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, r) in requests.iter().enumerate() {
            if slots.insert(&r.id, i).is_some() {
                return Err(EnclaveError::Malformed(format!("duplicate request id {:?}", r.id)));
            }
        }
        for r in requests {
            let line = to_line(r);
            self.audit.append(Scope::Public, &line);
            self.transport.send_line(&line)?;
        }
        let mut out: Vec<Option<Vec<WireHit>>> = vec![None; requests.len()];
        for _ in requests {
            let reply = self.transport.recv_line()?;
            let response: WireResponse = parse_line(&reply).map_err(|e| EnclaveError::Malformed(e.to_string()))?;
            let slot = match slots.remove(response.id.as_str()) {
                Some(i) => i,
                None => {
                    return Err(EnclaveError::IdMismatch {
                        sent: slots.keys().next().map(|s| s.to_string()).unwrap_or_default(),
                        got: response.id,
                    })
                }
            };
            if response.status == WireStatus::Error {
                return Err(EnclaveError::Remote(response.error_message.unwrap_or_default()));
            }
            out[slot] = Some(
                response
                    .hits
                    .ok_or_else(|| EnclaveError::Malformed("search response without hits".into()))?,
            );
        }
        Ok(out.into_iter().map(|h| h.expect("every slot filled")).collect())
    }

    pub fn search(&mut self, mode: PrivacyMode, taint: Scope, retriever: Retriever, query: &str, k: usize) -> Result<Vec<WireHit>, EnclaveError> {
        let id = self.fresh_id("r");
        self.remote_search(mode, taint, &WireRequest::search(id, retriever.into(), query, k))
    }
}

/// Private indices searched locally; public ones through the gateway.
pub struct EnclaveRetriever<'a> {
    pub mode: PrivacyMode,
    pub local: &'a LocalIndices,
    pub gateway: Option<&'a mut Gateway>,
}

impl HopRetriever for EnclaveRetriever<'_> {
    fn retrieve(
        &mut self,
        target: IndexTarget,
        retriever: Retriever,
        query: &str,
        k: usize,
        taint: Scope,
    ) -> Result<Vec<RetrievedPassage>, HopError> {
        match (target, self.gateway.as_deref_mut()) {
            (IndexTarget::Scoped(Scope::Public), Some(gw)) => {
                let hits = gw.search(self.mode, taint, retriever, query, k).map_err(|e| match e {
                    EnclaveError::Violation(v) => HopError::Violation(v),
                    other => HopError::Remote(other.to_string()),
                })?;
                Ok(hits
                    .into_iter()
                    .map(|h| RetrievedPassage {
                        hit: ScoredHit {
                            passage_id: h.passage_id,
                            score: h.score,
                            scope: Scope::Public,
                        },
                        title: h.title,
                        text: h.text,
                    })
                    .collect())
            }
            _ => self.local.search(target, retriever, query, k),
        }
    }
}

#[derive(Debug, Error)]
pub enum OrchestrateError {
    #[error("{0} needs a public index or a connection to the public service")]
    NoPublicSide(PrivacyMode),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Reader(#[from] ReaderError),
}

#[derive(Debug, Clone)]
pub struct Orchestration {
    pub answer: AnswerCandidate,
    pub confidence: f64,
    pub chains: Vec<Chain>,
    pub candidates: Vec<AnswerCandidate>,
    /// Records appended during this run.
    pub audit: Vec<AuditEntry>,
}

/// Full pipeline for one question: beam search with public hops realized
/// remotely, then local answer extraction and confidence.
pub fn orchestrate(
    question: &str,
    local: &LocalIndices,
    gateway: Option<&mut Gateway>,
    config: &BeamConfig,
    reader: &dyn Reader,
    confidence_kind: ConfidenceKind,
) -> Result<Orchestration, OrchestrateError> {
    let has_local_public = local.get(IndexTarget::Scoped(Scope::Public)).is_some();
    if config.mode.uses_public()
        && config.mode != PrivacyMode::NoPrivacySingleIndex
        && gateway.is_none()
        && !has_local_public
    {
        return Err(OrchestrateError::NoPublicSide(config.mode));
    }
    let audit_start = gateway.as_ref().map(|g| (g.audit().clone(), g.audit().last_seq()));
    let mut retriever = EnclaveRetriever {
        mode: config.mode,
        local,
        gateway,
    };
    let chains = beam_search(question, &mut retriever, config)?;
    let audit = audit_start
        .map(|(log, start)| log.entries_since(start))
        .unwrap_or_default();
    if chains.is_empty() {
        return Ok(Orchestration {
            answer: AnswerCandidate {
                answer_text: String::new(),
                chain: Chain::empty(question),
                reader_score: 0.0,
            },
            confidence: 0.0,
            chains,
            candidates: Vec::new(),
            audit,
        });
    }
    let (best, candidates) = answer(question, &chains, reader)?;
    let conf = confidence(confidence_kind, &candidates)?;
    Ok(Orchestration {
        answer: best,
        confidence: conf,
        chains,
        candidates,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn requests_serialize_compactly() {
        let r = WireRequest::search("r1", WireOp::DenseSearch, "who\nleads?", 5);
        let line = to_line(&r);
        assert_eq!(line, r#"{"id":"r1","op":"dense_search","query_text":"who\nleads?","k":5}"#);
        assert!(!line.contains('\n'));
        assert_eq!(parse_line::<WireRequest>(&line).unwrap(), r);
        assert_eq!(to_line(&WireRequest::handshake("h")), r#"{"id":"h","op":"handshake"}"#);
    }

    #[test]
    fn responses_serialize_compactly() {
        let r = WireResponse::error("x", "k must be ≥ 1");
        assert_eq!(to_line(&r), r#"{"id":"x","status":"error","error_message":"k must be ≥ 1"}"#);
    }

    /// Replays canned responses and records what was sent.
    struct Canned {
        sent: Arc<Mutex<Vec<String>>>,
        replies: VecDeque<String>,
    }

    impl LineTransport for Canned {
        fn send_line(&mut self, line: &str) -> io::Result<()> {
            self.sent.lock().unwrap().push(line.to_string());
            Ok(())
        }
        fn recv_line(&mut self) -> io::Result<String> {
            self.replies
                .pop_front()
                .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "closed"))
        }
    }

    fn gateway(replies: &[WireResponse]) -> (Gateway, Arc<Mutex<Vec<String>>>) {
        let sent = Arc::new(Mutex::new(Vec::new()));
        let t = Canned {
            sent: sent.clone(),
            replies: replies.iter().map(to_line).collect(),
        };
        (Gateway::new(Box::new(t), AuditLog::new()), sent)
    }

    fn hs(fp: &str) -> WireResponse {
        WireResponse::handshake(
            "h1",
            HandshakeInfo {
                protocol_version: PROTOCOL_VERSION,
                embedder_fingerprint: fp.into(),
                corpus_passage_count: 3,
            },
        )
    }

    #[test]
    fn query_privacy_sends_nothing() {
        let (mut gw, sent) = gateway(&[]);
        let req = WireRequest::search("r1", WireOp::SparseSearch, "q", 3);
        let err = gw.remote_search(PrivacyMode::QueryPrivacy, Scope::Public, &req).unwrap_err();
        assert!(matches!(err, EnclaveError::Violation(_)));
        assert!(sent.lock().unwrap().is_empty());
        assert!(gw.audit().is_empty());
    }

    #[test]
    fn private_taint_is_refused_under_document_privacy() {
        let (mut gw, sent) = gateway(&[]);
        let req = WireRequest::search("r1", WireOp::DenseSearch, "q", 3);
        let err = gw.remote_search(PrivacyMode::DocumentPrivacy, Scope::Private, &req).unwrap_err();
        assert!(matches!(err, EnclaveError::Violation(v) if v.taint == Scope::Private));
        assert!(sent.lock().unwrap().is_empty());
    }

    #[test]
    fn allowed_search_is_audited_before_sending() {
        let (mut gw, sent) = gateway(&[WireResponse::hits("r1", vec![])]);
        let req = WireRequest::search("r1", WireOp::SparseSearch, "q", 3);
        gw.remote_search(PrivacyMode::DocumentPrivacy, Scope::Public, &req).unwrap();
        let log = gw.audit().entries();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].record.payload_hash, payload_hash(&to_line(&req)));
        assert_eq!(log[0].record.destination_scope, Scope::Public);
        assert_eq!(sent.lock().unwrap().as_slice(), [to_line(&req)]);
    }

    #[test]
    fn handshake_checks_fingerprint_and_gates_dense() {
        let (mut gw, _) = gateway(&[hs("abc")]);
        let err = gw.handshake(PrivacyMode::DocumentPrivacy, Some("xyz")).unwrap_err();
        assert!(matches!(err, EnclaveError::FingerprintMismatch { .. }));
        let req = WireRequest::search("r1", WireOp::DenseSearch, "q", 3);
        assert!(matches!(
            gw.remote_search(PrivacyMode::DocumentPrivacy, Scope::Public, &req),
            Err(EnclaveError::HandshakeRequired)
        ));

        let (mut gw, _) = gateway(&[hs("abc"), WireResponse::hits("r1", vec![])]);
        gw.handshake(PrivacyMode::DocumentPrivacy, Some("abc")).unwrap();
        assert!(gw.remote_search(PrivacyMode::DocumentPrivacy, Scope::Public, &req).is_ok());
    }

    #[test]
    fn wrong_response_id_is_an_error() {
        let (mut gw, _) = gateway(&[WireResponse::hits("other", vec![])]);
        let req = WireRequest::search("r1", WireOp::SparseSearch, "q", 3);
        assert!(matches!(
            gw.remote_search(PrivacyMode::NoPrivacyMultiIndex, Scope::Public, &req),
            Err(EnclaveError::IdMismatch { .. })
        ));
    }

    #[test]
    fn remote_errors_surface() {
        let (mut gw, _) = gateway(&[WireResponse::error("r1", "k must be ≥ 1")]);
        let req = WireRequest::search("r1", WireOp::SparseSearch, "q", 0);
        let err = gw.remote_search(PrivacyMode::NoPrivacyMultiIndex, Scope::Public, &req).unwrap_err();
        assert!(err.to_string().contains("k must be"));
    }

    #[test]
    fn audit_summary_counts_public_records() {
        let log = AuditLog::new();
        log.append(Scope::Public, "abc");
        log.append(Scope::Public, "de");
        let s = AuditSummary::of(&log.entries());
        assert_eq!((s.outbound, s.outbound_bytes), (2, 5));
        assert_eq!(log.entries_since(1).len(), 1);
        let seqs: Vec<u64> = log.entries().iter().map(|e| e.record.seq).collect();
        assert_eq!(seqs, [1, 2]);
    }
}
