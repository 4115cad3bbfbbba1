//! Multi-hop retrieval over a public/private corpus pair.
//!
//! Passages live in one of two scopes. Retrieval runs an iterative beam
//! search whose hop queries are gated by a Bell-LaPadula style policy: once
//! a query has been composed from private content it may no longer be sent
//! to the public side. The crate also carries the readers, selective
//! prediction, and evaluation tooling used to measure what that policy
//! costs in answer quality.

pub mod corpus;
pub mod enclave;
pub mod index;
pub mod metrics;
pub mod multihop;
pub mod policy;
pub mod reader;
pub mod selective;
pub mod synthetic;
pub mod text;

pub use corpus::{BenchmarkExample, Corpus, Passage, PathLabel, Scope};
pub use index::{DenseIndex, Embedder, HashedTfidfEmbedder, ScoredHit, SparseIndex};
pub use multihop::{BeamConfig, Chain, Hop};
pub use policy::PrivacyMode;
