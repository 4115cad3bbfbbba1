use std::process::ExitCode;

use thiserror::Error;

use twoscope_core::corpus::CorpusError;
use twoscope_core::enclave::{EnclaveError, OrchestrateError};
use twoscope_core::index::IndexError;
use twoscope_core::metrics::MetricsError;
use twoscope_core::multihop::{BeamError, HopError};
use twoscope_core::reader::ReaderError;
use twoscope_core::selective::SelectiveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage = 2,
    Data = 3,
    Policy = 4,
    Transport = 5,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: Kind::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: Kind::Data, message: message.into() }
    }

    pub fn policy(message: impl Into<String>) -> Self {
        Self { kind: Kind::Policy, message: message.into() }
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self { kind: Kind::Transport, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }

    /// Prefixes the message with what was being attempted.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<ReaderError> for CliError {
    fn from(e: ReaderError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<SelectiveError> for CliError {
    fn from(e: SelectiveError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<EnclaveError> for CliError {
    fn from(e: EnclaveError) -> Self {
        match e {
            EnclaveError::Violation(_) => Self::policy(e.to_string()),
            _ => Self::transport(e.to_string()),
        }
    }
}

impl From<HopError> for CliError {
    fn from(e: HopError) -> Self {
        match e {
            HopError::Violation(_) => Self::policy(e.to_string()),
            HopError::Remote(_) => Self::transport(e.to_string()),
            HopError::NoIndex(_) => Self::usage(e.to_string()),
            HopError::Index(_) => Self::data(e.to_string()),
        }
    }
}

impl From<BeamError> for CliError {
    fn from(e: BeamError) -> Self {
        match e {
            BeamError::Hop(h) => h.into(),
            BeamError::InvalidConfig(_) => Self::usage(e.to_string()),
            BeamError::Compose(_) => Self::data(e.to_string()),
        }
    }
}

impl From<OrchestrateError> for CliError {
    fn from(e: OrchestrateError) -> Self {
        match e {
            OrchestrateError::NoPublicSide(_) => Self::usage(e.to_string()),
            OrchestrateError::Beam(b) => b.into(),
            OrchestrateError::Reader(r) => r.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::data(e.to_string())
    }
}
