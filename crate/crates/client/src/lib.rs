//! Blocking client for the public retrieval service.
//!
//! [`TcpTransport`] carries newline-delimited JSON; [`connect`] wraps it in a
//! [`Gateway`] so every request is policy-checked and audited before it is
//! written. [`Metered`] counts what actually reaches the socket.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use twoscope_core::enclave::{AuditLog, EnclaveError, Gateway, HandshakeInfo, LineTransport};
use twoscope_core::policy::PrivacyMode;

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpTransport {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Option<Duration>) -> io::Result<Self> {
        let mut last = io::Error::new(io::ErrorKind::InvalidInput, "address resolved to nothing");
        for a in addr.to_socket_addrs()? {
            let attempt = match timeout {
                Some(t) => TcpStream::connect_timeout(&a, t),
                None => TcpStream::connect(a),
            };
            match attempt {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    stream.set_read_timeout(timeout)?;
                    return Ok(Self {
                        reader: BufReader::new(stream.try_clone()?),
                        writer: stream,
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

impl LineTransport for TcpTransport {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        self.writer.write_all(&buf)
    }

    fn recv_line(&mut self) -> io::Result<String> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "service closed the connection"));
        }
        Ok(line)
    }
}

/// Shared counters for a [`Metered`] transport.
#[derive(Debug, Clone, Default)]
pub struct Meter {
    bytes: Arc<AtomicU64>,
    lines: Arc<Mutex<Vec<String>>>,
}

impl Meter {
    /// Bytes written, newline terminators included.
    pub fn bytes_sent(&self) -> u64 {
        self.bytes.load(Ordering::SeqCst)
    }

    pub fn lines_sent(&self) -> Vec<String> {
        self.lines.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Records every line passed to the inner transport.
pub struct Metered<T> {
    inner: T,
    meter: Meter,
}

impl<T: LineTransport> Metered<T> {
    pub fn new(inner: T) -> (Self, Meter) {
        let meter = Meter::default();
        (
            Self {
                inner,
                meter: meter.clone(),
            },
            meter,
        )
    }
}

impl<T: LineTransport> LineTransport for Metered<T> {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.meter.bytes.fetch_add(line.len() as u64 + 1, Ordering::SeqCst);
        self.meter.lines.lock().unwrap_or_else(|e| e.into_inner()).push(line.to_string());
        self.inner.send_line(line)
    }

    fn recv_line(&mut self) -> io::Result<String> {
        self.inner.recv_line()
    }
}

/// Connects, performs the handshake, and returns a ready gateway.
pub fn connect(
    addr: impl ToSocketAddrs,
    audit: AuditLog,
    mode: PrivacyMode,
    expected_fingerprint: Option<&str>,
    timeout: Option<Duration>,
) -> Result<(Gateway, HandshakeInfo), EnclaveError> {
    let transport = TcpTransport::connect(addr, timeout)?;
    let mut gateway = Gateway::new(Box::new(transport), audit);
    let info = gateway.handshake(mode, expected_fingerprint)?;
    Ok((gateway, info))
}
