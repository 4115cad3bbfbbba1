use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use twoscope_client::{Metered, TcpTransport};
use twoscope_core::enclave::LineTransport;

/// Echo server that upper-cases each line.
fn echo() -> std::net::SocketAddr {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    thread::spawn(move || {
        let (s, _) = l.accept().unwrap();
        let mut w = s.try_clone().unwrap();
        for line in BufReader::new(s).lines() {
            let line = line.unwrap();
            writeln!(w, "{}", line.to_uppercase()).unwrap();
        }
    });
    addr
}

#[test]
fn lines_are_framed_with_a_single_newline() {
    let (mut t, meter) = Metered::new(TcpTransport::connect(echo(), None).unwrap());
    t.send_line("hello").unwrap();
    t.send_line("{\"a\":\"b\\nc\"}").unwrap();
    assert_eq!(t.recv_line().unwrap(), "HELLO\n");
    assert_eq!(t.recv_line().unwrap(), "{\"A\":\"B\\NC\"}\n");
    assert_eq!(meter.bytes_sent(), 6 + 13);
    assert_eq!(meter.lines_sent().len(), 2);
}

#[test]
fn closed_connection_is_an_error() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    thread::spawn(move || drop(l.accept()));
    let mut t = TcpTransport::connect(addr, None).unwrap();
    assert!(t.recv_line().is_err());
}

#[test]
fn unreachable_address_fails_to_connect() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    assert!(TcpTransport::connect(addr, Some(std::time::Duration::from_secs(2))).is_err());
}
