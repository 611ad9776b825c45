//! TCP client/server with 2-octet big-endian length-prefixed records.
//!
//! A record `len:2 | frame:len` carries one request or response frame. The
//! length value `0xFFFF` with no body is reserved for an error response.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{Ipv4Addr, Shutdown, SocketAddr, SocketAddrV4, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{ByteMeter, IpParams, TransportError};
use crate::commstack::WireFrame;

/// Length marker of an error response record.
pub const ERROR_RECORD: u16 = 0xFFFF;
/// Largest frame a record can carry.
pub const MAX_TCP_FRAME: usize = 0xFFFE;

const ACCEPT_POLL: Duration = Duration::from_millis(50);

/// Outcome of a server-side request handler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Frame(WireFrame),
    Error,
}

fn write_record(stream: &mut TcpStream, reply: &Reply) -> Result<usize, TransportError> {
    let mut record = Vec::new();
    match reply {
        Reply::Frame(frame) => {
            if frame.len() > MAX_TCP_FRAME {
                return Err(TransportError::Oversize { size: frame.len(), limit: MAX_TCP_FRAME });
            }
            record.extend_from_slice(&(frame.len() as u16).to_be_bytes());
            record.extend_from_slice(frame.as_bytes());
        }
        Reply::Error => record.extend_from_slice(&ERROR_RECORD.to_be_bytes()),
    }
    stream.write_all(&record)?;
    Ok(record.len())
}

/// Reads one record. `Ok(None)` means a clean end of stream before any byte.
fn read_record(stream: &mut TcpStream) -> Result<Option<(Reply, usize)>, TransportError> {
    let mut prefix = [0u8; 2];
    let mut got = 0;
    while got < 2 {
        match stream.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(TransportError::Framing("truncated length prefix".into())),
            Ok(n) => got += n,
            Err(err) if err.kind() == ErrorKind::Interrupted => {}
            Err(err) => return Err(map_read_err(err)),
        }
    }
    let len = u16::from_be_bytes(prefix);
    if len == ERROR_RECORD {
        return Ok(Some((Reply::Error, 2)));
    }
    let mut body = vec![0u8; usize::from(len)];
    stream.read_exact(&mut body).map_err(|err| match err.kind() {
        ErrorKind::UnexpectedEof => TransportError::Framing("truncated record body".into()),
        _ => map_read_err(err),
    })?;
    Ok(Some((Reply::Frame(WireFrame::new(body)), 2 + usize::from(len))))
}

fn map_read_err(err: io::Error) -> TransportError {
    match err.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => TransportError::Timeout,
        ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted | ErrorKind::BrokenPipe => TransportError::Closed,
        _ => TransportError::Io(err),
    }
}

/// A listening server; each accepted connection is served on its own
/// thread, one request at a time.
pub struct TcpServer {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    connections: Arc<Mutex<Vec<TcpStream>>>,
}

impl TcpServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn close(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
        for conn in self.connections.lock().unwrap().drain(..) {
            let _ = conn.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for TcpServer {
    fn drop(&mut self) {
        self.close();
    }
}

/// Listens on `params` and answers every request record with the record
/// produced by `on_request`. A malformed record closes that connection.
pub fn tcp_serve<F>(params: &IpParams, meter: Arc<ByteMeter>, on_request: F) -> Result<TcpServer, TransportError>
where
    F: Fn(WireFrame) -> Reply + Send + Sync + 'static,
{
    let addr = params.socket_addr();
    let listener = TcpListener::bind(addr).map_err(|source| TransportError::Bind { addr, source })?;
    listener.set_nonblocking(true)?;
    let local_addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let connections = Arc::new(Mutex::new(Vec::new()));
    let handler = Arc::new(on_request);

    let stop_flag = Arc::clone(&stop);
    let conns = Arc::clone(&connections);
    let acceptor = thread::Builder::new().name(format!("tcp-accept-{}", local_addr.port())).spawn(move || {
        while !stop_flag.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let _ = stream.set_nonblocking(false);
                    let _ = stream.set_nodelay(true);
                    if let Ok(clone) = stream.try_clone() {
                        conns.lock().unwrap().push(clone);
                    }
                    let handler = Arc::clone(&handler);
                    let meter = Arc::clone(&meter);
                    let spawned = thread::Builder::new()
                        .name(format!("tcp-conn-{peer}"))
                        .spawn(move || serve_connection(stream, &meter, handler.as_ref()));
                    if let Err(err) = spawned {
                        log::warn!("cannot serve {peer}: {err}");
                    }
                }
                Err(err) if err.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(err) => {
                    log::warn!("accept on {local_addr}: {err}");
                    thread::sleep(ACCEPT_POLL);
                }
            }
        }
    })?;
    Ok(TcpServer { local_addr, stop, acceptor: Some(acceptor), connections })
}

fn serve_connection<F>(mut stream: TcpStream, meter: &ByteMeter, handler: &F)
where
    F: Fn(WireFrame) -> Reply,
{
    loop {
        let request = match read_record(&mut stream) {
            Ok(Some((Reply::Frame(frame), n))) => {
                meter.record_rx(n);
                frame
            }
            Ok(Some((Reply::Error, _))) => {
                log::debug!("error marker in request direction; closing connection");
                break;
            }
            Ok(None) => break,
            Err(err) => {
                log::debug!("closing connection: {err}");
                break;
            }
        };
        let reply = handler(request);
        match write_record(&mut stream, &reply) {
            Ok(n) => meter.record_tx(n),
            Err(err) => {
                log::debug!("cannot answer request: {err}");
                break;
            }
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}

/// A client holding one connection open across requests.
///
/// A connection that failed or timed out is discarded; the next request
/// opens a fresh one.
pub struct TcpRequester {
    addr: SocketAddrV4,
    stream: Mutex<Option<TcpStream>>,
    meter: Arc<ByteMeter>,
    connect_timeout: Duration,
}

impl TcpRequester {
    pub fn connect(
        params: &IpParams,
        meter: Arc<ByteMeter>,
        connect_timeout: Duration,
    ) -> Result<Self, TransportError> {
        let requester = TcpRequester { addr: params.socket_addr(), stream: Mutex::new(None), meter, connect_timeout };
        let stream = requester.open()?;
        *requester.stream.lock().unwrap() = Some(stream);
        Ok(requester)
    }

    fn open(&self) -> Result<TcpStream, TransportError> {
        let stream = TcpStream::connect_timeout(&self.addr.into(), self.connect_timeout)
            .map_err(|source| TransportError::Connect { addr: self.addr, source })?;
        stream.set_nodelay(true)?;
        Ok(stream)
    }

    pub fn peer(&self) -> SocketAddrV4 {
        self.addr
    }

    /// Writes one request record and waits up to `timeout` for the response.
    pub fn request(&self, frame: &WireFrame, timeout: Duration) -> Result<WireFrame, TransportError> {
        let deadline = Instant::now() + timeout;
        let mut guard = self.stream.lock().unwrap();
        let mut stream = match guard.take() {
            Some(stream) => stream,
            None => self.open()?,
        };
        let result = self.exchange(&mut stream, frame, deadline);
        // keep the connection only when the exchange completed in step
        if matches!(result, Ok(_) | Err(TransportError::RemoteError)) {
            *guard = Some(stream);
        }
        result
    }

    fn exchange(
        &self,
        stream: &mut TcpStream,
        frame: &WireFrame,
        deadline: Instant,
    ) -> Result<WireFrame, TransportError> {
        let sent = write_record(stream, &Reply::Frame(frame.clone())).map_err(|err| match err {
            TransportError::Io(io) => map_read_err(io),
            other => other,
        })?;
        self.meter.record_tx(sent);
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return Err(TransportError::Timeout);
        }
        stream.set_read_timeout(Some(remaining))?;
        match read_record(stream)? {
            Some((reply, n)) => {
                self.meter.record_rx(n);
                match reply {
                    Reply::Frame(frame) => Ok(frame),
                    Reply::Error => Err(TransportError::RemoteError),
                }
            }
            None => Err(TransportError::Closed),
        }
    }
}

/// One-shot request over a fresh connection.
pub fn tcp_request(params: &IpParams, frame: &WireFrame, timeout: Duration) -> Result<WireFrame, TransportError> {
    let requester = TcpRequester::connect(params, Arc::new(ByteMeter::new()), timeout)?;
    requester.request(frame, timeout)
}

/// Binds an ephemeral listener on loopback and returns its port. Used by
/// tests and the benchmark harness to pick free ports.
pub fn free_local_port() -> io::Result<u16> {
    let listener = TcpListener::bind(SocketAddrV4::new(Ipv4Addr::LOCALHOST, 0))?;
    Ok(listener.local_addr()?.port())
}
