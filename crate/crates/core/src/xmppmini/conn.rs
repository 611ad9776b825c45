//! Stanza-level reading and writing over a TCP stream, shared by the
//! broker and client sessions.

use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::{Arc, Mutex};

use super::xml::{StreamEvent, StreamSplitter};
use super::XmppError;
use crate::transports::ByteMeter;

pub(crate) struct StanzaReader {
    stream: TcpStream,
    splitter: StreamSplitter,
    meter: Arc<ByteMeter>,
    buf: Box<[u8]>,
}

impl StanzaReader {
    pub(crate) fn new(stream: TcpStream, meter: Arc<ByteMeter>) -> Self {
        StanzaReader { stream, splitter: StreamSplitter::new(), meter, buf: vec![0u8; 16 * 1024].into_boxed_slice() }
    }

    /// Blocks until the next stream event. End of stream without
    /// `</stream>` is reported as [`XmppError::Closed`].
    pub(crate) fn next(&mut self) -> Result<StreamEvent, XmppError> {
        loop {
            if let Some((event, used)) = self.splitter.next_event()? {
                self.meter.record_rx(used);
                return Ok(event);
            }
            match self.stream.read(&mut self.buf) {
                Ok(0) => return Err(XmppError::Closed),
                Ok(n) => self.splitter.push(&self.buf[..n])?,
                Err(err) if err.kind() == ErrorKind::Interrupted => {}
                Err(err) if matches!(err.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    return Err(XmppError::Timeout)
                }
                Err(_) => return Err(XmppError::Closed),
            }
        }
    }
}

/// Serialized writes to a shared stream; each call is one message.
#[derive(Clone)]
pub(crate) struct StanzaWriter {
    stream: Arc<Mutex<TcpStream>>,
    meter: Arc<ByteMeter>,
}

impl StanzaWriter {
    pub(crate) fn new(stream: TcpStream, meter: Arc<ByteMeter>) -> Self {
        StanzaWriter { stream: Arc::new(Mutex::new(stream)), meter }
    }

    pub(crate) fn send(&self, text: &str) -> Result<(), XmppError> {
        let mut stream = self.stream.lock().unwrap();
        stream.write_all(text.as_bytes()).map_err(|_| XmppError::Closed)?;
        self.meter.record_tx(text.len());
        Ok(())
    }

    pub(crate) fn shutdown(&self) {
        let _ = self.stream.lock().unwrap().shutdown(Shutdown::Both);
    }
}
