//! Baseline IP transports: UDP for publish/subscribe, TCP for
//! client/server. Both report payload byte counts to a [`ByteMeter`].

mod meter;
pub mod tcp;
pub mod udp;

use std::fmt;
use std::io;
use std::net::{Ipv4Addr, SocketAddrV4};

pub use meter::{ByteMeter, MeterSnapshot};
pub use tcp::{tcp_request, tcp_serve, Reply, TcpRequester, TcpServer};
pub use udp::{udp_subscribe, UdpPublisher, UdpSubscription};

/// Default port of the bundled configurations.
pub const DEFAULT_PORT: u16 = 61499;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("frame of {size} bytes exceeds the {limit}-byte limit")]
    Oversize { size: usize, limit: usize },
    #[error("invalid IP parameters: {0}")]
    BadParams(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddrV4, source: io::Error },
    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: SocketAddrV4, source: io::Error },
    #[error("timed out waiting for a response")]
    Timeout,
    #[error("connection closed by peer")]
    Closed,
    #[error("framing error: {0}")]
    Framing(String),
    #[error("peer answered with an error response")]
    RemoteError,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Host and port of an `ip[...]` layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpParams {
    pub host: Ipv4Addr,
    pub port: u16,
}

impl IpParams {
    pub fn new(host: Ipv4Addr, port: u16) -> Self {
        IpParams { host, port }
    }

    pub fn localhost(port: u16) -> Self {
        IpParams::new(Ipv4Addr::LOCALHOST, port)
    }

    /// Reads the `host:port` parameter pair of an `ip` layer.
    ///
    /// Surrounding whitespace in a parameter is ignored.
    pub fn from_layer_params(params: &[String]) -> Result<Self, TransportError> {
        let [host, port] = params else {
            return Err(TransportError::BadParams(format!("expected host:port, got {} parameters", params.len())));
        };
        let host: Ipv4Addr =
            host.trim().parse().map_err(|_| TransportError::BadParams(format!("{host:?} is not an IPv4 address")))?;
        let port: u16 = port
            .trim()
            .parse()
            .ok()
            .filter(|p| *p != 0)
            .ok_or_else(|| TransportError::BadParams(format!("{port:?} is not a port in 1-65535")))?;
        Ok(IpParams { host, port })
    }

    pub fn socket_addr(&self) -> SocketAddrV4 {
        SocketAddrV4::new(self.host, self.port)
    }

    pub fn is_multicast(&self) -> bool {
        self.host.is_multicast()
    }
}

impl fmt::Display for IpParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.host, self.port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: &[&str]) -> Vec<String> {
        p.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ip_params() {
        let p = IpParams::from_layer_params(&params(&["192.168.20.1", "61499"])).unwrap();
        assert_eq!(p.to_string(), "192.168.20.1:61499");
        assert!(!p.is_multicast());
        assert!(IpParams::from_layer_params(&params(&["239.0.0.1", "61000"])).unwrap().is_multicast());
        assert!(IpParams::from_layer_params(&params(&[" 127.0.0.1", "1"])).is_ok());
        assert!(IpParams::from_layer_params(&params(&["localhost", "1"])).is_err());
        assert!(IpParams::from_layer_params(&params(&["127.0.0.1", "0"])).is_err());
        assert!(IpParams::from_layer_params(&params(&["127.0.0.1", "65536"])).is_err());
        assert!(IpParams::from_layer_params(&params(&["127.0.0.1"])).is_err());
    }
}
