//! UDP publish/subscribe. One frame per datagram; multicast group
//! addresses are joined, anything else is plain unicast.

use std::io::ErrorKind;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use socket2::{Domain, Protocol, Socket, Type};

use super::{ByteMeter, IpParams, TransportError};
use crate::commstack::WireFrame;

/// Largest frame sent as a single datagram.
pub const MAX_DATAGRAM: usize = 1400;

const POLL_INTERVAL: Duration = Duration::from_millis(50);

pub struct UdpPublisher {
    socket: UdpSocket,
    target: SocketAddrV4,
    meter: Arc<ByteMeter>,
}

impl UdpPublisher {
    pub fn open(params: &IpParams, meter: Arc<ByteMeter>) -> Result<Self, TransportError> {
        let local = SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, 0);
        let socket = UdpSocket::bind(local).map_err(|source| TransportError::Bind { addr: local, source })?;
        if params.is_multicast() {
            socket.set_multicast_loop_v4(true)?;
            socket.set_multicast_ttl_v4(1)?;
        }
        Ok(UdpPublisher { socket, target: params.socket_addr(), meter })
    }

    pub fn target(&self) -> SocketAddrV4 {
        self.target
    }

    /// Sends `frame` as exactly one datagram.
    pub fn publish(&self, frame: &WireFrame) -> Result<(), TransportError> {
        if frame.len() > MAX_DATAGRAM {
            return Err(TransportError::Oversize { size: frame.len(), limit: MAX_DATAGRAM });
        }
        let sent = match self.socket.send_to(frame.as_bytes(), self.target) {
            Err(err) if err.kind() == ErrorKind::NetworkUnreachable && self.target.ip().is_multicast() => {
                // no default route: keep multicast on the loopback interface
                socket2::SockRef::from(&self.socket).set_multicast_if_v4(&Ipv4Addr::LOCALHOST)?;
                self.socket.send_to(frame.as_bytes(), self.target)?
            }
            other => other?,
        };
        self.meter.record_tx(sent);
        Ok(())
    }
}

/// A bound (or joined) UDP socket delivering each datagram to a callback
/// until closed.
pub struct UdpSubscription {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl UdpSubscription {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops the receive loop. No callback runs after this returns.
    pub fn close(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for UdpSubscription {
    fn drop(&mut self) {
        self.close();
    }
}

fn bind_socket(params: &IpParams) -> Result<UdpSocket, TransportError> {
    let addr = params.socket_addr();
    let bind_err = |source| TransportError::Bind { addr, source };
    let socket = Socket::new(Domain::IPV4, Type::DGRAM, Some(Protocol::UDP)).map_err(bind_err)?;
    if params.is_multicast() {
        socket.set_reuse_address(true).map_err(bind_err)?;
        let any = SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, params.port);
        socket.bind(&any.into()).map_err(bind_err)?;
        if socket.join_multicast_v4(&params.host, &Ipv4Addr::UNSPECIFIED).is_err() {
            socket.join_multicast_v4(&params.host, &Ipv4Addr::LOCALHOST).map_err(bind_err)?;
        }
    } else {
        socket.bind(&addr.into()).map_err(bind_err)?;
    }
    Ok(socket.into())
}

/// Binds (or joins the group of) `params` and calls `on_frame` once per
/// received datagram.
pub fn udp_subscribe<F>(
    params: &IpParams,
    meter: Arc<ByteMeter>,
    on_frame: F,
) -> Result<UdpSubscription, TransportError>
where
    F: Fn(WireFrame) + Send + 'static,
{
    let socket = bind_socket(params)?;
    socket.set_read_timeout(Some(POLL_INTERVAL))?;
    let local_addr = socket.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let worker = thread::Builder::new().name(format!("udp-sub-{}", params.port)).spawn(move || {
        let mut buf = vec![0u8; 65536];
        while !stop_flag.load(Ordering::SeqCst) {
            match socket.recv_from(&mut buf) {
                Ok((n, _)) => {
                    if stop_flag.load(Ordering::SeqCst) {
                        break;
                    }
                    meter.record_rx(n);
                    on_frame(WireFrame::new(buf[..n].to_vec()));
                }
                Err(err) if matches!(err.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(err) => {
                    log::warn!("udp subscription on {local_addr}: {err}");
                    thread::sleep(POLL_INTERVAL);
                }
            }
        }
    })?;
    Ok(UdpSubscription { local_addr, stop, worker: Some(worker) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::mpsc;

    #[test]
    fn oversize_frame_rejected() {
        let publisher = UdpPublisher::open(&IpParams::localhost(9), Arc::new(ByteMeter::new())).unwrap();
        let err = publisher.publish(&WireFrame::new(vec![0; MAX_DATAGRAM + 1])).unwrap_err();
        assert!(matches!(err, TransportError::Oversize { size: 1401, limit: 1400 }));
    }

    #[test]
    fn unicast_loopback_counts_datagrams() {
        let meter = Arc::new(ByteMeter::new());
        let (tx, rx) = mpsc::channel();
        let mut sub = udp_subscribe(&IpParams::localhost(0), Arc::clone(&meter), move |f| {
            tx.send(f).unwrap();
        })
        .unwrap();
        let port = sub.local_addr().port();
        let publisher = UdpPublisher::open(&IpParams::localhost(port), Arc::clone(&meter)).unwrap();
        for i in 0..3u8 {
            publisher.publish(&WireFrame::new(vec![0x41, i])).unwrap();
        }
        for i in 0..3u8 {
            let frame = rx.recv_timeout(Duration::from_secs(2)).unwrap();
            assert_eq!(frame.as_bytes(), &[0x41, i]);
        }
        let snap = meter.snapshot();
        assert_eq!((snap.tx_msgs, snap.rx_msgs, snap.tx_bytes, snap.rx_bytes), (3, 3, 6, 6));

        sub.close();
        publisher.publish(&WireFrame::new(vec![0x40])).unwrap();
        assert!(rx.recv_timeout(Duration::from_millis(300)).is_err());
    }
}
