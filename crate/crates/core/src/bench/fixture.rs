use std::net::Ipv4Addr;
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::appcli::{bundled::CEM_JID, bundled::DISPLAY_JID, bundled::NETOP_JID, ACCOUNTS};
use crate::commstack::{build_stack, parse_comm_id, CommEndpoint, EndpointHandler, Inbound, Pattern, StackOptions};
use crate::transports::tcp::free_local_port;
use crate::transports::{ByteMeter, MeterSnapshot};
use crate::value::Value;
use crate::xmppmini::{parse_accounts, Broker};

use super::{BenchError, BenchPattern, BenchTransport};

/// A connected sender/receiver pair with a meter on every party.
pub struct Fixture {
    pub transport: BenchTransport,
    pub pattern: BenchPattern,
    /// Publisher or client.
    pub sender: CommEndpoint,
    /// Subscriber or server.
    pub receiver: CommEndpoint,
    /// Subscriber deliveries with their arrival time.
    pub deliveries: Option<Receiver<(Instant, Vec<Value>)>>,
    pub broker: Option<Broker>,
    meters: Vec<Arc<ByteMeter>>,
}

fn meter_options(meter: &Arc<ByteMeter>) -> StackOptions {
    StackOptions { meter: Arc::clone(meter), ..StackOptions::default() }
}

fn xmpp_ids(pattern: BenchPattern, port: u16) -> (String, String) {
    match pattern {
        BenchPattern::Async => (
            format!("fbdk[].xmpp[0:{NETOP_JID}:netop-secret:127.0.0.1:{port}]"),
            format!("fbdk[].xmpp[0:{CEM_JID}:cemdsm-secret:127.0.0.1:{NETOP_JID}:{port}]"),
        ),
        BenchPattern::Sync => (
            format!("fbdk[].xmpp[0:{DISPLAY_JID}:display-secret:127.0.0.1:{CEM_JID}:{port}]"),
            format!("fbdk[].xmpp[0:{CEM_JID}:cemdsm-secret:127.0.0.1:{DISPLAY_JID}:{port}]"),
        ),
    }
}

impl Fixture {
    /// Starts whatever the combination needs on loopback, including a
    /// private broker for xmpp.
    pub fn start(transport: BenchTransport, pattern: BenchPattern) -> Result<Fixture, BenchError> {
        let valid = matches!(
            (transport, pattern),
            (BenchTransport::Xmpp, _)
                | (BenchTransport::Udp, BenchPattern::Async)
                | (BenchTransport::Tcp, BenchPattern::Sync)
        );
        if !valid {
            return Err(BenchError::Combination(transport, pattern));
        }
        let sender_meter = Arc::new(ByteMeter::new());
        let receiver_meter = Arc::new(ByteMeter::new());
        let mut meters = vec![Arc::clone(&sender_meter), Arc::clone(&receiver_meter)];
        let (broker, sender_id, receiver_id) = match transport {
            BenchTransport::Xmpp => {
                let broker_meter = Arc::new(ByteMeter::new());
                let accounts = parse_accounts(ACCOUNTS).map_err(|e| BenchError::Transfer(e.to_string()))?;
                let broker = Broker::start(
                    std::net::SocketAddrV4::new(Ipv4Addr::LOCALHOST, 0),
                    accounts,
                    Arc::clone(&broker_meter),
                )
                .map_err(|e| BenchError::Transfer(e.to_string()))?;
                meters.push(broker_meter);
                let (s, r) = xmpp_ids(pattern, broker.port());
                (Some(broker), s, r)
            }
            BenchTransport::Udp | BenchTransport::Tcp => {
                let port = free_local_port()?;
                let id = format!("fbdk[].ip[127.0.0.1:{port}]");
                (None, id.clone(), id)
            }
        };
        let sender_id = parse_comm_id(&sender_id).map_err(|e| BenchError::Transfer(e.to_string()))?;
        let receiver_id = parse_comm_id(&receiver_id).map_err(|e| BenchError::Transfer(e.to_string()))?;

        let (receiver, deliveries) = match pattern {
            BenchPattern::Async => {
                let (tx, rx) = mpsc::channel();
                let handler = EndpointHandler::Indication(Arc::new(move |inbound| {
                    if let Inbound::Values(values) = inbound {
                        let _ = tx.send((Instant::now(), values));
                    }
                }));
                let ep = build_stack(&receiver_id, Pattern::Subscribe, handler, &meter_options(&receiver_meter))?;
                (ep, Some(rx))
            }
            BenchPattern::Sync => {
                let handler = EndpointHandler::Responder(Arc::new(|inbound| match inbound {
                    Inbound::Values(values) => Some(values),
                    Inbound::Malformed(_) => None,
                }));
                (build_stack(&receiver_id, Pattern::Server, handler, &meter_options(&receiver_meter))?, None)
            }
        };
        let sender_pattern = match pattern {
            BenchPattern::Async => Pattern::Publish,
            BenchPattern::Sync => Pattern::Client,
        };
        let sender = build_stack(&sender_id, sender_pattern, EndpointHandler::None, &meter_options(&sender_meter))?;
        let fixture = Fixture { transport, pattern, sender, receiver, deliveries, broker, meters };
        fixture.prime()?;
        Ok(fixture)
    }

    /// Repeats a transfer until one gets through, so that asynchronous
    /// setup (xmpp subscriptions) is complete before measuring.
    fn prime(&self) -> Result<(), BenchError> {
        let deadline = Instant::now() + Duration::from_secs(5);
        while Instant::now() < deadline {
            if self.transfer(&[Value::Bool(false)], Duration::from_millis(250)).is_ok() {
                self.drain();
                return Ok(());
            }
        }
        Err(BenchError::Transfer("endpoints never connected".into()))
    }

    fn drain(&self) {
        if let Some(rx) = &self.deliveries {
            std::thread::sleep(Duration::from_millis(20));
            while rx.try_recv().is_ok() {}
        }
    }

    /// One value transfer; returns the delivery instant (async) or the
    /// response instant (sync).
    pub fn transfer(&self, values: &[Value], timeout: Duration) -> Result<Instant, BenchError> {
        match &self.deliveries {
            Some(rx) => {
                self.sender.publish(values)?;
                let deadline = Instant::now() + timeout;
                loop {
                    let left = deadline.saturating_duration_since(Instant::now());
                    match rx.recv_timeout(left) {
                        Ok((at, got)) if got == values => return Ok(at),
                        Ok(_) => continue,
                        Err(_) => return Err(BenchError::Lost),
                    }
                }
            }
            None => {
                let got = self.sender.request(values, timeout)?;
                let at = Instant::now();
                if got == values {
                    Ok(at)
                } else {
                    Err(BenchError::Transfer(format!("echo mismatch: {got:?}")))
                }
            }
        }
    }

    /// Meter readings of every party, broker included.
    pub fn snapshot(&self) -> Vec<MeterSnapshot> {
        self.meters.iter().map(|m| m.snapshot()).collect()
    }
}
