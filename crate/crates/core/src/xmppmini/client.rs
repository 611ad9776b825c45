//! Client sessions: connect/authenticate, presence-based publish and
//! subscribe, and id-correlated iq request/response.

use std::collections::HashMap;
use std::net::{SocketAddr, SocketAddrV4, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::broker::DEFAULT_XMPP_PORT;
use super::conn::{StanzaReader, StanzaWriter};
use super::jid::Jid;
use super::stanza::{value_element, IqType, PresenceType, Stanza, StanzaKind, AUTH_NS};
use super::xml::{open_tag, xml_serialize, StreamEvent, XmlNode};
use super::XmppError;
use crate::commstack::{b64_encode, WireFrame};
use crate::transports::ByteMeter;

/// Error conditions a responder can answer with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IqFailure {
    /// The application did not answer in time.
    Timeout,
    /// The handler rejected the request.
    Rejected,
    /// The sender is not allowed to query this responder.
    Forbidden,
}

impl IqFailure {
    pub fn condition(self) -> &'static str {
        match self {
            IqFailure::Timeout => "remote-server-timeout",
            IqFailure::Rejected => "internal-server-error",
            IqFailure::Forbidden => "forbidden",
        }
    }
}

/// Outcome of a subscription request, as reported by the publisher side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubscriptionReply {
    Subscribed,
    Refused,
}

type PresenceHandler = Box<dyn Fn(&Jid, Option<String>) + Send>;
type StanzaTap = Box<dyn Fn(&Stanza) + Send>;
type IqHandler = Box<dyn Fn(Option<&Jid>, Option<String>) -> Result<String, IqFailure> + Send>;

#[derive(Clone)]
pub struct SessionOptions {
    pub port: u16,
    pub connect_timeout: Duration,
    pub meter: Arc<ByteMeter>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            port: DEFAULT_XMPP_PORT,
            connect_timeout: Duration::from_secs(3),
            meter: Arc::new(ByteMeter::new()),
        }
    }
}

struct Inner {
    jid: Jid,
    writer: StanzaWriter,
    next_id: AtomicU64,
    pending: Mutex<HashMap<String, Sender<Stanza>>>,
    presence_handler: Mutex<Option<PresenceHandler>>,
    tap: Mutex<Option<StanzaTap>>,
    iq_requests: Mutex<Option<Sender<Stanza>>>,
    subscriptions: Mutex<HashMap<Jid, SubscriptionReply>>,
    subscription_changed: Condvar,
    closed: AtomicBool,
}

impl Inner {
    fn send(&self, stanza: &Stanza) -> Result<(), XmppError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(XmppError::Closed);
        }
        self.writer.send(&stanza.to_string())
    }

    fn fresh_id(&self) -> String {
        self.next_id.fetch_add(1, Ordering::SeqCst).to_string()
    }
}

/// An authenticated client connection bound to a full JID.
pub struct Session {
    inner: Arc<Inner>,
    reader: Option<JoinHandle<()>>,
    responder: Option<JoinHandle<()>>,
}

/// Connects to `server_ip` (port from `options`), opens the stream and
/// authenticates as `jid`.
pub fn client_connect(
    server_ip: &str,
    jid: &Jid,
    password: &str,
    options: SessionOptions,
) -> Result<Session, XmppError> {
    let ip =
        server_ip.trim().parse().map_err(|_| XmppError::Protocol(format!("{server_ip:?} is not an IPv4 address")))?;
    Session::connect(SocketAddrV4::new(ip, options.port), jid, password, options)
}

impl Session {
    pub fn connect(
        server: SocketAddrV4,
        jid: &Jid,
        password: &str,
        options: SessionOptions,
    ) -> Result<Session, XmppError> {
        if jid.is_bare() {
            return Err(XmppError::Protocol(format!("{jid} has no resource")));
        }
        let stream = TcpStream::connect_timeout(&SocketAddr::V4(server), options.connect_timeout)
            .map_err(|source| XmppError::Connect { addr: server, source })?;
        stream.set_nodelay(true).map_err(XmppError::Io)?;
        stream.set_read_timeout(Some(options.connect_timeout)).map_err(XmppError::Io)?;
        let writer = StanzaWriter::new(stream.try_clone().map_err(XmppError::Io)?, Arc::clone(&options.meter));
        let mut reader = StanzaReader::new(stream.try_clone().map_err(XmppError::Io)?, Arc::clone(&options.meter));

        writer.send(&open_tag(&XmlNode::new("stream").with_attr("to", jid.domain())))?;
        match reader.next()? {
            StreamEvent::Open(_) => {}
            _ => return Err(XmppError::Protocol("expected stream header".into())),
        }
        let credentials = format!("{}\0{}", jid.bare(), password);
        let auth = XmlNode::new("auth")
            .with_attr("xmlns", AUTH_NS)
            .with_attr("resource", jid.resource())
            .with_text(b64_encode(&WireFrame::new(credentials.into_bytes())));
        writer.send(&xml_serialize(&auth))?;
        match reader.next()? {
            StreamEvent::Stanza(n) if n.name == "success" => {}
            StreamEvent::Stanza(n) if n.name == "failure" => return Err(XmppError::AuthFailed),
            _ => return Err(XmppError::Protocol("unexpected reply to auth".into())),
        }
        stream.set_read_timeout(None).map_err(XmppError::Io)?;

        let inner = Arc::new(Inner {
            jid: jid.clone(),
            writer,
            next_id: AtomicU64::new(1),
            pending: Mutex::new(HashMap::new()),
            presence_handler: Mutex::new(None),
            tap: Mutex::new(None),
            iq_requests: Mutex::new(None),
            subscriptions: Mutex::new(HashMap::new()),
            subscription_changed: Condvar::new(),
            closed: AtomicBool::new(false),
        });
        let reader_inner = Arc::clone(&inner);
        let reader = thread::Builder::new()
            .name(format!("xmpp-{jid}"))
            .spawn(move || read_loop(reader_inner, reader))
            .map_err(XmppError::Io)?;
        Ok(Session { inner, reader: Some(reader), responder: None })
    }

    pub fn jid(&self) -> &Jid {
        &self.inner.jid
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::SeqCst)
    }

    /// Called with the sender and `Value` text of every inbound data presence.
    pub fn on_presence<F>(&self, handler: F)
    where
        F: Fn(&Jid, Option<String>) + Send + 'static,
    {
        *self.inner.presence_handler.lock().unwrap() = Some(Box::new(handler));
    }

    /// Observes every inbound stanza before it is dispatched.
    pub fn set_tap<F>(&self, tap: F)
    where
        F: Fn(&Stanza) + Send + 'static,
    {
        *self.inner.tap.lock().unwrap() = Some(Box::new(tap));
    }

    /// Sends a raw stanza (the broker stamps `from`).
    pub fn send(&self, stanza: &Stanza) -> Result<(), XmppError> {
        self.inner.send(stanza)
    }

    pub fn next_id(&self) -> String {
        self.inner.fresh_id()
    }

    /// Asks `publisher` to add this account to its roster.
    pub fn presence_subscribe(&self, publisher: &Jid) -> Result<(), XmppError> {
        let request =
            Stanza::presence(PresenceType::Subscribe).with_to(publisher.bare()).with_id(self.inner.fresh_id());
        self.inner.send(&request)
    }

    /// Waits until the publisher answers a subscription request.
    pub fn wait_subscription(&self, publisher: &Jid, timeout: Duration) -> Option<SubscriptionReply> {
        let deadline = Instant::now() + timeout;
        let key = publisher.bare();
        let mut subs = self.inner.subscriptions.lock().unwrap();
        loop {
            if let Some(reply) = subs.get(&key) {
                return Some(*reply);
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return None;
            }
            subs = self.inner.subscription_changed.wait_timeout(subs, remaining).unwrap().0;
        }
    }

    /// Broadcasts `payload_b64` to every subscribed roster contact.
    pub fn presence_publish(&self, payload_b64: &str) -> Result<(), XmppError> {
        let presence = Stanza::presence(PresenceType::Available)
            .with_id(self.inner.fresh_id())
            .with_payload(value_element(payload_b64));
        self.inner.send(&presence)
    }

    /// Sends an iq (get without payload, set with one) and waits for the
    /// result carrying the same id. Returns the result's `Value` text.
    pub fn iq_request(&self, server: &Jid, payload_b64: Option<&str>, timeout: Duration) -> Result<String, XmppError> {
        let id = self.inner.fresh_id();
        let (iq_type, text) = match payload_b64 {
            Some(text) => (IqType::Set, text),
            None => (IqType::Get, ""),
        };
        let request = Stanza::iq(iq_type, id.as_str()).with_to(server.clone()).with_payload(value_element(text));
        let (tx, rx) = mpsc::channel();
        self.inner.pending.lock().unwrap().insert(id.clone(), tx);
        if let Err(err) = self.inner.send(&request) {
            self.inner.pending.lock().unwrap().remove(&id);
            return Err(err);
        }
        let reply = rx.recv_timeout(timeout);
        self.inner.pending.lock().unwrap().remove(&id);
        match reply {
            Ok(reply) if reply.iq_type == Some(IqType::Result) => Ok(reply.value_text().unwrap_or_default()),
            Ok(reply) => {
                Err(XmppError::IqError(reply.error_condition().unwrap_or_else(|| "undefined-condition".into())))
            }
            Err(RecvTimeoutError::Timeout) => Err(XmppError::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(XmppError::Closed),
        }
    }

    /// Answers every inbound iq get/set with `handler(sender, payload)`,
    /// one request at a time, echoing the request id.
    pub fn iq_respond<F>(&mut self, handler: F) -> Result<(), XmppError>
    where
        F: Fn(Option<&Jid>, Option<String>) -> Result<String, IqFailure> + Send + 'static,
    {
        let (tx, rx) = mpsc::channel::<Stanza>();
        *self.inner.iq_requests.lock().unwrap() = Some(tx);
        let inner = Arc::clone(&self.inner);
        let handler: IqHandler = Box::new(handler);
        let worker = thread::Builder::new()
            .name(format!("xmpp-respond-{}", self.inner.jid))
            .spawn(move || {
                for request in rx {
                    let payload = match request.iq_type {
                        Some(IqType::Set) => request.value_text(),
                        _ => request.value_text().filter(|t| !t.is_empty()),
                    };
                    let reply = match handler(request.from.as_ref(), payload) {
                        Ok(text) => {
                            let mut reply = Stanza::iq(IqType::Result, request.id.clone().unwrap_or_default())
                                .with_payload(value_element(&text));
                            reply.to = request.from.clone();
                            reply
                        }
                        Err(failure) => Stanza::iq_error_for(&request, failure.condition()),
                    };
                    if inner.send(&reply).is_err() {
                        break;
                    }
                }
            })
            .map_err(XmppError::Io)?;
        self.responder = Some(worker);
        Ok(())
    }

    pub fn close(&mut self) {
        if !self.inner.closed.swap(true, Ordering::SeqCst) {
            let _ = self.inner.writer.send("</stream>");
        }
        self.inner.writer.shutdown();
        self.inner.iq_requests.lock().unwrap().take();
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
        if let Some(responder) = self.responder.take() {
            let _ = responder.join();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

fn read_loop(inner: Arc<Inner>, mut reader: StanzaReader) {
    loop {
        match reader.next() {
            Ok(StreamEvent::Stanza(node)) => match Stanza::from_xml(&node) {
                Ok(stanza) => dispatch(&inner, stanza),
                Err(err) => log::debug!("{}: malformed stanza: {err}", inner.jid),
            },
            Ok(StreamEvent::Open(_)) => {}
            Ok(StreamEvent::Close) | Err(_) => break,
        }
    }
    inner.closed.store(true, Ordering::SeqCst);
    // waiting requests observe the disconnect
    inner.pending.lock().unwrap().clear();
    inner.iq_requests.lock().unwrap().take();
    inner.subscription_changed.notify_all();
}

fn dispatch(inner: &Inner, stanza: Stanza) {
    if let Some(tap) = inner.tap.lock().unwrap().as_ref() {
        tap(&stanza);
    }
    match (stanza.kind, stanza.iq_type, stanza.presence_type) {
        (StanzaKind::Iq, Some(IqType::Result | IqType::Error), _) => {
            let id = stanza.id.clone().unwrap_or_default();
            // a reply with an unknown id is ignored
            if let Some(waiter) = inner.pending.lock().unwrap().remove(&id) {
                let _ = waiter.send(stanza);
            }
        }
        (StanzaKind::Iq, Some(_), _) => {
            let queue = inner.iq_requests.lock().unwrap().clone();
            match queue {
                Some(queue) => {
                    let _ = queue.send(stanza);
                }
                None => {
                    let _ = inner.send(&Stanza::iq_error_for(&stanza, "service-unavailable"));
                }
            }
        }
        (StanzaKind::Presence, _, Some(PresenceType::Subscribe)) => {
            if let Some(from) = &stanza.from {
                let accept = Stanza::presence(PresenceType::Subscribed).with_to(from.bare());
                let _ = inner.send(&accept);
            }
        }
        (StanzaKind::Presence, _, Some(kind @ (PresenceType::Subscribed | PresenceType::Unsubscribed))) => {
            if let Some(from) = &stanza.from {
                let reply = if kind == PresenceType::Subscribed {
                    SubscriptionReply::Subscribed
                } else {
                    SubscriptionReply::Refused
                };
                inner.subscriptions.lock().unwrap().insert(from.bare(), reply);
                inner.subscription_changed.notify_all();
            }
        }
        (StanzaKind::Presence, _, _) => {
            if let (Some(from), Some(handler)) = (&stanza.from, inner.presence_handler.lock().unwrap().as_ref()) {
                handler(from, stanza.value_text());
            }
        }
        _ => {}
    }
}
