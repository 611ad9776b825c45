//! A minimal stanza router: account table, per-account rosters and a
//! full-JID routing table. It never looks inside stanza payloads.

use std::collections::{BTreeMap, HashMap};
use std::io::ErrorKind;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::conn::{StanzaReader, StanzaWriter};
use super::jid::{jid_parse, Jid};
use super::stanza::{IqType, PresenceType, Stanza, StanzaKind, AUTH_NS};
use super::xml::{open_tag, xml_serialize, StreamEvent, XmlNode};
use super::XmppError;
use crate::commstack::b64_decode;
use crate::transports::ByteMeter;

pub const DEFAULT_XMPP_PORT: u16 = 5222;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);
const ACCEPT_POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubscriptionState {
    Pending,
    Both,
}

/// Parses an accounts file: one `bareJid password` pair per line, `#`
/// comments and blank lines ignored.
pub fn parse_accounts(text: &str) -> Result<Vec<(Jid, String)>, XmppError> {
    let mut accounts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (jid, password) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| XmppError::Accounts(format!("line {}: expected 'jid password'", i + 1)))?;
        let jid = jid_parse(jid).map_err(|e| XmppError::Accounts(format!("line {}: {e}", i + 1)))?;
        if !jid.is_bare() {
            return Err(XmppError::Accounts(format!("line {}: {jid} is not a bare JID", i + 1)));
        }
        accounts.push((jid, password.trim().to_string()));
    }
    Ok(accounts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BrokerStats {
    /// Stanzas written to a recipient session.
    pub delivered: u64,
    /// Stanzas addressed to nobody online.
    pub dropped: u64,
    /// Presence copies produced by roster fan-out.
    pub fanout: u64,
    pub sessions: usize,
}

struct SessionEntry {
    id: u64,
    writer: StanzaWriter,
}

struct Shared {
    accounts: HashMap<Jid, String>,
    sessions: Mutex<HashMap<Jid, SessionEntry>>,
    rosters: Mutex<HashMap<Jid, BTreeMap<Jid, SubscriptionState>>>,
    roster_version: AtomicU64,
    next_session: AtomicU64,
    delivered: AtomicU64,
    dropped: AtomicU64,
    fanout: AtomicU64,
    meter: Arc<ByteMeter>,
    stop: AtomicBool,
}

pub struct Broker {
    local_addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

/// Starts a broker on all interfaces at `port`.
pub fn broker_start(port: u16, accounts: Vec<(Jid, String)>) -> Result<Broker, XmppError> {
    Broker::start(SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, port), accounts, Arc::new(ByteMeter::new()))
}

impl Broker {
    pub fn start(bind: SocketAddrV4, accounts: Vec<(Jid, String)>, meter: Arc<ByteMeter>) -> Result<Broker, XmppError> {
        let listener = TcpListener::bind(bind).map_err(|source| XmppError::Bind { addr: bind, source })?;
        listener.set_nonblocking(true).map_err(XmppError::Io)?;
        let local_addr = listener.local_addr().map_err(XmppError::Io)?;
        let shared = Arc::new(Shared {
            accounts: accounts.into_iter().map(|(j, p)| (j.bare(), p)).collect(),
            sessions: Mutex::new(HashMap::new()),
            rosters: Mutex::new(HashMap::new()),
            roster_version: AtomicU64::new(0),
            next_session: AtomicU64::new(1),
            delivered: AtomicU64::new(0),
            dropped: AtomicU64::new(0),
            fanout: AtomicU64::new(0),
            meter,
            stop: AtomicBool::new(false),
        });
        let acceptor_shared = Arc::clone(&shared);
        let acceptor = thread::Builder::new()
            .name("xmppd-accept".into())
            .spawn(move || accept_loop(listener, acceptor_shared))
            .map_err(XmppError::Io)?;
        log::info!("broker listening on {local_addr}");
        Ok(Broker { local_addr, shared, acceptor: Some(acceptor) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn port(&self) -> u16 {
        self.local_addr.port()
    }

    /// Full JIDs currently bound, sorted.
    pub fn routing_table(&self) -> Vec<Jid> {
        let mut jids: Vec<Jid> = self.shared.sessions.lock().unwrap().keys().cloned().collect();
        jids.sort();
        jids
    }

    pub fn roster(&self, account: &Jid) -> Vec<(Jid, SubscriptionState)> {
        self.shared
            .rosters
            .lock()
            .unwrap()
            .get(&account.bare())
            .map(|r| r.iter().map(|(j, s)| (j.clone(), *s)).collect())
            .unwrap_or_default()
    }

    /// Incremented on every roster write.
    pub fn roster_version(&self) -> u64 {
        self.shared.roster_version.load(Ordering::SeqCst)
    }

    pub fn stats(&self) -> BrokerStats {
        BrokerStats {
            delivered: self.shared.delivered.load(Ordering::SeqCst),
            dropped: self.shared.dropped.load(Ordering::SeqCst),
            fanout: self.shared.fanout.load(Ordering::SeqCst),
            sessions: self.shared.sessions.lock().unwrap().len(),
        }
    }

    pub fn meter(&self) -> &Arc<ByteMeter> {
        &self.shared.meter
    }

    pub fn shutdown(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
        for (_, entry) in self.shared.sessions.lock().unwrap().drain() {
            let _ = entry.writer.send("</stream>");
            entry.writer.shutdown();
        }
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let shared = Arc::clone(&shared);
                let spawned = thread::Builder::new().name(format!("xmppd-{peer}")).spawn(move || {
                    if let Err(err) = serve_session(&shared, stream) {
                        log::debug!("session {peer} ended: {err}");
                    }
                });
                if let Err(err) = spawned {
                    log::warn!("cannot serve {peer}: {err}");
                }
            }
            Err(err) if err.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(err) => {
                log::warn!("accept: {err}");
                thread::sleep(ACCEPT_POLL);
            }
        }
    }
}

/// Checks a `forte-auth` element and returns the full JID to bind.
fn authenticate(shared: &Shared, auth: &XmlNode) -> Option<Jid> {
    if auth.name != "auth" || auth.attr("xmlns") != Some(AUTH_NS) {
        return None;
    }
    let creds = b64_decode(auth.text().trim()).ok()?;
    let creds = String::from_utf8(creds.into_bytes()).ok()?;
    let (jid, password) = creds.split_once('\0')?;
    let jid = jid_parse(jid).ok()?;
    let resource = auth.attr("resource").filter(|r| !r.is_empty())?;
    match shared.accounts.get(&jid.bare()) {
        Some(expected) if expected == password => Some(jid.with_resource(resource)),
        _ => None,
    }
}

fn serve_session(shared: &Arc<Shared>, stream: TcpStream) -> Result<(), XmppError> {
    stream.set_nonblocking(false).map_err(XmppError::Io)?;
    stream.set_nodelay(true).map_err(XmppError::Io)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)).map_err(XmppError::Io)?;
    let writer = StanzaWriter::new(stream.try_clone().map_err(XmppError::Io)?, Arc::clone(&shared.meter));
    let mut reader = StanzaReader::new(stream.try_clone().map_err(XmppError::Io)?, Arc::clone(&shared.meter));

    let StreamEvent::Open(header) = reader.next()? else {
        return Err(XmppError::Protocol("expected stream header".into()));
    };
    let domain = header.attr("to").unwrap_or("localhost").to_string();
    let id = shared.next_session.fetch_add(1, Ordering::SeqCst);
    writer
        .send(&open_tag(&XmlNode::new("stream").with_attr("from", domain.as_str()).with_attr("id", id.to_string())))?;

    let StreamEvent::Stanza(auth) = reader.next()? else {
        return Err(XmppError::Protocol("expected auth".into()));
    };
    let Some(jid) = authenticate(shared, &auth) else {
        writer.send("<failure/></stream>")?;
        writer.shutdown();
        return Err(XmppError::AuthFailed);
    };
    stream.set_read_timeout(None).map_err(XmppError::Io)?;

    // replace-on-conflict: the previous holder of this full JID is closed
    let previous = shared.sessions.lock().unwrap().insert(jid.clone(), SessionEntry { id, writer: writer.clone() });
    if let Some(old) = previous {
        let _ = old.writer.send("</stream>");
        old.writer.shutdown();
    }
    writer.send(&xml_serialize(&XmlNode::new("success").with_attr("jid", jid.to_string())))?;
    log::info!("bound {jid}");
    deliver_pending_requests(shared, &jid, &writer);

    let result = loop {
        match reader.next() {
            Ok(StreamEvent::Stanza(node)) => match Stanza::from_xml(&node) {
                Ok(stanza) => route(shared, &jid, stanza),
                Err(err) => log::debug!("{jid}: ignoring malformed stanza: {err}"),
            },
            Ok(StreamEvent::Close) => break Ok(()),
            Ok(StreamEvent::Open(_)) => break Err(XmppError::Protocol("nested stream".into())),
            Err(err) => break Err(err),
        }
    };

    let mut sessions = shared.sessions.lock().unwrap();
    if sessions.get(&jid).is_some_and(|e| e.id == id) {
        sessions.remove(&jid);
        log::info!("unbound {jid}");
    }
    drop(sessions);
    let _ = writer.send("</stream>");
    writer.shutdown();
    result
}

/// Subscription requests that arrived while the account was offline.
fn deliver_pending_requests(shared: &Shared, jid: &Jid, writer: &StanzaWriter) {
    let pending: Vec<Jid> = shared
        .rosters
        .lock()
        .unwrap()
        .get(&jid.bare())
        .map(|r| r.iter().filter(|(_, s)| **s == SubscriptionState::Pending).map(|(j, _)| j.clone()).collect())
        .unwrap_or_default();
    for contact in pending {
        let request = Stanza::presence(PresenceType::Subscribe).with_from(contact).with_to(jid.bare());
        let _ = writer.send(&request.to_string());
    }
}

fn deliver(shared: &Shared, target: &Jid, stanza: &Stanza) -> bool {
    let writer = shared.sessions.lock().unwrap().get(target).map(|e| e.writer.clone());
    match writer {
        Some(writer) if writer.send(&stanza.to_string()).is_ok() => {
            shared.delivered.fetch_add(1, Ordering::SeqCst);
            true
        }
        _ => false,
    }
}

fn sessions_of(shared: &Shared, bare: &Jid) -> Vec<Jid> {
    let mut jids: Vec<Jid> = shared.sessions.lock().unwrap().keys().filter(|j| j.bare() == *bare).cloned().collect();
    jids.sort();
    jids
}

/// Exact delivery to a full JID, or to every session of a bare JID.
fn deliver_addressed(shared: &Shared, to: &Jid, stanza: &Stanza) -> usize {
    let targets = if to.is_bare() { sessions_of(shared, to) } else { vec![to.clone()] };
    let delivered = targets.iter().filter(|t| deliver(shared, t, stanza)).count();
    if delivered == 0 {
        shared.dropped.fetch_add(1, Ordering::SeqCst);
    }
    delivered
}

fn roster_write<F>(shared: &Shared, account: &Jid, edit: F)
where
    F: FnOnce(&mut BTreeMap<Jid, SubscriptionState>) -> bool,
{
    let mut rosters = shared.rosters.lock().unwrap();
    if edit(rosters.entry(account.bare()).or_default()) {
        shared.roster_version.fetch_add(1, Ordering::SeqCst);
    }
}

fn route(shared: &Shared, sender: &Jid, mut stanza: Stanza) {
    stanza.from = Some(sender.clone());
    match stanza.kind {
        StanzaKind::Presence => route_presence(shared, sender, stanza),
        StanzaKind::Iq => route_iq(shared, sender, stanza),
        StanzaKind::Message => match stanza.to.clone() {
            Some(to) => {
                deliver_addressed(shared, &to, &stanza);
            }
            None => {
                shared.dropped.fetch_add(1, Ordering::SeqCst);
            }
        },
    }
}

fn route_iq(shared: &Shared, sender: &Jid, stanza: Stanza) {
    let is_request = stanza.iq_type.is_some_and(IqType::is_request);
    match &stanza.to {
        Some(to) if !to.is_bare() => {
            if !deliver(shared, to, &stanza) {
                shared.dropped.fetch_add(1, Ordering::SeqCst);
                if is_request {
                    deliver(shared, sender, &Stanza::iq_error_for(&stanza, "service-unavailable"));
                }
            }
        }
        Some(_) => {
            shared.dropped.fetch_add(1, Ordering::SeqCst);
            if is_request {
                deliver(shared, sender, &Stanza::iq_error_for(&stanza, "service-unavailable"));
            }
        }
        None if is_request => {
            deliver(shared, sender, &Stanza::iq_error_for(&stanza, "feature-not-implemented"));
        }
        None => {}
    }
}

fn route_presence(shared: &Shared, sender: &Jid, stanza: Stanza) {
    let presence_type = stanza.presence_type.unwrap_or(PresenceType::Available);
    let Some(to) = stanza.to.clone() else {
        if presence_type == PresenceType::Available {
            fan_out(shared, sender, &stanza);
        }
        return;
    };
    match presence_type {
        PresenceType::Subscribe => {
            let publisher = to.bare();
            if !shared.accounts.contains_key(&publisher) {
                let refusal = Stanza::presence(PresenceType::Unsubscribed).with_from(publisher).with_to(sender.clone());
                deliver(shared, sender, &refusal);
                return;
            }
            let subscriber = sender.bare();
            roster_write(shared, &publisher, |roster| match roster.entry(subscriber) {
                std::collections::btree_map::Entry::Occupied(_) => false,
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert(SubscriptionState::Pending);
                    true
                }
            });
            let mut request = stanza;
            request.to = Some(publisher.clone());
            // an offline publisher gets the request when it binds
            for session in sessions_of(shared, &publisher) {
                deliver(shared, &session, &request);
            }
        }
        PresenceType::Subscribed => {
            let subscriber = to.bare();
            roster_write(shared, sender, |roster| {
                roster.insert(subscriber, SubscriptionState::Both) != Some(SubscriptionState::Both)
            });
            deliver_addressed(shared, &to, &stanza);
        }
        PresenceType::Unsubscribed => {
            let contact = to.bare();
            roster_write(shared, sender, |roster| roster.remove(&contact).is_some());
            deliver_addressed(shared, &to, &stanza);
        }
        PresenceType::Available => {
            deliver_addressed(shared, &to, &stanza);
        }
    }
}

/// Sends one copy of an undirected presence to every online session of
/// every roster contact in state both.
fn fan_out(shared: &Shared, sender: &Jid, stanza: &Stanza) {
    let contacts: Vec<Jid> = shared
        .rosters
        .lock()
        .unwrap()
        .get(&sender.bare())
        .map(|r| r.iter().filter(|(_, s)| **s == SubscriptionState::Both).map(|(j, _)| j.clone()).collect())
        .unwrap_or_default();
    for contact in contacts {
        for session in sessions_of(shared, &contact) {
            let mut copy = stanza.clone();
            copy.to = Some(session.clone());
            if deliver(shared, &session, &copy) {
                shared.fanout.fetch_add(1, Ordering::SeqCst);
            }
        }
    }
}
