//! A minimal self-hosted XMPP subset: an XML subset, JIDs, a stanza
//! broker with rosters, and client sessions for presence pub/sub and iq
//! request/response carrying `<Value xmlns='forte'>` payloads.
//!
//! Authentication is a single `<auth xmlns='forte-auth' resource='...'>`
//! element holding Base64 of `bare-jid NUL password`, answered by
//! `<success/>` or `<failure/>`.

pub mod broker;
pub mod client;
mod conn;
pub mod jid;
pub mod stanza;
pub mod xml;

use std::io;
use std::net::SocketAddrV4;

pub use broker::{broker_start, parse_accounts, Broker, BrokerStats, SubscriptionState, DEFAULT_XMPP_PORT};
pub use client::{client_connect, IqFailure, Session, SessionOptions, SubscriptionReply};
pub use jid::{jid_parse, Jid, JidError};
pub use stanza::{IqType, PresenceType, Stanza, StanzaKind};
pub use xml::{xml_parse, xml_serialize, XmlChild, XmlError, XmlNode};

#[derive(Debug, thiserror::Error)]
pub enum XmppError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddrV4, source: io::Error },
    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: SocketAddrV4, source: io::Error },
    #[error("authentication failed")]
    AuthFailed,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("stream closed")]
    Closed,
    #[error("timed out")]
    Timeout,
    #[error("iq error: {0}")]
    IqError(String),
    #[error("accounts file: {0}")]
    Accounts(String),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error(transparent)]
    Io(io::Error),
}
