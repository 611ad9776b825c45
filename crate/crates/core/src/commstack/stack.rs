//! Composition of a parsed ID into a live endpoint.
//!
//! The payload path is `values -> ber_encode -> transport` for `ip`, with a
//! Base64 bridge inserted before `xmpp`; receiving mirrors it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use super::ber::{ber_decode, ber_encode, CodecError};
use super::id::{CommId, IdError, LayerSpec};
use super::text::{b64_decode, b64_encode, TextBridgeError};
use super::WireFrame;
use crate::transports::{
    tcp_serve, udp_subscribe, ByteMeter, IpParams, Reply, TcpRequester, TcpServer, TransportError, UdpPublisher,
    UdpSubscription,
};
use crate::value::Value;
use crate::xmppmini::{jid_parse, IqFailure, Jid, Session, SessionOptions, XmppError, DEFAULT_XMPP_PORT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Publish,
    Subscribe,
    Client,
    Server,
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Pattern::Publish => "publish",
            Pattern::Subscribe => "subscribe",
            Pattern::Client => "client",
            Pattern::Server => "server",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "publish" => Ok(Pattern::Publish),
            "subscribe" => Ok(Pattern::Subscribe),
            "client" => Ok(Pattern::Client),
            "server" => Ok(Pattern::Server),
            other => Err(format!("unknown pattern {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommError {
    #[error(transparent)]
    Id(#[from] IdError),
    #[error("exactly one fbdk payload layer is required, found {0}")]
    PayloadLayers(usize),
    #[error("layer {layer} expects {expected} parameters, got {got}")]
    Arity { layer: String, expected: &'static str, got: usize },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("TLS is not supported")]
    TlsUnsupported,
    #[error("endpoint is a {0} endpoint")]
    WrongPattern(Pattern),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    TextBridge(#[from] TextBridgeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Xmpp(#[from] XmppError),
}

impl CommError {
    /// True when received bytes could not be turned into values.
    pub fn is_decode_error(&self) -> bool {
        matches!(self, CommError::Codec(_) | CommError::TextBridge(_))
    }
}

/// What a receiving endpoint hands to its owner.
#[derive(Debug)]
pub enum Inbound {
    Values(Vec<Value>),
    /// Bytes arrived but did not decode.
    Malformed(CommError),
}

/// Answers a server request; `None` sends an error response.
pub type Responder = Arc<dyn Fn(Inbound) -> Option<Vec<Value>> + Send + Sync>;

pub enum EndpointHandler {
    None,
    /// Called once per inbound frame of a subscriber.
    Indication(Arc<dyn Fn(Inbound) + Send + Sync>),
    /// Called once per inbound request of a server.
    Responder(Responder),
}

#[derive(Clone)]
pub struct StackOptions {
    pub meter: Arc<ByteMeter>,
    pub connect_timeout: Duration,
    /// Broker port used when an `xmpp` layer does not name one.
    pub xmpp_port: u16,
}

impl Default for StackOptions {
    fn default() -> Self {
        StackOptions {
            meter: Arc::new(ByteMeter::new()),
            connect_timeout: Duration::from_secs(3),
            xmpp_port: DEFAULT_XMPP_PORT,
        }
    }
}

enum Link {
    UdpPublisher(UdpPublisher),
    UdpSubscriber(UdpSubscription),
    TcpClient(TcpRequester),
    TcpServer(TcpServer),
    Xmpp { session: Session, peer: Option<Jid> },
}

/// A connected endpoint built from an ID.
pub struct CommEndpoint {
    id: CommId,
    pattern: Pattern,
    link: Link,
}

fn encode(values: &[Value]) -> Result<WireFrame, CommError> {
    Ok(ber_encode(values)?)
}

fn decode_frame(frame: &WireFrame) -> Inbound {
    match ber_decode(frame) {
        Ok(values) => Inbound::Values(values),
        Err(err) => Inbound::Malformed(err.into()),
    }
}

fn decode_text(text: &str) -> Inbound {
    match b64_decode(text) {
        Ok(frame) => decode_frame(&frame),
        Err(err) => Inbound::Malformed(err.into()),
    }
}

struct XmppParams {
    jid: Jid,
    password: String,
    server_ip: String,
    peer: Option<Jid>,
    port: u16,
}

fn xmpp_params(layer: &LayerSpec, pattern: Pattern, default_port: u16) -> Result<XmppParams, CommError> {
    let p = &layer.params;
    let (base, expected) = match pattern {
        Pattern::Publish => (4, "4 or 5"),
        _ => (5, "5 or 6"),
    };
    if p.len() != base && p.len() != base + 1 {
        return Err(CommError::Arity { layer: layer.name.clone(), expected, got: p.len() });
    }
    match p[0].trim() {
        "0" => {}
        "1" => return Err(CommError::TlsUnsupported),
        other => return Err(CommError::BadParam(format!("encryption flag {other:?}"))),
    }
    let jid = |text: &str| jid_parse(text.trim()).map_err(|err| CommError::BadParam(format!("{text:?}: {err}")));
    let port = match p.get(base) {
        Some(text) => text
            .trim()
            .parse::<u16>()
            .ok()
            .filter(|p| *p != 0)
            .ok_or_else(|| CommError::BadParam(format!("broker port {text:?}")))?,
        None => default_port,
    };
    Ok(XmppParams {
        jid: jid(&p[1])?,
        password: p[2].clone(),
        server_ip: p[3].trim().to_string(),
        peer: if base == 5 { Some(jid(&p[4])?) } else { None },
        port,
    })
}

/// Builds and connects the endpoint described by `id` for `pattern`.
///
/// Subscribers need an [`EndpointHandler::Indication`] and servers an
/// [`EndpointHandler::Responder`].
pub fn build_stack(
    id: &CommId,
    pattern: Pattern,
    handler: EndpointHandler,
    options: &StackOptions,
) -> Result<CommEndpoint, CommError> {
    let payload = id.payload_layers().len();
    if payload != 1 {
        return Err(CommError::PayloadLayers(payload));
    }
    let transport = id.transport();
    let meter = Arc::clone(&options.meter);
    let link = match transport.name.as_str() {
        "ip" => {
            let params = IpParams::from_layer_params(&transport.params)?;
            match (pattern, handler) {
                (Pattern::Publish, _) => Link::UdpPublisher(UdpPublisher::open(&params, meter)?),
                (Pattern::Subscribe, EndpointHandler::Indication(on_values)) => {
                    Link::UdpSubscriber(udp_subscribe(&params, meter, move |frame| on_values(decode_frame(&frame)))?)
                }
                (Pattern::Client, _) => {
                    Link::TcpClient(TcpRequester::connect(&params, meter, options.connect_timeout)?)
                }
                (Pattern::Server, EndpointHandler::Responder(respond)) => {
                    Link::TcpServer(tcp_serve(&params, meter, move |frame| {
                        match respond(decode_frame(&frame)).map(|values| encode(&values)) {
                            Some(Ok(frame)) => Reply::Frame(frame),
                            _ => Reply::Error,
                        }
                    })?)
                }
                (pattern, _) => return Err(missing_handler(pattern)),
            }
        }
        "xmpp" => {
            let params = xmpp_params(transport, pattern, options.xmpp_port)?;
            let session_options = SessionOptions { port: params.port, connect_timeout: options.connect_timeout, meter };
            let mut session =
                crate::xmppmini::client_connect(&params.server_ip, &params.jid, &params.password, session_options)?;
            match (pattern, handler) {
                (Pattern::Publish | Pattern::Client, _) => {}
                (Pattern::Subscribe, EndpointHandler::Indication(on_values)) => {
                    let publisher = params.peer.as_ref().map(Jid::bare);
                    session.on_presence(move |from, text| {
                        if Some(from.bare()) != publisher {
                            return;
                        }
                        if let Some(text) = text {
                            on_values(decode_text(&text));
                        }
                    });
                    if let Some(publisher) = &params.peer {
                        session.presence_subscribe(publisher)?;
                    }
                }
                (Pattern::Server, EndpointHandler::Responder(respond)) => {
                    let client = params.peer.as_ref().map(Jid::bare);
                    session.iq_respond(move |from, text| {
                        if from.map(|f| f.bare()) != client {
                            return Err(IqFailure::Forbidden);
                        }
                        let inbound = decode_text(text.as_deref().unwrap_or(""));
                        let malformed = matches!(inbound, Inbound::Malformed(_));
                        match respond(inbound).map(|values| encode(&values)) {
                            Some(Ok(frame)) => Ok(b64_encode(&frame)),
                            _ if malformed => Err(IqFailure::Rejected),
                            _ => Err(IqFailure::Timeout),
                        }
                    })?;
                }
                (pattern, _) => return Err(missing_handler(pattern)),
            }
            Link::Xmpp { session, peer: params.peer }
        }
        other => return Err(IdError::UnknownLayer(other.to_string()).into()),
    };
    Ok(CommEndpoint { id: id.clone(), pattern, link })
}

fn missing_handler(pattern: Pattern) -> CommError {
    CommError::BadParam(format!("a {pattern} endpoint needs a matching handler"))
}

impl CommEndpoint {
    pub fn id(&self) -> &CommId {
        &self.id
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    /// Sends one value list on a publish endpoint.
    pub fn publish(&self, values: &[Value]) -> Result<(), CommError> {
        let frame = encode(values)?;
        match &self.link {
            Link::UdpPublisher(publisher) => Ok(publisher.publish(&frame)?),
            Link::Xmpp { session, .. } if self.pattern == Pattern::Publish => {
                Ok(session.presence_publish(&b64_encode(&frame))?)
            }
            _ => Err(CommError::WrongPattern(self.pattern)),
        }
    }

    /// Performs one request/response exchange on a client endpoint.
    pub fn request(&self, values: &[Value], timeout: Duration) -> Result<Vec<Value>, CommError> {
        let frame = encode(values)?;
        let reply = match &self.link {
            Link::TcpClient(requester) => requester.request(&frame, timeout)?,
            Link::Xmpp { session, peer: Some(server) } if self.pattern == Pattern::Client => {
                let text = (!frame.is_empty()).then(|| b64_encode(&frame));
                let reply = session.iq_request(server, text.as_deref(), timeout)?;
                b64_decode(&reply)?
            }
            _ => return Err(CommError::WrongPattern(self.pattern)),
        };
        Ok(ber_decode(&reply)?)
    }

    /// Local address of a UDP subscriber or TCP server.
    pub fn local_port(&self) -> Option<u16> {
        match &self.link {
            Link::UdpSubscriber(sub) => Some(sub.local_addr().port()),
            Link::TcpServer(server) => Some(server.local_addr().port()),
            _ => None,
        }
    }

    /// Disconnects; further sends fail.
    pub fn close(&mut self) {
        match &mut self.link {
            Link::UdpSubscriber(sub) => sub.close(),
            Link::TcpServer(server) => server.close(),
            Link::Xmpp { session, .. } => session.close(),
            Link::UdpPublisher(_) | Link::TcpClient(_) => {}
        }
    }
}

impl fmt::Debug for CommEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommEndpoint").field("id", &self.id.to_string()).field("pattern", &self.pattern).finish()
    }
}
