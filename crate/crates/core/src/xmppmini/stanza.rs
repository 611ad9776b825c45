//! Typed view of presence, iq and message stanzas.

use std::fmt;

use super::jid::{jid_parse, Jid, JidError};
use super::xml::{xml_serialize, XmlNode};

/// Namespace of the data-carrying `Value` element.
pub const FORTE_NS: &str = "forte";
/// Namespace of the simplified authentication element.
pub const AUTH_NS: &str = "forte-auth";
pub const STANZA_ERROR_NS: &str = "urn:ietf:params:xml:ns:xmpp-stanzas";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StanzaError {
    #[error("<{0}> is not a stanza")]
    NotAStanza(String),
    #[error("iq stanza without an id")]
    MissingId,
    #[error("invalid {attr} attribute {value:?}")]
    BadType { attr: &'static str, value: String },
    #[error(transparent)]
    Jid(#[from] JidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StanzaKind {
    Presence,
    Iq,
    Message,
}

impl StanzaKind {
    pub fn element_name(self) -> &'static str {
        match self {
            StanzaKind::Presence => "presence",
            StanzaKind::Iq => "iq",
            StanzaKind::Message => "message",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IqType {
    Get,
    Set,
    Result,
    Error,
}

impl IqType {
    fn as_str(self) -> &'static str {
        match self {
            IqType::Get => "get",
            IqType::Set => "set",
            IqType::Result => "result",
            IqType::Error => "error",
        }
    }

    pub fn is_request(self) -> bool {
        matches!(self, IqType::Get | IqType::Set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresenceType {
    Available,
    Subscribe,
    Subscribed,
    Unsubscribed,
}

impl PresenceType {
    fn as_str(self) -> Option<&'static str> {
        match self {
            PresenceType::Available => None,
            PresenceType::Subscribe => Some("subscribe"),
            PresenceType::Subscribed => Some("subscribed"),
            PresenceType::Unsubscribed => Some("unsubscribed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stanza {
    pub kind: StanzaKind,
    pub from: Option<Jid>,
    pub to: Option<Jid>,
    pub id: Option<String>,
    pub iq_type: Option<IqType>,
    pub presence_type: Option<PresenceType>,
    /// Message `type` attribute, kept verbatim.
    pub message_type: Option<String>,
    pub payload: Vec<XmlNode>,
}

/// `<Value xmlns='forte'>text</Value>`; an empty text gives `<Value xmlns='forte'/>`.
pub fn value_element(text: &str) -> XmlNode {
    XmlNode::new("Value").with_attr("xmlns", FORTE_NS).with_text(text)
}

impl Stanza {
    fn bare(kind: StanzaKind) -> Stanza {
        Stanza {
            kind,
            from: None,
            to: None,
            id: None,
            iq_type: None,
            presence_type: None,
            message_type: None,
            payload: Vec::new(),
        }
    }

    pub fn presence(presence_type: PresenceType) -> Stanza {
        Stanza { presence_type: Some(presence_type), ..Stanza::bare(StanzaKind::Presence) }
    }

    pub fn iq(iq_type: IqType, id: impl Into<String>) -> Stanza {
        Stanza { iq_type: Some(iq_type), id: Some(id.into()), ..Stanza::bare(StanzaKind::Iq) }
    }

    pub fn message() -> Stanza {
        Stanza::bare(StanzaKind::Message)
    }

    pub fn with_to(mut self, to: Jid) -> Self {
        self.to = Some(to);
        self
    }

    pub fn with_from(mut self, from: Jid) -> Self {
        self.from = Some(from);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_payload(mut self, node: XmlNode) -> Self {
        self.payload.push(node);
        self
    }

    /// An iq error answering `request`, with a stanza error condition.
    pub fn iq_error_for(request: &Stanza, condition: &str) -> Stanza {
        let error = XmlNode::new("error")
            .with_attr("type", "cancel")
            .with_child(XmlNode::new(condition).with_attr("xmlns", STANZA_ERROR_NS));
        let mut reply = Stanza::iq(IqType::Error, request.id.clone().unwrap_or_default()).with_payload(error);
        reply.to = request.from.clone();
        reply.from = request.to.clone();
        reply
    }

    /// Text of the first `forte` `Value` child, if any.
    pub fn value_text(&self) -> Option<String> {
        self.payload.iter().find(|n| n.name == "Value" && n.attr("xmlns") == Some(FORTE_NS)).map(XmlNode::text)
    }

    /// Condition element name of an iq error, e.g. `service-unavailable`.
    pub fn error_condition(&self) -> Option<String> {
        self.payload.iter().find(|n| n.name == "error").and_then(|e| e.elements().next()).map(|c| c.name.clone())
    }

    pub fn from_xml(node: &XmlNode) -> Result<Stanza, StanzaError> {
        let kind = match node.name.as_str() {
            "presence" => StanzaKind::Presence,
            "iq" => StanzaKind::Iq,
            "message" => StanzaKind::Message,
            other => return Err(StanzaError::NotAStanza(other.into())),
        };
        let jid_attr = |name| node.attr(name).map(jid_parse).transpose();
        let mut stanza = Stanza::bare(kind);
        stanza.from = jid_attr("from")?;
        stanza.to = jid_attr("to")?;
        stanza.id = node.attr("id").map(str::to_string);
        stanza.payload = node.elements().cloned().collect();
        let type_attr = node.attr("type");
        match kind {
            StanzaKind::Iq => {
                if stanza.id.is_none() {
                    return Err(StanzaError::MissingId);
                }
                stanza.iq_type = Some(match type_attr {
                    Some("get") => IqType::Get,
                    Some("set") => IqType::Set,
                    Some("result") => IqType::Result,
                    Some("error") => IqType::Error,
                    other => {
                        return Err(StanzaError::BadType { attr: "iq type", value: other.unwrap_or_default().into() })
                    }
                });
            }
            StanzaKind::Presence => {
                stanza.presence_type = Some(match type_attr {
                    None => PresenceType::Available,
                    Some("subscribe") => PresenceType::Subscribe,
                    Some("subscribed") => PresenceType::Subscribed,
                    Some("unsubscribed") => PresenceType::Unsubscribed,
                    Some(other) => return Err(StanzaError::BadType { attr: "presence type", value: other.into() }),
                });
            }
            StanzaKind::Message => stanza.message_type = type_attr.map(str::to_string),
        }
        Ok(stanza)
    }

    pub fn to_xml(&self) -> XmlNode {
        let mut node = XmlNode::new(self.kind.element_name());
        let type_attr = match self.kind {
            StanzaKind::Iq => self.iq_type.map(IqType::as_str),
            StanzaKind::Presence => self.presence_type.and_then(PresenceType::as_str),
            StanzaKind::Message => self.message_type.as_deref(),
        };
        if let Some(t) = type_attr {
            node.set_attr("type", t);
        }
        if let Some(id) = &self.id {
            node.set_attr("id", id.as_str());
        }
        if let Some(from) = &self.from {
            node.set_attr("from", from.to_string());
        }
        if let Some(to) = &self.to {
            node.set_attr("to", to.to_string());
        }
        for child in &self.payload {
            node = node.with_child(child.clone());
        }
        node
    }
}

impl fmt::Display for Stanza {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&xml_serialize(&self.to_xml()))
    }
}
