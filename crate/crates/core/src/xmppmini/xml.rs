//! A small XML subset: elements, attributes, character data and the five
//! predefined entities. Comments, CDATA, processing instructions and
//! DOCTYPE are rejected.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XmlError {
    #[error("expected </{expected}> but found </{found}> at offset {offset}")]
    TagMismatch { expected: String, found: String, offset: usize },
    #[error("unsupported construct {construct} at offset {offset}")]
    Unsupported { construct: &'static str, offset: usize },
    #[error("unknown entity &{entity}; at offset {offset}")]
    BadEntity { entity: String, offset: usize },
    #[error("duplicate attribute {name:?} at offset {offset}")]
    DuplicateAttribute { name: String, offset: usize },
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { message: String, offset: usize },
    #[error("stream buffer exceeded {0} bytes")]
    Overflow(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlChild {
    Element(XmlNode),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct XmlNode {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<XmlChild>,
}

impl XmlNode {
    pub fn new(name: impl Into<String>) -> Self {
        XmlNode { name: name.into(), ..Default::default() }
    }

    /// Sets an attribute, replacing any previous value of the same name.
    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.set_attr(name, value);
        self
    }

    pub fn with_child(mut self, child: XmlNode) -> Self {
        self.children.push(XmlChild::Element(child));
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        let text = text.into();
        if !text.is_empty() {
            self.children.push(XmlChild::Text(text));
        }
        self
    }

    pub fn set_attr(&mut self, name: impl Into<String>, value: impl Into<String>) {
        let name = name.into();
        let value = value.into();
        match self.attrs.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((name, value)),
        }
    }

    pub fn remove_attr(&mut self, name: &str) {
        self.attrs.retain(|(n, _)| n != name);
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn elements(&self) -> impl Iterator<Item = &XmlNode> {
        self.children.iter().filter_map(|c| match c {
            XmlChild::Element(e) => Some(e),
            XmlChild::Text(_) => None,
        })
    }

    pub fn child(&self, name: &str) -> Option<&XmlNode> {
        self.elements().find(|e| e.name == name)
    }

    /// Concatenated character data of the direct text children.
    pub fn text(&self) -> String {
        self.children
            .iter()
            .filter_map(|c| match c {
                XmlChild::Text(t) => Some(t.as_str()),
                XmlChild::Element(_) => None,
            })
            .collect()
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn write_start(node: &XmlNode, out: &mut String) {
    out.push('<');
    out.push_str(&node.name);
    for (name, value) in &node.attrs {
        let _ = write!(out, " {}='{}'", name, escape(value));
    }
}

fn write_node(node: &XmlNode, out: &mut String) {
    write_start(node, out);
    if node.children.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    for child in &node.children {
        match child {
            XmlChild::Element(e) => write_node(e, out),
            XmlChild::Text(t) => out.push_str(&escape(t)),
        }
    }
    let _ = write!(out, "</{}>", node.name);
}

/// Canonical serialization: single-quoted attributes, self-closing empty
/// elements, all five special characters escaped.
pub fn xml_serialize(node: &XmlNode) -> String {
    let mut out = String::new();
    write_node(node, &mut out);
    out
}

/// The start tag of `node` left open, as used for stream headers.
pub fn open_tag(node: &XmlNode) -> String {
    let mut out = String::new();
    write_start(node, &mut out);
    out.push('>');
    out
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b':' || b >= 0x80
}

fn is_name_char(b: u8) -> bool {
    is_name_start(b) || b.is_ascii_digit() || b == b'-' || b == b'.'
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

/// What a start tag turned out to be.
struct StartTag {
    node: XmlNode,
    self_closing: bool,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn syntax(&self, message: impl Into<String>) -> XmlError {
        XmlError::Syntax { message: message.into(), offset: self.pos }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), XmlError> {
        match self.peek() {
            Some(c) if c == b => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.syntax(format!("expected {:?}, found {:?}", b as char, c as char))),
            None => Err(XmlError::UnexpectedEof),
        }
    }

    fn name(&mut self) -> Result<&'a str, XmlError> {
        let start = self.pos;
        match self.peek() {
            Some(b) if is_name_start(b) => self.pos += 1,
            Some(_) => return Err(self.syntax("expected a name")),
            None => return Err(XmlError::UnexpectedEof),
        }
        while self.peek().is_some_and(is_name_char) {
            self.pos += 1;
        }
        Ok(&self.src[start..self.pos])
    }

    fn check_markup(&self) -> Result<(), XmlError> {
        let rest = &self.bytes[self.pos..];
        let construct = if rest.starts_with(b"<!--") {
            "comment"
        } else if rest.starts_with(b"<![CDATA[") {
            "CDATA section"
        } else if rest.starts_with(b"<!") {
            "DOCTYPE"
        } else if rest.starts_with(b"<?") {
            "processing instruction"
        } else {
            return Ok(());
        };
        Err(XmlError::Unsupported { construct, offset: self.pos })
    }

    /// Decodes character data up to (not including) `stop`.
    fn chars_until(&mut self, stop: &[u8]) -> Result<String, XmlError> {
        let mut out = String::new();
        let mut run = self.pos;
        while let Some(b) = self.peek() {
            if stop.contains(&b) {
                break;
            }
            match b {
                b'&' => {
                    out.push_str(&self.src[run..self.pos]);
                    out.push(self.entity()?);
                    run = self.pos;
                }
                b'<' => return Err(self.syntax("'<' not allowed here")),
                _ => self.pos += 1,
            }
        }
        out.push_str(&self.src[run..self.pos]);
        Ok(out)
    }

    fn entity(&mut self) -> Result<char, XmlError> {
        let offset = self.pos;
        let end = self.bytes[self.pos..].iter().position(|&b| b == b';').ok_or(XmlError::UnexpectedEof)?;
        let entity = &self.src[self.pos + 1..self.pos + end];
        let ch = match entity {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            _ => return Err(XmlError::BadEntity { entity: entity.into(), offset }),
        };
        self.pos += end + 1;
        Ok(ch)
    }

    fn start_tag(&mut self) -> Result<StartTag, XmlError> {
        self.check_markup()?;
        self.expect(b'<')?;
        let mut node = XmlNode::new(self.name()?);
        loop {
            let had_ws = matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n'));
            self.skip_ws();
            match self.peek() {
                None => return Err(XmlError::UnexpectedEof),
                Some(b'/') => {
                    self.pos += 1;
                    self.expect(b'>')?;
                    return Ok(StartTag { node, self_closing: true });
                }
                Some(b'>') => {
                    self.pos += 1;
                    return Ok(StartTag { node, self_closing: false });
                }
                Some(_) if !had_ws => return Err(self.syntax("expected whitespace before attribute")),
                Some(_) => {
                    let offset = self.pos;
                    let name = self.name()?;
                    self.skip_ws();
                    self.expect(b'=')?;
                    self.skip_ws();
                    let quote = match self.peek() {
                        Some(q @ (b'\'' | b'"')) => q,
                        Some(_) => return Err(self.syntax("attribute value must be quoted")),
                        None => return Err(XmlError::UnexpectedEof),
                    };
                    self.pos += 1;
                    let value = self.chars_until(&[quote])?;
                    self.expect(quote)?;
                    if node.attr(name).is_some() {
                        return Err(XmlError::DuplicateAttribute { name: name.into(), offset });
                    }
                    node.attrs.push((name.into(), value));
                }
            }
        }
    }

    fn element(&mut self) -> Result<XmlNode, XmlError> {
        let StartTag { mut node, self_closing } = self.start_tag()?;
        if self_closing {
            return Ok(node);
        }
        loop {
            match self.peek() {
                None => return Err(XmlError::UnexpectedEof),
                Some(b'<') if self.bytes.get(self.pos + 1) == Some(&b'/') => {
                    let offset = self.pos;
                    self.pos += 2;
                    let found = self.name()?;
                    self.skip_ws();
                    self.expect(b'>')?;
                    if found != node.name {
                        return Err(XmlError::TagMismatch { expected: node.name, found: found.into(), offset });
                    }
                    return Ok(node);
                }
                Some(b'<') => {
                    let child = self.element()?;
                    node.children.push(XmlChild::Element(child));
                }
                Some(_) => {
                    let text = self.chars_until(b"<")?;
                    node.children.push(XmlChild::Text(text));
                }
            }
        }
    }
}

/// Parses a document consisting of exactly one element (surrounding
/// whitespace allowed).
pub fn xml_parse(text: &str) -> Result<XmlNode, XmlError> {
    let mut parser = Parser::new(text);
    parser.skip_ws();
    let node = parser.element()?;
    parser.skip_ws();
    if parser.pos != text.len() {
        return Err(parser.syntax("content after the root element"));
    }
    Ok(node)
}

/// One unit read from an XML stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamEvent {
    /// The opening `<stream ...>` tag (children empty).
    Open(XmlNode),
    /// A complete top-level child element.
    Stanza(XmlNode),
    /// The closing `</stream>` tag.
    Close,
}

/// Incrementally splits a byte stream into stream-level events.
#[derive(Debug, Default)]
pub struct StreamSplitter {
    buf: Vec<u8>,
    opened: bool,
    closed: bool,
}

/// Largest amount of unparsed data a splitter buffers.
pub const MAX_STREAM_BUFFER: usize = 1 << 20;

impl StreamSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Result<(), XmlError> {
        self.buf.extend_from_slice(bytes);
        if self.buf.len() > MAX_STREAM_BUFFER {
            return Err(XmlError::Overflow(MAX_STREAM_BUFFER));
        }
        Ok(())
    }

    /// Returns the next complete event and the number of bytes it took
    /// (leading whitespace included), or `None` if more input is needed.
    pub fn next_event(&mut self) -> Result<Option<(StreamEvent, usize)>, XmlError> {
        if self.closed {
            return Ok(None);
        }
        let ws = self.buf.iter().take_while(|b| b.is_ascii_whitespace()).count();
        let rest = &self.buf[ws..];
        if rest.is_empty() {
            return Ok(None);
        }
        if rest[0] != b'<' {
            return Err(XmlError::Syntax { message: "character data at stream level".into(), offset: ws });
        }
        let Some(end) = scan_element(rest, !self.opened)? else {
            return Ok(None);
        };
        let chunk = std::str::from_utf8(&rest[..end])
            .map_err(|e| XmlError::Syntax { message: format!("invalid UTF-8: {e}"), offset: ws })?;
        let event = if !self.opened {
            let mut parser = Parser::new(chunk);
            let tag = parser.start_tag()?;
            if tag.node.name != "stream" || tag.self_closing {
                return Err(XmlError::Syntax {
                    message: format!("expected <stream>, got <{}>", tag.node.name),
                    offset: ws,
                });
            }
            self.opened = true;
            StreamEvent::Open(tag.node)
        } else if chunk.starts_with("</") {
            let name = chunk[2..chunk.len() - 1].trim();
            if name != "stream" {
                return Err(XmlError::TagMismatch { expected: "stream".into(), found: name.into(), offset: ws });
            }
            self.closed = true;
            StreamEvent::Close
        } else {
            StreamEvent::Stanza(xml_parse(chunk)?)
        };
        let used = ws + end;
        self.buf.drain(..used);
        Ok(Some((event, used)))
    }
}

/// Finds the end of the first tag (when `tag_only`) or of the first complete
/// element in `bytes`, which starts with `<`. A leading end tag counts as
/// complete on its own.
fn scan_element(bytes: &[u8], tag_only: bool) -> Result<Option<usize>, XmlError> {
    let mut depth = 0usize;
    let mut pos = 0;
    loop {
        while pos < bytes.len() && bytes[pos] != b'<' {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Ok(None);
        }
        let start = pos;
        if bytes[start..].starts_with(b"<!") || bytes[start..].starts_with(b"<?") {
            return Err(XmlError::Unsupported {
                construct: if bytes[start..].starts_with(b"<?") {
                    "processing instruction"
                } else {
                    "markup declaration"
                },
                offset: start,
            });
        }
        // find the '>' closing this tag, skipping quoted attribute values
        let mut quote = None;
        let mut close = None;
        for (i, &b) in bytes[start + 1..].iter().enumerate() {
            match (quote, b) {
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, b'\'' | b'"') => quote = Some(b),
                (None, b'>') => {
                    close = Some(start + 1 + i);
                    break;
                }
                (None, b'<') => {
                    return Err(XmlError::Syntax { message: "'<' inside a tag".into(), offset: start + 1 + i })
                }
                _ => {}
            }
        }
        let Some(close) = close else {
            return Ok(None);
        };
        pos = close + 1;
        if tag_only {
            return Ok(Some(pos));
        }
        if bytes[start + 1] == b'/' {
            if depth == 0 {
                return Ok(Some(pos));
            }
            depth -= 1;
        } else if bytes[close - 1] != b'/' {
            depth += 1;
        }
        if depth == 0 {
            return Ok(Some(pos));
        }
    }
}
