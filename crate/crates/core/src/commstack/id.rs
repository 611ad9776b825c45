//! The `layer[p1:p2].layer[...]` ID grammar.

use std::fmt;
use std::str::FromStr;

/// Layer names understood by the stack.
pub const PAYLOAD_LAYERS: &[&str] = &["fbdk"];
pub const TRANSPORT_LAYERS: &[&str] = &["ip", "xmpp"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdError {
    #[error("unbalanced brackets at offset {0}")]
    UnbalancedBrackets(usize),
    #[error("empty layer segment at offset {0}")]
    EmptySegment(usize),
    #[error("layer segment {0:?} is missing its [...] parameter list")]
    MissingBrackets(String),
    #[error("unexpected text after ']' in segment {0:?}")]
    TrailingText(String),
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error("transport layer {0:?} must be the last layer")]
    NonTerminalTransport(String),
    #[error("the last layer must be a transport (ip or xmpp)")]
    MissingTransport,
}

/// One layer of a communication ID: a name and its raw parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub params: Vec<String>,
}

impl LayerSpec {
    pub fn is_transport(&self) -> bool {
        TRANSPORT_LAYERS.contains(&self.name.as_str())
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.params.join(":"))
    }
}

/// A parsed ID string: payload layers first, the transport layer last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommId {
    layers: Vec<LayerSpec>,
}

impl CommId {
    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn transport(&self) -> &LayerSpec {
        self.layers.last().expect("a CommId always has a transport layer")
    }

    pub fn payload_layers(&self) -> &[LayerSpec] {
        &self.layers[..self.layers.len() - 1]
    }
}

impl fmt::Display for CommId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{layer}")?;
        }
        Ok(())
    }
}

impl FromStr for CommId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_comm_id(s)
    }
}

/// Splits `text` on `sep` wherever the bracket depth is zero, returning the
/// pieces with their starting offsets.
fn split_top_level(text: &str, sep: char, base: usize) -> Result<Vec<(usize, &str)>, IdError> {
    let mut depth = 0usize;
    let mut start = 0;
    let mut pieces = Vec::new();
    for (i, ch) in text.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth = depth.checked_sub(1).ok_or(IdError::UnbalancedBrackets(base + i))?;
            }
            c if c == sep && depth == 0 => {
                pieces.push((base + start, &text[start..i]));
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(IdError::UnbalancedBrackets(base + text.len()));
    }
    pieces.push((base + start, &text[start..]));
    Ok(pieces)
}

fn parse_layer(offset: usize, segment: &str) -> Result<LayerSpec, IdError> {
    if segment.is_empty() {
        return Err(IdError::EmptySegment(offset));
    }
    let open = segment.find('[').ok_or_else(|| IdError::MissingBrackets(segment.to_string()))?;
    // the matching bracket of the first '[' closes the parameter list
    let mut depth = 0usize;
    let mut close = None;
    for (i, ch) in segment[open..].char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(open + i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close.ok_or(IdError::UnbalancedBrackets(offset + segment.len()))?;
    if close + 1 != segment.len() {
        return Err(IdError::TrailingText(segment.to_string()));
    }
    let name = &segment[..open];
    if name.is_empty() {
        return Err(IdError::EmptySegment(offset));
    }
    if !PAYLOAD_LAYERS.contains(&name) && !TRANSPORT_LAYERS.contains(&name) {
        return Err(IdError::UnknownLayer(name.to_string()));
    }
    let inner = &segment[open + 1..close];
    let params = if inner.is_empty() {
        Vec::new()
    } else {
        split_top_level(inner, ':', offset + open + 1)?.into_iter().map(|(_, p)| p.to_string()).collect()
    };
    Ok(LayerSpec { name: name.to_string(), params })
}

/// Parses an ID string such as `fbdk[].ip[192.168.20.1:61499]`.
///
/// Segments are split on `.` and parameters on `:` only at bracket depth
/// zero, so dotted addresses and JIDs survive intact. Parameter text is kept
/// verbatim.
pub fn parse_comm_id(id: &str) -> Result<CommId, IdError> {
    let mut layers = Vec::new();
    for (offset, segment) in split_top_level(id, '.', 0)? {
        layers.push(parse_layer(offset, segment)?);
    }
    let last = layers.len() - 1;
    for (i, layer) in layers.iter().enumerate() {
        if layer.is_transport() && i != last {
            return Err(IdError::NonTerminalTransport(layer.name.clone()));
        }
    }
    if !layers[last].is_transport() {
        return Err(IdError::MissingTransport);
    }
    Ok(CommId { layers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(name: &str, params: &[&str]) -> LayerSpec {
        LayerSpec { name: name.into(), params: params.iter().map(|p| p.to_string()).collect() }
    }

    #[test]
    fn ip_example() {
        let id = parse_comm_id("fbdk[].ip[192.168.20.1:61499]").unwrap();
        assert_eq!(id.layers(), &[layer("fbdk", &[]), layer("ip", &["192.168.20.1", "61499"])]);
    }

    #[test]
    fn xmpp_subscriber_example() {
        let text = "fbdk[].xmpp[1:cemdsm@localhost/res:***:192.168.1.210:netop@localhost/res]";
        let id = parse_comm_id(text).unwrap();
        assert_eq!(
            id.layers(),
            &[
                layer("fbdk", &[]),
                layer("xmpp", &["1", "cemdsm@localhost/res", "***", "192.168.1.210", "netop@localhost/res"])
            ]
        );
        assert_eq!(id.to_string(), text);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_comm_id("fbdk[]"), Err(IdError::MissingTransport));
        assert_eq!(parse_comm_id("ip[1.2.3.4:5].fbdk[]"), Err(IdError::NonTerminalTransport("ip".into())));
        assert!(matches!(parse_comm_id("fbdk[.ip[a:1]"), Err(IdError::UnbalancedBrackets(_))));
        assert!(matches!(parse_comm_id("fbdk[]].ip[a]"), Err(IdError::UnbalancedBrackets(_))));
        assert_eq!(parse_comm_id("fbdk[]..ip[a]"), Err(IdError::EmptySegment(7)));
        assert_eq!(parse_comm_id(""), Err(IdError::EmptySegment(0)));
        assert_eq!(parse_comm_id("fbdk.ip[a]"), Err(IdError::MissingBrackets("fbdk".into())));
        assert_eq!(parse_comm_id("fbdk[]x.ip[a]"), Err(IdError::TrailingText("fbdk[]x".into())));
        assert_eq!(parse_comm_id("aes[].ip[a]"), Err(IdError::UnknownLayer("aes".into())));
        assert_eq!(parse_comm_id("[].ip[a]"), Err(IdError::EmptySegment(0)));
    }

    #[test]
    fn transport_alone_and_empty_params() {
        let id = parse_comm_id("ip[::]").unwrap();
        assert_eq!(id.transport().params, vec!["", "", ""]);
        assert!(id.payload_layers().is_empty());
    }

    #[test]
    fn nested_brackets_stay_in_param() {
        let id = parse_comm_id("fbdk[].ip[a[b:c]:d]").unwrap();
        assert_eq!(id.transport().params, vec!["a[b:c]", "d"]);
    }
}
