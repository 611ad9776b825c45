use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JidError {
    #[error("JID {0:?} has no '@'")]
    MissingAt(String),
    #[error("JID {0:?} has an empty node")]
    EmptyNode(String),
    #[error("JID {0:?} has an empty domain")]
    EmptyDomain(String),
}

/// An address `node@domain[/resource]`. An empty resource makes a bare JID.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Jid {
    node: String,
    domain: String,
    resource: String,
}

impl Jid {
    pub fn new(node: &str, domain: &str, resource: &str) -> Result<Jid, JidError> {
        let text = || format!("{node}@{domain}/{resource}");
        if node.is_empty() {
            return Err(JidError::EmptyNode(text()));
        }
        if domain.is_empty() {
            return Err(JidError::EmptyDomain(text()));
        }
        if node.contains('@') || domain.contains('/') {
            return Err(JidError::MissingAt(text()));
        }
        Ok(Jid { node: node.into(), domain: domain.into(), resource: resource.into() })
    }

    pub fn node(&self) -> &str {
        &self.node
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn resource(&self) -> &str {
        &self.resource
    }

    pub fn is_bare(&self) -> bool {
        self.resource.is_empty()
    }

    pub fn bare(&self) -> Jid {
        Jid { node: self.node.clone(), domain: self.domain.clone(), resource: String::new() }
    }

    pub fn with_resource(&self, resource: &str) -> Jid {
        Jid { resource: resource.into(), ..self.bare() }
    }
}

/// Splits at the first `@` and the first `/` after it.
pub fn jid_parse(text: &str) -> Result<Jid, JidError> {
    let (node, rest) = text.split_once('@').ok_or_else(|| JidError::MissingAt(text.into()))?;
    let (domain, resource) = rest.split_once('/').unwrap_or((rest, ""));
    if node.is_empty() {
        return Err(JidError::EmptyNode(text.into()));
    }
    if domain.is_empty() {
        return Err(JidError::EmptyDomain(text.into()));
    }
    Ok(Jid { node: node.into(), domain: domain.into(), resource: resource.into() })
}

impl FromStr for Jid {
    type Err = JidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        jid_parse(s)
    }
}

impl fmt::Display for Jid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.node, self.domain)?;
        if !self.resource.is_empty() {
            write!(f, "/{}", self.resource)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_and_bare() {
        let jid = jid_parse("netop@localhost/res").unwrap();
        assert_eq!((jid.node(), jid.domain(), jid.resource()), ("netop", "localhost", "res"));
        assert!(!jid.is_bare());
        assert_eq!(jid.bare().to_string(), "netop@localhost");

        let bare = jid_parse("a@b").unwrap();
        assert_eq!((bare.node(), bare.domain(), bare.resource()), ("a", "b", ""));
        assert!(bare.is_bare());
    }

    #[test]
    fn resource_keeps_later_separators() {
        let jid = jid_parse("a@b/c/d@e").unwrap();
        assert_eq!(jid.resource(), "c/d@e");
        assert_eq!(jid.to_string(), "a@b/c/d@e");
    }

    #[test]
    fn errors() {
        assert_eq!(jid_parse("@b/c"), Err(JidError::EmptyNode("@b/c".into())));
        assert_eq!(jid_parse("a@/c"), Err(JidError::EmptyDomain("a@/c".into())));
        assert_eq!(jid_parse("ab"), Err(JidError::MissingAt("ab".into())));
    }
}
