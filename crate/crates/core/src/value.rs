//! Elementary data values carried on data pins and through wire codecs.

use std::fmt;
use std::str::FromStr;

/// Largest STRING payload representable by the 2-octet length field.
pub const MAX_STRING_LEN: usize = u16::MAX as usize;

/// The elementary type of a [`Value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Bool,
    Sint,
    Int,
    Dint,
    String,
}

impl ValueKind {
    pub const ALL: [ValueKind; 5] =
        [ValueKind::Bool, ValueKind::Sint, ValueKind::Int, ValueKind::Dint, ValueKind::String];

    /// The zero value every pin of this kind starts with.
    pub fn zero(self) -> Value {
        match self {
            ValueKind::Bool => Value::Bool(false),
            ValueKind::Sint => Value::Sint(0),
            ValueKind::Int => Value::Int(0),
            ValueKind::Dint => Value::Dint(0),
            ValueKind::String => Value::String(String::new()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Bool => "BOOL",
            ValueKind::Sint => "SINT",
            ValueKind::Int => "INT",
            ValueKind::Dint => "DINT",
            ValueKind::String => "STRING",
        }
    }

    /// Parses a configuration literal of this kind.
    ///
    /// BOOL accepts `TRUE`/`FALSE`/`1`/`0` (case-insensitive), the integer
    /// kinds accept decimal text, STRING takes the text verbatim.
    pub fn parse_literal(self, text: &str) -> Result<Value, ValueError> {
        let bad = || ValueError::BadLiteral { kind: self, text: text.to_string() };
        match self {
            ValueKind::Bool => match text.to_ascii_uppercase().as_str() {
                "TRUE" | "1" => Ok(Value::Bool(true)),
                "FALSE" | "0" => Ok(Value::Bool(false)),
                _ => Err(bad()),
            },
            ValueKind::Sint => text.trim().parse().map(Value::Sint).map_err(|_| bad()),
            ValueKind::Int => text.trim().parse().map(Value::Int).map_err(|_| bad()),
            ValueKind::Dint => text.trim().parse().map(Value::Dint).map_err(|_| bad()),
            ValueKind::String => Value::string(text),
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ValueKind {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ValueError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    #[error("STRING of {0} bytes exceeds the {MAX_STRING_LEN}-byte limit")]
    StringTooLong(usize),
    #[error("cannot read {text:?} as {kind}")]
    BadLiteral { kind: ValueKind, text: String },
    #[error("unknown value kind {0:?}")]
    UnknownKind(String),
}

/// A typed value. The payload width always matches the kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Sint(i8),
    Int(i16),
    Dint(i32),
    String(String),
}

impl Value {
    /// Builds a STRING value, enforcing the length limit.
    pub fn string(text: impl Into<String>) -> Result<Value, ValueError> {
        let text = text.into();
        if text.len() > MAX_STRING_LEN {
            return Err(ValueError::StringTooLong(text.len()));
        }
        Ok(Value::String(text))
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Bool(_) => ValueKind::Bool,
            Value::Sint(_) => ValueKind::Sint,
            Value::Int(_) => ValueKind::Int,
            Value::Dint(_) => ValueKind::Dint,
            Value::String(_) => ValueKind::String,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Sint(v) => Some(i64::from(*v)),
            Value::Int(v) => Some(i64::from(*v)),
            Value::Dint(v) => Some(i64::from(*v)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            Value::Sint(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Dint(v) => write!(f, "{v}"),
            Value::String(s) => write!(f, "'{s}'"),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}
