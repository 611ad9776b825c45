//! The `fbdk` payload layer: a fixed application-tag BER value codec.
//!
//! | kind    | tag  | body                                   |
//! |---------|------|----------------------------------------|
//! | BOOL    | 0x40 / 0x41 | none (value lives in the tag)   |
//! | SINT    | 0x42 | 1 octet                                |
//! | INT     | 0x43 | 2 octets, big-endian two's complement  |
//! | DINT    | 0x44 | 4 octets, big-endian two's complement  |
//! | STRING  | 0x50 | 2-octet big-endian length, UTF-8 bytes |
//!
//! Every encoding is self-delimiting, so a frame is the plain
//! concatenation of its values.

use crate::value::{Value, MAX_STRING_LEN};

use super::WireFrame;

pub const TAG_BOOL_FALSE: u8 = 0x40;
pub const TAG_BOOL_TRUE: u8 = 0x41;
pub const TAG_SINT: u8 = 0x42;
pub const TAG_INT: u8 = 0x43;
pub const TAG_DINT: u8 = 0x44;
pub const TAG_STRING: u8 = 0x50;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("STRING of {0} bytes exceeds the 65535-byte limit")]
    StringTooLong(usize),
    #[error("unknown tag 0x{tag:02x} at offset {offset}")]
    UnknownTag { tag: u8, offset: usize },
    #[error("truncated value at offset {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("STRING at offset {offset} is not valid UTF-8")]
    InvalidUtf8 { offset: usize },
}

/// Appends the encoding of one value to `out`.
pub fn encode_value(value: &Value, out: &mut Vec<u8>) -> Result<(), CodecError> {
    match value {
        Value::Bool(false) => out.push(TAG_BOOL_FALSE),
        Value::Bool(true) => out.push(TAG_BOOL_TRUE),
        Value::Sint(v) => {
            out.push(TAG_SINT);
            out.extend_from_slice(&v.to_be_bytes());
        }
        Value::Int(v) => {
            out.push(TAG_INT);
            out.extend_from_slice(&v.to_be_bytes());
        }
        Value::Dint(v) => {
            out.push(TAG_DINT);
            out.extend_from_slice(&v.to_be_bytes());
        }
        Value::String(s) => {
            if s.len() > MAX_STRING_LEN {
                return Err(CodecError::StringTooLong(s.len()));
            }
            out.push(TAG_STRING);
            out.extend_from_slice(&(s.len() as u16).to_be_bytes());
            out.extend_from_slice(s.as_bytes());
        }
    }
    Ok(())
}

pub fn ber_encode(values: &[Value]) -> Result<WireFrame, CodecError> {
    let mut out = Vec::with_capacity(values.len() * 3);
    for value in values {
        encode_value(value, &mut out)?;
    }
    Ok(WireFrame::new(out))
}

pub fn ber_decode(frame: &WireFrame) -> Result<Vec<Value>, CodecError> {
    let bytes = frame.as_bytes();
    let mut values = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (value, used) = decode_value(bytes, pos)?;
        values.push(value);
        pos += used;
    }
    Ok(values)
}

fn take(bytes: &[u8], offset: usize, start: usize, len: usize) -> Result<&[u8], CodecError> {
    bytes.get(start..start + len).ok_or_else(|| CodecError::Truncated { offset, needed: start + len - bytes.len() })
}

/// Decodes the value starting at `offset`, returning it and the number of
/// octets consumed.
fn decode_value(bytes: &[u8], offset: usize) -> Result<(Value, usize), CodecError> {
    let tag = bytes[offset];
    let body = offset + 1;
    match tag {
        TAG_BOOL_FALSE => Ok((Value::Bool(false), 1)),
        TAG_BOOL_TRUE => Ok((Value::Bool(true), 1)),
        TAG_SINT => {
            let b = take(bytes, offset, body, 1)?;
            Ok((Value::Sint(i8::from_be_bytes([b[0]])), 2))
        }
        TAG_INT => {
            let b = take(bytes, offset, body, 2)?;
            Ok((Value::Int(i16::from_be_bytes([b[0], b[1]])), 3))
        }
        TAG_DINT => {
            let b = take(bytes, offset, body, 4)?;
            Ok((Value::Dint(i32::from_be_bytes([b[0], b[1], b[2], b[3]])), 5))
        }
        TAG_STRING => {
            let len = take(bytes, offset, body, 2)?;
            let len = usize::from(u16::from_be_bytes([len[0], len[1]]));
            let text = take(bytes, offset, body + 2, len)?;
            let text = std::str::from_utf8(text).map_err(|_| CodecError::InvalidUtf8 { offset })?;
            Ok((Value::String(text.to_string()), 3 + len))
        }
        tag => Err(CodecError::UnknownTag { tag, offset }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(bytes: &[u8]) -> WireFrame {
        WireFrame::new(bytes.to_vec())
    }

    #[test]
    fn empty_list_is_empty_frame() {
        assert!(ber_encode(&[]).unwrap().is_empty());
        assert_eq!(ber_decode(&frame(&[])).unwrap(), vec![]);
    }

    #[test]
    fn truncated_int() {
        assert_eq!(ber_decode(&frame(&[0x43, 0x00])), Err(CodecError::Truncated { offset: 0, needed: 1 }));
    }

    #[test]
    fn truncated_string_body() {
        assert!(matches!(
            ber_decode(&frame(&[0x41, 0x50, 0x00, 0x03, b'a'])),
            Err(CodecError::Truncated { offset: 1, .. })
        ));
    }

    #[test]
    fn unknown_tag_and_trailing_garbage() {
        assert_eq!(ber_decode(&frame(&[0x30])), Err(CodecError::UnknownTag { tag: 0x30, offset: 0 }));
        // a complete value followed by a stray octet is rejected
        assert_eq!(ber_decode(&frame(&[0x41, 0xff])), Err(CodecError::UnknownTag { tag: 0xff, offset: 1 }));
    }

    #[test]
    fn invalid_utf8() {
        assert_eq!(ber_decode(&frame(&[0x50, 0x00, 0x01, 0xff])), Err(CodecError::InvalidUtf8 { offset: 0 }));
    }

    #[test]
    fn oversized_string() {
        let long = Value::String("x".repeat(MAX_STRING_LEN + 1));
        assert_eq!(ber_encode(&[long]), Err(CodecError::StringTooLong(MAX_STRING_LEN + 1)));
    }
}
