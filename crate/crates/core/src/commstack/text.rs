//! Byte-to-text bridge for text-only transports (standard Base64, padded).

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::WireFrame;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextBridgeError {
    #[error("invalid Base64 character {ch:?} at offset {offset}")]
    InvalidCharacter { ch: char, offset: usize },
    #[error("invalid Base64 length or padding")]
    InvalidPadding,
}

pub fn b64_encode(frame: &WireFrame) -> String {
    STANDARD.encode(frame.as_bytes())
}

/// Strict decoding: every character must be in the alphabet and padding
/// must be canonical.
pub fn b64_decode(text: &str) -> Result<WireFrame, TextBridgeError> {
    STANDARD.decode(text).map(WireFrame::new).map_err(|err| match err {
        base64::DecodeError::InvalidByte(offset, byte) => {
            // '=' in the middle of the input is a padding problem, not a bad symbol
            if byte == b'=' {
                TextBridgeError::InvalidPadding
            } else {
                TextBridgeError::InvalidCharacter {
                    ch: text[offset..].chars().next().unwrap_or(char::from(byte)),
                    offset,
                }
            }
        }
        _ => TextBridgeError::InvalidPadding,
    })
}
