//! The layered communication model: ID strings, the `fbdk` value codec,
//! the Base64 text bridge, and composition of layers into endpoints.

pub mod ber;
pub mod id;
mod stack;
pub mod text;

pub use ber::{ber_decode, ber_encode, CodecError};
pub use id::{parse_comm_id, CommId, IdError, LayerSpec};
pub use stack::{build_stack, CommEndpoint, CommError, EndpointHandler, Inbound, Pattern, Responder, StackOptions};
pub use text::{b64_decode, b64_encode, TextBridgeError};

/// An opaque octet sequence as handed to a transport.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct WireFrame(Vec<u8>);

impl WireFrame {
    pub fn new(bytes: Vec<u8>) -> Self {
        WireFrame(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u8>> for WireFrame {
    fn from(bytes: Vec<u8>) -> Self {
        WireFrame(bytes)
    }
}

impl From<&[u8]> for WireFrame {
    fn from(bytes: &[u8]) -> Self {
        WireFrame(bytes.to_vec())
    }
}
