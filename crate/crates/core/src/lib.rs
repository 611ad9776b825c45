//! Function block networks whose devices talk over pluggable
//! communication stacks: UDP, TCP or a minimal XMPP broker.

pub mod appcli;
pub mod bench;
pub mod commstack;
pub mod fbcore;
pub mod sifb;
pub mod transports;
pub mod value;
pub mod xmppmini;
