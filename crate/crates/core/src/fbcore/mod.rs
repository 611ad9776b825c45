//! Event-driven function blocks: type declarations, networks, a
//! per-resource scheduler with a bounded FIFO queue, the built-in blocks
//! and virtual buttons/LEDs.
//!
//! Data inputs are sampled from their sources when an event is delivered
//! to the block, and emitted events are queued in emission order along
//! the event connections.

pub mod blocks;
pub mod image;
pub mod network;
pub mod queue;
pub mod runtime;
pub mod timer;
pub mod types;

pub use blocks::{gate_behavior, rs_behavior, RsOutput};
pub use image::{IoError, ProcessImage};
pub use network::{Connection, DeviceDecl, FbDecl, FbNetwork, NetworkError, PinRef, ResolvedNetwork};
pub use queue::{EventOccurrence, EventPin, EventQueue, Origin, OriginKind, QueueFull, QUEUE_CAPACITY};
pub use runtime::{
    instantiate_network, Behavior, FbContext, FiredStep, Poster, ResourceRuntime, ResourceServices, ResourceStats,
    RunningResource, RuntimeError, RuntimeHandle, RuntimeOptions, StatsSnapshot, StepReport,
};
pub use timer::TimerService;
pub use types::{resolve_type, BehaviorKind, FbTypeDecl, GateKind, SifbSpec, TypeDeclError};
