//! The match service. PMU clients stream newline-delimited JSON over TCP;
//! the referee console speaks the same messages over a WebSocket and reads
//! snapshots from `GET /state`. Every mutation funnels through one ordered
//! queue owned by the match actor.

pub mod config;
pub mod protocol;
pub mod queue;
mod service;
mod session;

pub use config::ServeConfig;
pub use protocol::{decode, encode, DecodeError, MessageKind, SeqStatus, SeqTracker, WireMessage};
pub use queue::PendingQueue;
pub use service::{MatchHandle, ServeError, Service, SubmitError};
