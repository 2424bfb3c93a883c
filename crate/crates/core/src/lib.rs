//! Causal consistency with configurable tracking and checking groups.
//!
//! Servers stamp writes with hybrid logical clocks, track dependencies per
//! tracking group and decide read visibility per checking group. The crate
//! ships a deterministic network simulator, a trace-based consistency
//! checker and the throughput experiments built on both.

pub mod checker;
pub mod cli;
pub mod client;
pub mod config;
pub mod experiments;
pub mod grouping;
pub mod hlc;
pub mod model;
pub mod sim;
pub mod server;
pub mod trace;

pub use client::{ClientSession, OpOutcome, PinnedBalancer};
pub use config::SystemConfig;
pub use grouping::{GroupConfig, Preset, Topology};
pub use hlc::HlcState;
pub use model::{
    CheckingGroupId, ClientId, DependencySet, HlcTimestamp, Key, ServerId, TrackingGroupId, Value,
    VersionVector,
};
pub use server::{Server, ServerParams};
pub use trace::{Trace, TraceRecord};
