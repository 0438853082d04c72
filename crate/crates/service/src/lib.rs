//! Control service for the hybrid face.
//!
//! ```text
//! command lines ──▶ Service ──▶ Engine (timeline ▸ overlay ▸ render) ──▶ frames
//!                     │
//!                     └──▶ SessionRunner ──▶ onset log, confusion matrix ──▶ export
//! ```
//!
//! [`Service`] is a pure state machine on a logical clock; [`server`] wraps
//! it in a real-time tick loop with a TCP command port and a websocket frame
//! stream.

pub mod engine;
pub mod error;
pub mod export;
pub mod protocol;
pub mod run;
pub mod server;
pub mod service;
pub mod session;

pub use engine::{Engine, EngineConfig, Frame};
pub use error::{Result, ServiceError};
pub use export::export_session;
pub use protocol::{parse_request, Command, ErrorCode, Reply, Request};
pub use run::{run_scripted, RunConfig, RunOutcome};
pub use service::{replay, ReplayLog, ReplayReport, Service, ServiceConfig};
pub use session::{ConfusionMatrix, OnsetLogEntry, ScriptedResponder, SessionConfig, SessionRecord, SessionRunner};
