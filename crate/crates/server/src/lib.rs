//! Real-time driving sessions over WebSocket.
//!
//! A client connects to `/ws`, gets a session with the server's default
//! vehicle and model, streams control intents and receives state messages
//! with batched trace points at the session's stream rate. See
//! `docs/protocol.md` for the message reference.
//!
//! - [`protocol`]: wire types.
//! - [`session`]: a clock-free session around the core engine.
//! - [`connection`]: per-connection message handling and the session registry.
//! - [`pacing`]: wall-clock step scheduling with bounded catch-up.
//! - [`server`]: the axum transport.

pub mod connection;
pub mod pacing;
pub mod protocol;
pub mod server;
pub mod session;

pub use connection::{Connection, Hub};
pub use server::{port_from_env, router, run, serve, DEFAULT_PORT, PORT_ENV};
pub use session::{Catalog, Session, SessionConfig, SessionError};
