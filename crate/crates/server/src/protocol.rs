//! Wire format: one JSON object per WebSocket text frame,
//! `{"seq": n, "kind": "...", "payload": {...}}`. Kinds without a payload
//! omit the field. All geometry is in the external y-right convention.

use std::collections::BTreeMap;

use gm3_core::engine::script::InitialState;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub body: ClientBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ClientBody {
    /// Closes the current session and opens a new one.
    Configure(ConfigureRequest),
    Control(ControlPayload),
    TraceReset,
    StateReset,
    LogExport,
}

/// Session parameters; omitted fields take the server defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigureRequest {
    pub vehicle: Option<String>,
    pub model: Option<String>,
    pub dt: Option<f64>,
    pub stream_rate: Option<f64>,
    pub initial_state: Option<InitialState>,
}

/// Normalized intents; out-of-range values are clamped by the server.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlPayload {
    pub steer: f64,
    pub speed: f64,
    pub brake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub body: ServerBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ServerBody {
    Hello(Hello),
    State(StatePayload),
    TraceReset(ResetAck),
    StateReset(ResetAck),
    Error(ErrorPayload),
    LogExport(LogExportPayload),
}

impl ServerBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerBody::Hello(_) => "hello",
            ServerBody::State(_) => "state",
            ServerBody::TraceReset(_) => "trace_reset",
            ServerBody::StateReset(_) => "state_reset",
            ServerBody::Error(_) => "error",
            ServerBody::LogExport(_) => "log_export",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    pub vehicles: Vec<String>,
    pub models: Vec<String>,
    /// The open session, if any.
    pub session: Option<SessionInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WheelInfo {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub steerable: bool,
    pub driven: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: u64,
    pub vehicle: String,
    pub model: String,
    pub dt: f64,
    pub stream_rate: f64,
    pub steering_mode: String,
    /// `wheel_speed` or `acceleration`.
    pub longitudinal: String,
    pub wheels: Vec<WheelInfo>,
    /// RunLog columns, as exported.
    pub columns: Vec<String>,
    pub initial_state: InitialState,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub lean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MappedCommand {
    pub steer: f64,
    /// Wheel speed (rad/s) or acceleration (m/s^2), per the session's model.
    pub longitudinal: f64,
    pub brake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub t: f64,
    pub step: u64,
    pub state: BodyState,
    pub intents: ControlPayload,
    pub command: MappedCommand,
    /// Resolved steer angle per wheel.
    pub wheel_steer: Vec<f64>,
    /// Normal load per wheel; GM3 only.
    pub tire_loads: Option<Vec<f64>>,
    /// Model-specific log columns at this step.
    pub model_values: BTreeMap<String, f64>,
    /// Seq of the last control message applied to a step.
    pub control_seq: Option<u64>,
    /// Trace points appended since the previous state message.
    pub trace: Vec<[f64; 2]>,
    /// Points in the trace since the last trace reset.
    pub trace_len: usize,
    pub fault: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetAck {
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Unparseable frame or unknown kind.
    BadMessage,
    UnknownVehicle,
    UnknownModel,
    InvalidConfig,
    NoSession,
    StaleSeq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
    pub in_reply_to: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogExportPayload {
    pub model: String,
    pub vehicle: String,
    pub spec_hash: String,
    pub rows: usize,
    pub csv: String,
}
