//! One simulated vehicle driven by streamed intents.
//!
//! The session is synchronous and clock-free: the caller decides when to
//! [`Session::step`], so tests can drive it step by step and the network
//! layer can pace it against the wall clock.

use std::collections::BTreeMap;

use gm3_core::config::{builtin_ids, VehicleConfig};
use gm3_core::engine::csv::to_csv_string;
use gm3_core::engine::script::InitialState;
use gm3_core::models::{LongitudinalKind, ModelError};
use gm3_core::vehicle::resolve_wheel_steer;
use gm3_core::{ControlCommand, Engine, ModelRegistry};
use thiserror::Error;

use crate::protocol::{
    BodyState, ConfigureRequest, ControlPayload, ErrorCode, LogExportPayload, MappedCommand, SessionInfo, StatePayload,
    WheelInfo,
};

pub const DEFAULT_STREAM_RATE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown vehicle `{0}`")]
    UnknownVehicle(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid session config: {0}")]
    Invalid(String),
}

impl SessionError {
    pub fn code(&self) -> ErrorCode {
        match self {
            SessionError::UnknownVehicle(_) => ErrorCode::UnknownVehicle,
            SessionError::UnknownModel(_) => ErrorCode::UnknownModel,
            SessionError::Invalid(_) => ErrorCode::InvalidConfig,
        }
    }
}

/// Vehicle configs and models a session may name.
#[derive(Clone)]
pub struct Catalog {
    pub vehicles: BTreeMap<String, VehicleConfig>,
    pub registry: ModelRegistry,
}

impl Catalog {
    /// The bundled vehicle configs and the default model registry.
    pub fn builtin() -> Self {
        let vehicles = builtin_ids()
            .map(|id| (id.to_string(), VehicleConfig::builtin(id).expect("bundled config parses")))
            .collect();
        Self { vehicles, registry: ModelRegistry::default() }
    }

    /// Adds or replaces a vehicle under `id`.
    pub fn insert(&mut self, id: impl Into<String>, cfg: VehicleConfig) {
        self.vehicles.insert(id.into(), cfg);
    }

    pub fn vehicle_ids(&self) -> Vec<String> {
        self.vehicles.keys().cloned().collect()
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.registry.ids().map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub vehicle: String,
    pub model: String,
    pub dt: f64,
    pub stream_rate: f64,
    pub initial_state: InitialState,
}

impl SessionConfig {
    pub fn new(vehicle: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            vehicle: vehicle.into(),
            model: model.into(),
            dt: 0.005,
            stream_rate: DEFAULT_STREAM_RATE,
            initial_state: InitialState::default(),
        }
    }

    /// Fills the request's omitted fields from `self`. A request naming a
    /// different vehicle without a `dt` takes that vehicle's integrator step.
    pub fn merged(&self, req: &ConfigureRequest, catalog: &Catalog) -> SessionConfig {
        let vehicle = req.vehicle.clone().unwrap_or_else(|| self.vehicle.clone());
        let dt = req.dt.unwrap_or_else(|| match (&req.vehicle, catalog.vehicles.get(&vehicle)) {
            (Some(_), Some(cfg)) => cfg.integrator.dt,
            _ => self.dt,
        });
        SessionConfig {
            vehicle,
            model: req.model.clone().unwrap_or_else(|| self.model.clone()),
            dt,
            stream_rate: req.stream_rate.unwrap_or(self.stream_rate),
            initial_state: req.initial_state.unwrap_or(self.initial_state),
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SessionError::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.stream_rate > 0.0 && self.stream_rate <= 1.0 / self.dt + 1e-9) {
            return Err(SessionError::Invalid(format!(
                "stream_rate must be in (0, 1/dt = {}], got {}",
                1.0 / self.dt,
                self.stream_rate
            )));
        }
        Ok(())
    }
}

pub struct Session {
    id: u64,
    config: SessionConfig,
    engine: Engine,
    last_control_seq: Option<u64>,
    mailbox: Option<(u64, ControlPayload)>,
    intents: ControlPayload,
    applied_seq: Option<u64>,
    trace: Vec<[f64; 2]>,
    streamed: usize,
    frame: u64,
    tire_columns: Vec<usize>,
}

fn stream_frame(steps: u64, dt: f64, rate: f64) -> u64 {
    // guard against 0.1 * 30 = 2.9999999999999996
    (steps as f64 * dt * rate + 1e-9).floor() as u64
}

impl Session {
    pub fn open(id: u64, config: SessionConfig, catalog: &Catalog) -> Result<Self, SessionError> {
        config.validate()?;
        let cfg = catalog
            .vehicles
            .get(&config.vehicle)
            .ok_or_else(|| SessionError::UnknownVehicle(config.vehicle.clone()))?;
        let model =
            catalog.registry.get(&config.model).map_err(|_| SessionError::UnknownModel(config.model.clone()))?;
        let spec = cfg.spec().map_err(|e| SessionError::Invalid(e.to_string()))?;
        let engine = Engine::new(spec, model, cfg.limits, config.dt, config.initial_state.to_internal())
            .map_err(|e: ModelError| SessionError::Invalid(e.to_string()))?;
        let tire_columns =
            (0..engine.spec().wheels.len()).filter_map(|i| engine.log().column(&format!("tire{i}_fz"))).collect();
        Ok(Self {
            id,
            config,
            engine,
            last_control_seq: None,
            mailbox: None,
            intents: ControlPayload::default(),
            applied_seq: None,
            trace: Vec::new(),
            streamed: 0,
            frame: 0,
            tire_columns,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn trace(&self) -> &[[f64; 2]] {
        &self.trace
    }

    pub fn info(&self) -> SessionInfo {
        let spec = self.engine.spec();
        SessionInfo {
            id: self.id,
            vehicle: self.config.vehicle.clone(),
            model: self.config.model.clone(),
            dt: self.config.dt,
            stream_rate: self.config.stream_rate,
            steering_mode: spec.steering_mode.as_str().to_string(),
            longitudinal: match self.engine.longitudinal_kind() {
                LongitudinalKind::WheelSpeed => "wheel_speed",
                LongitudinalKind::Acceleration => "acceleration",
            }
            .to_string(),
            wheels: spec
                .wheels
                .iter()
                .map(|w| WheelInfo {
                    x: w.x,
                    y: -w.y,
                    radius: w.tire.rolling_radius,
                    steerable: w.steerable,
                    driven: w.driven,
                })
                .collect(),
            columns: self.engine.log().columns.clone(),
            initial_state: self.config.initial_state,
        }
    }

    /// Stores the intents in the latest-wins mailbox. Returns `false` and
    /// drops the message when `seq` is not newer than the last control.
    pub fn submit_control(&mut self, seq: u64, intents: ControlPayload) -> bool {
        if self.last_control_seq.is_some_and(|last| seq <= last) {
            return false;
        }
        self.last_control_seq = Some(seq);
        self.mailbox = Some((seq, intents));
        true
    }

    /// Advances one step with the newest intents. Returns `true` when the
    /// step crosses a stream frame boundary, i.e. a state message is due.
    /// A faulted run does not advance until [`Session::reset_state`].
    pub fn step(&mut self) -> bool {
        if let Some((seq, intents)) = self.mailbox.take() {
            self.intents = intents;
            self.applied_seq = Some(seq);
        }
        if self.engine.faulted() {
            return false;
        }
        let i = self.intents;
        // external steer is positive to the right
        let cmd = ControlCommand::new(-i.steer, i.speed, i.brake);
        if let Err(e) = self.engine.step_intents(&cmd) {
            log::warn!("session {}: {e}", self.id);
            return true;
        }
        let s = self.engine.state();
        self.trace.push([s.x, -s.y]);
        let frame = stream_frame(self.engine.steps(), self.config.dt, self.config.stream_rate);
        let due = frame > self.frame;
        self.frame = frame;
        due
    }

    /// Current state with the trace points not yet streamed.
    pub fn pending_state(&self) -> StatePayload {
        let e = self.engine.state().mirrored();
        let log = self.engine.log();
        let values = self.engine.model_values();
        let base = log.columns.len() - values.len();
        let model_values = values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let c = base + k;
                (log.columns[c].clone(), if log.lateral[c] { -v } else { v })
            })
            .collect();
        let tire_loads =
            (!self.tire_columns.is_empty()).then(|| self.tire_columns.iter().map(|&c| values[c - base]).collect());
        let cmd = self.engine.command();
        StatePayload {
            t: self.engine.time(),
            step: self.engine.steps(),
            state: BodyState {
                x: e.x,
                y: e.y,
                heading: e.heading,
                vx: e.vx,
                vy: e.vy,
                yaw_rate: e.yaw_rate,
                lean: e.lean,
            },
            intents: self.intents,
            command: MappedCommand { steer: -cmd.steer, longitudinal: cmd.longitudinal.value(), brake: cmd.brake },
            wheel_steer: resolve_wheel_steer(self.engine.spec(), cmd.steer).iter().map(|d| -d).collect(),
            tire_loads,
            model_values,
            control_seq: self.applied_seq,
            trace: self.trace[self.streamed..].to_vec(),
            trace_len: self.trace.len(),
            fault: self.engine.log().fault.clone(),
        }
    }

    /// Marks the trace points carried by `sent` as delivered.
    pub fn commit_streamed(&mut self, sent: &StatePayload) {
        self.streamed = (self.streamed + sent.trace.len()).min(self.trace.len());
    }

    /// Convenience for callers that never drop a state message.
    pub fn take_state(&mut self) -> StatePayload {
        let s = self.pending_state();
        self.commit_streamed(&s);
        s
    }

    pub fn reset_trace(&mut self) {
        self.trace.clear();
        self.streamed = 0;
    }

    /// Returns the vehicle to its initial state; time, log and trace continue.
    pub fn reset_state(&mut self) {
        self.engine.reset_state();
        self.intents = ControlPayload::default();
        self.mailbox = None;
    }

    pub fn export(&self) -> LogExportPayload {
        let log = self.engine.log();
        LogExportPayload {
            model: log.metadata.model.clone(),
            vehicle: self.config.vehicle.clone(),
            spec_hash: log.metadata.spec_hash.clone(),
            rows: log.rows.len(),
            csv: to_csv_string(log),
        }
    }
}
