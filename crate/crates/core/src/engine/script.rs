use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::controls::{map_controls, ControlCommand, ControlLimits};
use super::log::{spec_hash, RunLog, RunMetadata};
use crate::config::{ConfigError, VehicleConfig};
use crate::models::{advance, DynamicsModel, Longitudinal, LongitudinalKind, ModelCommand, ModelError, ModelRegistry};
use crate::state::{normalize_angle, VehicleState};
use crate::vehicle::VehicleSpec;

/// Slack when matching step times against timeline breakpoints, s.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("script parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Fixed-step stepping loop for one vehicle and model.
///
/// Everything here is in the internal y-left convention. Time advances by
/// exactly `dt` per step and every step appends one row to the run log.
#[derive(Clone)]
pub struct Engine {
    spec: VehicleSpec,
    model: Arc<dyn DynamicsModel>,
    limits: ControlLimits,
    dt: f64,
    initial: VehicleState,
    state: VehicleState,
    prev: ModelCommand,
    intents: ControlCommand,
    steps: u64,
    log: RunLog,
    model_values: Vec<f64>,
}

impl Engine {
    pub fn new(
        spec: VehicleSpec,
        model: Arc<dyn DynamicsModel>,
        limits: ControlLimits,
        dt: f64,
        initial: VehicleState,
    ) -> Result<Self, ModelError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ModelError::Integration(format!("invalid step {dt}")));
        }
        spec.validate()?;
        limits.validate().map_err(ModelError::Integration)?;
        let metadata = RunMetadata {
            model: model.id().to_string(),
            vehicle: spec.name.clone(),
            spec_hash: spec_hash(&spec),
            dt,
            deterministic: true,
        };
        let log = RunLog::new(metadata, &model.log_columns(&spec));
        let prev = ModelCommand::zero(model.longitudinal_kind());
        let mut e = Self {
            spec,
            model,
            limits,
            dt,
            state: initial.clone(),
            initial,
            prev,
            intents: ControlCommand::default(),
            steps: 0,
            log,
            model_values: Vec::new(),
        };
        e.log_current()?;
        Ok(e)
    }

    /// Builds an engine for a registered model id.
    pub fn from_registry(
        registry: &ModelRegistry,
        model_id: &str,
        spec: VehicleSpec,
        limits: ControlLimits,
        dt: f64,
        initial: VehicleState,
    ) -> Result<Self, ModelError> {
        Self::new(spec, registry.get(model_id)?, limits, dt, initial)
    }

    fn log_current(&mut self) -> Result<(), ModelError> {
        // the model columns at the current state, without touching it
        let mut probe = self.state.clone();
        self.model_values = self.model.finish_step(&self.spec, &mut probe, &self.prev)?;
        self.push_row();
        Ok(())
    }

    fn push_row(&mut self) {
        let s = &self.state;
        let mut row = vec![
            self.time(),
            s.x,
            s.y,
            s.heading,
            s.vx,
            s.vy,
            s.yaw_rate,
            s.lean,
            self.intents.steer,
            self.intents.speed,
            self.intents.brake,
            self.prev.steer,
            self.prev.longitudinal.value(),
            self.prev.brake,
        ];
        row.extend_from_slice(&self.model_values);
        self.log.rows.push(row);
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn initial_state(&self) -> &VehicleState {
        &self.initial
    }

    pub fn spec(&self) -> &VehicleSpec {
        &self.spec
    }

    pub fn limits(&self) -> &ControlLimits {
        &self.limits
    }

    pub fn model_id(&self) -> &str {
        self.model.id()
    }

    pub fn longitudinal_kind(&self) -> LongitudinalKind {
        self.model.longitudinal_kind()
    }

    /// Last command applied (or zero before the first step).
    pub fn command(&self) -> &ModelCommand {
        &self.prev
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn into_log(self) -> RunLog {
        self.log
    }

    /// Values of the model-specific log columns at the current state.
    pub fn model_values(&self) -> &[f64] {
        &self.model_values
    }

    pub fn faulted(&self) -> bool {
        self.log.fault.is_some()
    }

    /// Maps `intents` through the control limits and advances one step.
    pub fn step_intents(&mut self, intents: &ControlCommand) -> Result<(), ModelError> {
        let cmd = map_controls(intents, &self.limits, self.model.longitudinal_kind(), &self.prev, self.dt);
        self.step_inner(intents.saturated(), cmd)
    }

    /// Advances one step with a model command, bypassing the control mapping.
    pub fn step_command(&mut self, cmd: ModelCommand) -> Result<(), ModelError> {
        self.step_inner(ControlCommand::default(), cmd)
    }

    fn step_inner(&mut self, intents: ControlCommand, cmd: ModelCommand) -> Result<(), ModelError> {
        if let Some(f) = &self.log.fault {
            return Err(ModelError::Integration(format!("run already faulted: {f}")));
        }
        let result = advance(self.model.as_ref(), &self.spec, &self.state, &cmd, self.dt).and_then(|mut next| {
            let values = self.model.finish_step(&self.spec, &mut next, &cmd)?;
            if next.is_finite() && values.iter().all(|v| v.is_finite()) {
                Ok((next, values))
            } else {
                Err(ModelError::Integration("non-finite state".into()))
            }
        });
        match result {
            Ok((next, values)) => {
                self.state = next;
                self.model_values = values;
                self.prev = cmd;
                self.intents = intents;
                self.steps += 1;
                self.push_row();
                Ok(())
            }
            Err(e) => {
                self.log.fault = Some(format!("t={}: {e}", self.time()));
                Err(e)
            }
        }
    }

    /// Restores the initial state. Time and the log continue.
    pub fn reset_state(&mut self) {
        self.state = self.initial.clone();
        self.prev = ModelCommand::zero(self.model.longitudinal_kind());
        self.intents = ControlCommand::default();
        self.log.fault = None;
    }
}

/// Initial state in the external y-right convention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl InitialState {
    pub fn to_internal(&self) -> VehicleState {
        VehicleState {
            x: self.x,
            y: -self.y,
            heading: normalize_angle(-self.heading),
            vx: self.vx,
            vy: -self.vy,
            yaw_rate: -self.yaw_rate,
            ..Default::default()
        }
    }

    pub fn from_internal(s: &VehicleState) -> Self {
        let m = s.mirrored();
        Self { x: m.x, y: m.y, heading: m.heading, vx: m.vx, vy: m.vy, yaw_rate: m.yaw_rate }
    }
}

/// A timeline entry's command, in the external convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptCommand {
    /// Normalized intents, mapped through the control limits.
    Intent(ControlCommand),
    /// A physical command applied as is.
    Model(ModelCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimed", into = "RawTimed")]
pub struct TimedCommand {
    pub t: f64,
    pub command: ScriptCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CommandKind {
    #[default]
    Intent,
    Model,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTimed {
    t: f64,
    #[serde(default)]
    kind: CommandKind,
    #[serde(default)]
    steer: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed: Option<f64>,
    #[serde(default)]
    brake: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wheel_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    accel: Option<f64>,
}

impl TryFrom<RawTimed> for TimedCommand {
    type Error = String;

    fn try_from(r: RawTimed) -> Result<Self, String> {
        let command = match r.kind {
            CommandKind::Intent => {
                if r.wheel_speed.is_some() || r.accel.is_some() {
                    return Err(format!("t={}: intent entries take `speed`, not `wheel_speed`/`accel`", r.t));
                }
                ScriptCommand::Intent(ControlCommand {
                    steer: r.steer,
                    speed: r.speed.unwrap_or(0.0),
                    brake: r.brake,
                    timestamp: r.t,
                })
            }
            CommandKind::Model => {
                let longitudinal = match (r.wheel_speed, r.accel, r.speed) {
                    (Some(w), None, None) => Longitudinal::WheelSpeed(w),
                    (None, Some(a), None) => Longitudinal::Acceleration(a),
                    _ => return Err(format!("t={}: model entries need exactly one of `wheel_speed`, `accel`", r.t)),
                };
                ScriptCommand::Model(ModelCommand { steer: r.steer, longitudinal, brake: r.brake })
            }
        };
        Ok(Self { t: r.t, command })
    }
}

impl From<TimedCommand> for RawTimed {
    fn from(c: TimedCommand) -> Self {
        match c.command {
            ScriptCommand::Intent(i) => RawTimed {
                t: c.t,
                kind: CommandKind::Intent,
                steer: i.steer,
                speed: Some(i.speed),
                brake: i.brake,
                wheel_speed: None,
                accel: None,
            },
            ScriptCommand::Model(m) => {
                let (wheel_speed, accel) = match m.longitudinal {
                    Longitudinal::WheelSpeed(w) => (Some(w), None),
                    Longitudinal::Acceleration(a) => (None, Some(a)),
                };
                RawTimed {
                    t: c.t,
                    kind: CommandKind::Model,
                    steer: m.steer,
                    speed: None,
                    brake: m.brake,
                    wheel_speed,
                    accel,
                }
            }
        }
    }
}

fn default_script_version() -> u32 {
    1
}

/// A scripted run: vehicle, model, initial state, overrides and a
/// zero-order-hold command timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlScript {
    #[serde(default = "default_script_version")]
    pub schema_version: u32,
    /// Bundled config id or path.
    pub vehicle_kind: String,
    pub model: String,
    /// Defaults to the vehicle config's integrator step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to the last timeline time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub param_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub timeline: Vec<TimedCommand>,
}

impl ControlScript {
    pub fn from_toml_str(text: &str) -> Result<Self, ScriptError> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScriptError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("script serializes")
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        let invalid = |m: String| Err(ScriptError::Invalid(m));
        if self.schema_version != 1 {
            return invalid(format!("unsupported schema_version {}", self.schema_version));
        }
        if let Some(first) = self.timeline.first() {
            if first.t.abs() > TIME_SLACK {
                return invalid(format!("timeline must start at t=0, starts at {}", first.t));
            }
        }
        if let Some(w) = self.timeline.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return invalid(format!("timeline times must increase strictly ({} then {})", w[0].t, w[1].t));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return invalid(format!("dt must be positive, got {dt}"));
            }
        }
        if self.end_time() < 0.0 || !self.end_time().is_finite() {
            return invalid("duration must be non-negative".into());
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.timeline.last().map_or(0.0, |c| c.t))
    }

    /// Index of the command held at time `t`.
    pub fn active_index(&self, t: f64) -> Option<usize> {
        self.timeline.partition_point(|c| c.t <= t + TIME_SLACK).checked_sub(1)
    }
}

/// Runs `script` on `vehicle` (overrides applied). An integration fault
/// truncates the log and is recorded in [`RunLog::fault`].
pub fn run_script(
    script: &ControlScript,
    vehicle: &VehicleConfig,
    registry: &ModelRegistry,
) -> Result<RunLog, ScriptError> {
    script.validate()?;
    let cfg = vehicle.with_overrides(&script.param_overrides)?;
    let spec = cfg.spec()?;
    let dt = script.dt.unwrap_or(cfg.integrator.dt);
    let mut engine =
        Engine::from_registry(registry, &script.model, spec, cfg.limits, dt, script.initial_state.to_internal())?;
    let steps = (script.end_time() / dt).round() as u64;
    for k in 0..steps {
        let t = k as f64 * dt;
        let result = match script.active_index(t).map(|i| script.timeline[i].command) {
            None => engine.step_intents(&ControlCommand::default()),
            Some(ScriptCommand::Intent(i)) => engine.step_intents(&ControlCommand { steer: -i.steer, ..i }),
            Some(ScriptCommand::Model(m)) => engine.step_command(m.mirrored()),
        };
        match result {
            Ok(()) => {}
            Err(e @ ModelError::CommandMismatch { .. }) => return Err(e.into()),
            Err(_) => break,
        }
    }
    Ok(engine.into_log())
}
