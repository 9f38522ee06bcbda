//! Model-agnostic dynamics interface and the built-in models.
//!
//! A model maps `(spec, state, command)` to a state derivative. The engine
//! integrates that derivative with RK4 and then lets the model apply any
//! algebraic updates (derived fields, carried accelerations) through
//! [`DynamicsModel::finish_step`]. New models plug in by implementing the
//! trait and registering with a [`ModelRegistry`].

mod gm3;
mod kbm;

pub use gm3::Gm3;
pub use kbm::Kbm;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::rk4::{try_rk4_step, StepError};
use crate::state::{normalize_angle, StateDerivative, VehicleState};
use crate::vehicle::{VehicleError, VehicleSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("model `{model}` expects a {expected:?} command")]
    CommandMismatch { model: String, expected: LongitudinalKind },
    #[error("integration fault: {0}")]
    Integration(String),
}

/// Which longitudinal input a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongitudinalKind {
    WheelSpeed,
    Acceleration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Longitudinal {
    /// Driven wheel angular velocity, rad/s.
    WheelSpeed(f64),
    /// Longitudinal acceleration, m/s^2.
    Acceleration(f64),
}

impl Longitudinal {
    pub fn kind(&self) -> LongitudinalKind {
        match self {
            Longitudinal::WheelSpeed(_) => LongitudinalKind::WheelSpeed,
            Longitudinal::Acceleration(_) => LongitudinalKind::Acceleration,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Longitudinal::WheelSpeed(v) | Longitudinal::Acceleration(v) => v,
        }
    }
}

/// Physical command consumed by a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCommand {
    /// Steer angle, or rider lean for skateboards, rad.
    pub steer: f64,
    pub longitudinal: Longitudinal,
    /// Brake fraction in `[0, 1]`.
    #[serde(default)]
    pub brake: f64,
}

impl ModelCommand {
    pub fn zero(kind: LongitudinalKind) -> Self {
        let longitudinal = match kind {
            LongitudinalKind::WheelSpeed => Longitudinal::WheelSpeed(0.0),
            LongitudinalKind::Acceleration => Longitudinal::Acceleration(0.0),
        };
        Self { steer: 0.0, longitudinal, brake: 0.0 }
    }

    pub fn mirrored(&self) -> Self {
        Self { steer: -self.steer, ..*self }
    }
}

/// A model-specific column in run logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogColumn {
    pub name: String,
    /// Flips sign when converting between the y-left and y-right conventions.
    pub lateral: bool,
}

impl LogColumn {
    pub fn new(name: impl Into<String>, lateral: bool) -> Self {
        Self { name: name.into(), lateral }
    }
}

pub trait DynamicsModel: Send + Sync {
    fn id(&self) -> &str;

    fn longitudinal_kind(&self) -> LongitudinalKind;

    fn derivative(
        &self,
        spec: &VehicleSpec,
        state: &VehicleState,
        cmd: &ModelCommand,
    ) -> Result<StateDerivative, ModelError>;

    /// Algebraic updates after an integration step. Returns the values of
    /// [`DynamicsModel::log_columns`] at the updated state.
    fn finish_step(
        &self,
        _spec: &VehicleSpec,
        _state: &mut VehicleState,
        _cmd: &ModelCommand,
    ) -> Result<Vec<f64>, ModelError> {
        Ok(Vec::new())
    }

    fn log_columns(&self, _spec: &VehicleSpec) -> Vec<LogColumn> {
        Vec::new()
    }

    fn check_command(&self, cmd: &ModelCommand) -> Result<(), ModelError> {
        if cmd.longitudinal.kind() == self.longitudinal_kind() {
            Ok(())
        } else {
            Err(ModelError::CommandMismatch { model: self.id().to_string(), expected: self.longitudinal_kind() })
        }
    }
}

/// Integrates one RK4 step with the command held, then renormalizes heading.
///
/// `finish_step` is not applied; see [`model_step`].
pub fn advance(
    model: &dyn DynamicsModel,
    spec: &VehicleSpec,
    state: &VehicleState,
    cmd: &ModelCommand,
    dt: f64,
) -> Result<VehicleState, ModelError> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ModelError::Integration(format!("invalid step {dt}")));
    }
    model.check_command(cmd)?;
    let mut scratch = state.clone();
    let y = try_rk4_step(
        |_, v| {
            scratch.set_vector(v);
            model.derivative(spec, &scratch, cmd).map(|d| d.0)
        },
        0.0,
        &state.to_vector(),
        dt,
    )
    .map_err(|e| match e {
        StepError::Derivative(e) => e,
        StepError::NonFinite { stage } => ModelError::Integration(format!("non-finite derivative in stage {stage}")),
    })?;
    let mut next = state.with_vector(&y);
    next.heading = normalize_angle(next.heading);
    Ok(next)
}

/// Registry of models keyed by id.
#[derive(Clone)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<dyn DynamicsModel>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Gm3));
        r.register(Arc::new(Kbm));
        r
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self { models: BTreeMap::new() }
    }

    pub fn register(&mut self, model: Arc<dyn DynamicsModel>) {
        self.models.insert(model.id().to_string(), model);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn DynamicsModel>, ModelError> {
        self.models.get(id).cloned().ok_or_else(|| ModelError::UnknownModel(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}

/// Advances the registered model `model_id` by one step, including its algebraic updates.
pub fn model_step(
    registry: &ModelRegistry,
    model_id: &str,
    spec: &VehicleSpec,
    state: &VehicleState,
    cmd: &ModelCommand,
    dt: f64,
) -> Result<VehicleState, ModelError> {
    let model = registry.get(model_id)?;
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let mut next = advance(model.as_ref(), spec, state, cmd, dt)?;
    model.finish_step(spec, &mut next, cmd)?;
    Ok(next)
}
