//! Tire-level dynamics for micro-mobility vehicles.
//!
//! - [`tire_brush`]: isotropic brush tire forces from slip.
//! - [`vehicle`]: wheel layouts, load transfer, rider lean, steering geometry
//!   and body force assembly.
//! - [`models`]: the dynamics interface with the tire-level [`models::Gm3`]
//!   model and the [`models::Kbm`] kinematic baseline.
//! - [`engine`]: RK4 stepping, control mapping, scripted runs and CSV logs.
//! - [`config`]: TOML vehicle configs.
//! - [`eval`]: trajectory ingestion, control reconstruction, replay and
//!   ADE / discrete Fréchet scoring.

pub mod config;
pub mod engine;
pub mod eval;
pub mod models;
pub mod par;
pub mod state;
pub mod tire_brush;
pub mod vehicle;

pub use config::VehicleConfig;
pub use engine::{ControlCommand, ControlLimits, ControlScript, Engine, RunLog};
pub use models::{DynamicsModel, ModelCommand, ModelRegistry};
pub use state::VehicleState;
