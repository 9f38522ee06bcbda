//! Fixed-step integration, control mapping, scripted runs and run logs.

pub mod controls;
pub mod csv;
pub mod log;
pub mod rk4;
pub mod script;

pub use controls::{map_controls, ControlCommand, ControlLimits};
pub use log::{RunLog, RunMetadata};
pub use script::{run_script, ControlScript, Engine, ScriptCommand, TimedCommand};
