//! Vehicle configuration files.
//!
//! A config is a TOML document describing one layout, its control limits and
//! integrator settings. Lateral positions and camber use the external
//! y-right convention and are mirrored when the spec is built.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ControlLimits;
use crate::tire_brush::{SlipConfig, TireParams};
use crate::vehicle::{SteeringMode, VehicleError, VehicleSpec, WheelSpec, GRAVITY};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("unknown parameter override `{0}`")]
    UnknownOverride(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("unknown vehicle `{0}`")]
    UnknownVehicle(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Step for interactive and scripted runs, s.
    pub dt: f64,
    /// RK4 substeps per data frame during evaluation.
    pub eval_substeps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 0.005, eval_substeps: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelConfig {
    pub x: f64,
    /// Right of the center of gravity, m.
    pub y: f64,
    pub radius: f64,
    pub half_contact_length: f64,
    pub mu: f64,
    pub cp: f64,
    #[serde(default)]
    pub camber: f64,
    #[serde(default)]
    pub camber_reduction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rolling_radius: Option<f64>,
    #[serde(default)]
    pub steerable: bool,
    #[serde(default)]
    pub driven: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub schema_version: u32,
    pub name: String,
    pub steering_mode: SteeringMode,
    pub mass: f64,
    #[serde(default)]
    pub rider_mass: f64,
    pub cg_height: f64,
    /// Rider center of gravity `[x, y, h]`, y to the right.
    #[serde(default)]
    pub rider_cg: [f64; 3],
    /// Defaults to the rectangular-plate estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_inertia: Option<f64>,
    #[serde(default = "one")]
    pub align_gain: f64,
    #[serde(default)]
    pub kingpin_angle: f64,
    #[serde(default = "one")]
    pub lean_gain: f64,
    #[serde(default)]
    pub lean_enabled: bool,
    #[serde(default)]
    pub full_kinematics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
    #[serde(default)]
    pub limits: ControlLimits,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub slip: SlipConfig,
    pub wheels: Vec<WheelConfig>,
}

const BUILTIN: [(&str, &str); 10] = [
    ("bicycle", include_str!("../../../configs/bicycle.toml")),
    ("scooter", include_str!("../../../configs/scooter.toml")),
    ("skateboard", include_str!("../../../configs/skateboard.toml")),
    ("cart", include_str!("../../../configs/cart.toml")),
    ("unicycle", include_str!("../../../configs/unicycle.toml")),
    ("hoverboard", include_str!("../../../configs/hoverboard.toml")),
    ("delta3", include_str!("../../../configs/delta3.toml")),
    ("tadpole3", include_str!("../../../configs/tadpole3.toml")),
    ("circular5", include_str!("../../../configs/circular5.toml")),
    ("carriage", include_str!("../../../configs/carriage.toml")),
];

/// Ids of the configs compiled into the crate.
pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(id, _)| *id)
}

impl VehicleConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion { found: cfg.schema_version });
        }
        cfg.spec()?;
        cfg.limits.validate().map_err(ConfigError::Invalid)?;
        if !(cfg.integrator.dt > 0.0 && cfg.integrator.dt.is_finite()) || cfg.integrator.eval_substeps == 0 {
            return Err(ConfigError::Invalid("integrator dt and eval_substeps must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    /// One of the bundled configs, see [`builtin_ids`].
    pub fn builtin(id: &str) -> Result<Self, ConfigError> {
        let (_, text) =
            BUILTIN.iter().find(|(name, _)| *name == id).ok_or_else(|| ConfigError::UnknownVehicle(id.to_string()))?;
        Self::from_toml_str(text)
    }

    /// A bundled id, or otherwise a path to a TOML file.
    pub fn resolve(id_or_path: &str) -> Result<Self, ConfigError> {
        if builtin_ids().any(|id| id == id_or_path) {
            Self::builtin(id_or_path)
        } else {
            Self::from_path(id_or_path)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the internal (y-left) spec.
    pub fn spec(&self) -> Result<VehicleSpec, ConfigError> {
        let wheels = self
            .wheels
            .iter()
            .map(|w| WheelSpec {
                x: w.x,
                y: -w.y,
                tire: TireParams {
                    half_contact_length: w.half_contact_length,
                    radius: w.radius,
                    camber: -w.camber,
                    friction: w.mu,
                    tread_stiffness: w.cp,
                    camber_reduction: w.camber_reduction,
                    rolling_radius: w.rolling_radius.unwrap_or(w.radius),
                },
                steerable: w.steerable,
                driven: w.driven,
            })
            .collect();
        let [rx, ry, rh] = self.rider_cg;
        let mut spec = VehicleSpec {
            name: self.name.clone(),
            wheels,
            mass: self.mass,
            rider_mass: self.rider_mass,
            cg_height: self.cg_height,
            rider_cg: [rx, -ry, rh],
            yaw_inertia: 0.0,
            align_gain: self.align_gain,
            steering_mode: self.steering_mode,
            kingpin_angle: self.kingpin_angle,
            lean_gain: self.lean_gain,
            lean_enabled: self.lean_enabled,
            full_kinematics: self.full_kinematics,
            slip: self.slip,
            gravity: self.gravity.unwrap_or(GRAVITY),
        };
        spec.yaw_inertia = self.yaw_inertia.unwrap_or_else(|| default_yaw_inertia(&spec));
        spec.validate()?;
        Ok(spec)
    }

    /// Applies dotted-path overrides such as `mass`, `limits.max_steer`,
    /// `wheels.0.mu` or `wheel.cp` (every wheel).
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).expect("config serializes");
        for (key, &value) in overrides {
            let mut parts: Vec<&str> = key.split('.').collect();
            if parts.first() == Some(&"wheel") && parts.len() == 2 {
                for i in 0..self.wheels.len() {
                    let idx = i.to_string();
                    set_path(&mut doc, &["wheels", &idx, parts[1]], value, key)?;
                }
                continue;
            }
            if parts.is_empty() || parts[0] == "schema_version" || parts[0] == "name" {
                return Err(ConfigError::UnknownOverride(key.clone()));
            }
            if parts[0] == "rider_cg" && parts.len() == 2 {
                let i = match parts[1] {
                    "x" => "0",
                    "y" => "1",
                    "h" => "2",
                    _ => return Err(ConfigError::UnknownOverride(key.clone())),
                };
                parts[1] = i;
            }
            set_path(&mut doc, &parts, value, key)?;
        }
        let text = toml::to_string(&doc).expect("value serializes");
        Self::from_toml_str(&text)
    }
}

/// Rectangular-plate yaw inertia with each dimension floored at the largest
/// wheel diameter, so single-wheel and single-axle layouts stay positive.
pub fn default_yaw_inertia(spec: &VehicleSpec) -> f64 {
    let d = spec.wheels.iter().map(|w| 2.0 * w.tire.radius).fold(0.0, f64::max);
    let (l, w) = (spec.wheelbase().max(d), spec.track_width().max(d));
    spec.mass * (l * l + w * w) / 12.0
}

fn set_path(doc: &mut toml::Value, parts: &[&str], value: f64, key: &str) -> Result<(), ConfigError> {
    let unknown = || ConfigError::UnknownOverride(key.to_string());
    let (last, head) = parts.split_last().ok_or_else(unknown)?;
    let mut node = doc;
    for p in head {
        node = match node {
            toml::Value::Table(t) => t.get_mut(*p).ok_or_else(unknown)?,
            toml::Value::Array(a) => a.get_mut(p.parse::<usize>().map_err(|_| unknown())?).ok_or_else(unknown)?,
            _ => return Err(unknown()),
        };
    }
    let slot = match node {
        toml::Value::Table(t) => {
            if !t.contains_key(*last) && !is_optional_field(last) {
                return Err(unknown());
            }
            t.entry(last.to_string()).or_insert(toml::Value::Float(value))
        }
        toml::Value::Array(a) => a.get_mut(last.parse::<usize>().map_err(|_| unknown())?).ok_or_else(unknown)?,
        _ => return Err(unknown()),
    };
    *slot = match slot {
        toml::Value::Boolean(_) => toml::Value::Boolean(value != 0.0),
        toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
        toml::Value::Float(_) | toml::Value::Integer(_) => toml::Value::Float(value),
        _ => return Err(unknown()),
    };
    Ok(())
}

fn is_optional_field(name: &str) -> bool {
    matches!(name, "yaw_inertia" | "gravity" | "rolling_radius")
}
