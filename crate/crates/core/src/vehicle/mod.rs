//! Wheel layouts and the composition of per-tire forces into body forces.
//!
//! A [`VehicleSpec`] places any number of tires around the center of gravity.
//! The submodules cover the individual stages that turn a body state into
//! total forces: frame transforms, load transfer, rider lean, steering
//! geometry and the final assembly.

mod assemble;
mod frames;
mod load;
mod steering;

pub use assemble::{assemble_body_forces, BodyForces, TireContribution, WheelCommand};
pub use frames::{body_to_tire_velocity, tire_to_body_forces};
pub use load::{compute_load_distribution, load_distribution_with_roll, AxleLayout};
pub(crate) use steering::differential_factor;
pub use steering::{
    ackermann_angles, command_for_curvature, kinematic_curvature, lean_roll_moment, resolve_wheel_steer,
    skateboard_steer,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tire_brush::{SlipConfig, TireError, TireParams};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("vehicle has no wheels")]
    NoWheels,
    #[error("vehicle has no driven wheel")]
    NoDrivenWheel,
    #[error("invalid vehicle parameter `{name}` = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("wheel {index}: {source}")]
    Tire {
        index: usize,
        #[source]
        source: TireError,
    },
    #[error("zero axle spacing on a multi-axle layout")]
    ZeroWheelbase,
    #[error("expected {expected} wheel commands, got {got}")]
    WheelCount { expected: usize, got: usize },
}

/// How a scalar steering command is distributed to the wheels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringMode {
    /// Steerable wheels follow Ackermann geometry about the rear reference axle.
    AckermannFront,
    /// The command is a rider lean angle; trucks steer front and rear in opposite directions.
    Skateboard,
    /// No wheel steers; the command becomes a left/right wheel speed split.
    Differential,
    /// Steerable wheels take the command directly.
    SingleTrack,
}

impl SteeringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SteeringMode::AckermannFront => "ackermann_front",
            SteeringMode::Skateboard => "skateboard",
            SteeringMode::Differential => "differential",
            SteeringMode::SingleTrack => "single_track",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WheelSpec {
    /// Forward of the center of gravity, m.
    pub x: f64,
    /// Left of the center of gravity, m (internal convention).
    pub y: f64,
    pub tire: TireParams,
    pub steerable: bool,
    pub driven: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub name: String,
    pub wheels: Vec<WheelSpec>,
    /// Vehicle plus rider, kg.
    pub mass: f64,
    pub rider_mass: f64,
    pub cg_height: f64,
    /// Rider center of gravity `(x, y, h)` in the body frame, m.
    pub rider_cg: [f64; 3],
    pub yaw_inertia: f64,
    pub align_gain: f64,
    pub steering_mode: SteeringMode,
    /// Truck kingpin angle, rad (skateboard only).
    pub kingpin_angle: f64,
    /// Lean-to-steer gain (skateboard only).
    pub lean_gain: f64,
    pub lean_enabled: bool,
    /// Include the `-r * y_i` term in the contact point velocity.
    pub full_kinematics: bool,
    pub slip: SlipConfig,
    pub gravity: f64,
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<(), VehicleError> {
        if self.wheels.is_empty() {
            return Err(VehicleError::NoWheels);
        }
        if !self.wheels.iter().any(|w| w.driven) {
            return Err(VehicleError::NoDrivenWheel);
        }
        for (index, w) in self.wheels.iter().enumerate() {
            w.tire.validate().map_err(|source| VehicleError::Tire { index, source })?;
            if !(w.x.is_finite() && w.y.is_finite()) {
                return Err(VehicleError::InvalidParam { name: "wheel position", value: w.x + w.y });
            }
        }
        let check = |name: &'static str, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(VehicleError::InvalidParam { name, value })
            }
        };
        check("mass", self.mass, self.mass > 0.0)?;
        check("rider_mass", self.rider_mass, self.rider_mass >= 0.0 && self.rider_mass < self.mass)?;
        check("yaw_inertia", self.yaw_inertia, self.yaw_inertia > 0.0)?;
        check("cg_height", self.cg_height, self.cg_height >= 0.0)?;
        check("gravity", self.gravity, self.gravity > 0.0)?;
        check("align_gain", self.align_gain, true)?;
        if self.steering_mode == SteeringMode::Skateboard {
            check("kingpin_angle", self.kingpin_angle, true)?;
            check("lean_gain", self.lean_gain, true)?;
        }
        let axles = AxleLayout::of(self);
        if axles.n_front > 0 && axles.n_rear > 0 && axles.spacing() <= 0.0 {
            return Err(VehicleError::ZeroWheelbase);
        }
        Ok(())
    }

    /// `max(x_i) - min(x_i)`.
    pub fn wheelbase(&self) -> f64 {
        span(self.wheels.iter().map(|w| w.x))
    }

    /// `max(y_i) - min(y_i)`.
    pub fn track_width(&self) -> f64 {
        span(self.wheels.iter().map(|w| w.y))
    }

    /// Rectangular-plate estimate `m (L^2 + W^2) / 12`.
    pub fn plate_yaw_inertia(&self) -> f64 {
        let (l, w) = (self.wheelbase(), self.track_width());
        self.mass * (l * l + w * w) / 12.0
    }

    /// Longitudinal position of the axle the kinematic models pivot about.
    ///
    /// The rear-most non-steerable wheel when one exists, otherwise the rear-most wheel.
    pub fn rear_reference_x(&self) -> f64 {
        let fixed = self.wheels.iter().filter(|w| !w.steerable).map(|w| w.x);
        let all = self.wheels.iter().map(|w| w.x);
        let m = fixed.fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            all.fold(f64::INFINITY, f64::min)
        }
    }

    /// Body x of the point whose velocity stays aligned with the heading in
    /// slip-free motion: the rear reference axle for steered layouts, the
    /// truck midpoint for skateboards, the mean wheel position for
    /// differential drives.
    pub fn kinematic_reference_x(&self) -> f64 {
        match self.steering_mode {
            SteeringMode::SingleTrack | SteeringMode::AckermannFront => self.rear_reference_x(),
            SteeringMode::Skateboard => {
                let (lo, hi) = self
                    .wheels
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| (lo.min(w.x), hi.max(w.x)));
                0.5 * (lo + hi)
            }
            SteeringMode::Differential => {
                self.wheels.iter().map(|w| w.x).sum::<f64>() / self.wheels.len().max(1) as f64
            }
        }
    }

    /// Mean rolling radius of the driven wheels.
    pub fn drive_radius(&self) -> f64 {
        let (sum, n) =
            self.wheels.iter().filter(|w| w.driven).fold((0.0, 0usize), |(s, n), w| (s + w.tire.rolling_radius, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    /// Reflection of the layout across the body x-axis.
    pub fn mirrored(&self) -> Self {
        let mut s = self.clone();
        for w in &mut s.wheels {
            w.y = -w.y;
            w.tire.camber = -w.tire.camber;
        }
        s.rider_cg[1] = -s.rider_cg[1];
        s
    }
}

fn span(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn derived_geometry() {
        let c = cart();
        assert_eq!(c.wheelbase(), 1.6);
        assert_eq!(c.track_width(), 1.0);
        assert_eq!(c.rear_reference_x(), -0.8);
        assert!((c.plate_yaw_inertia() - 100.0 * (2.56 + 1.0) / 12.0).abs() < 1e-12);
        assert_eq!(bicycle().track_width(), 0.0);
    }

    #[test]
    fn validation_errors() {
        let mut s = bicycle();
        for w in &mut s.wheels {
            w.driven = false;
        }
        assert_eq!(s.validate(), Err(VehicleError::NoDrivenWheel));
        let mut s = bicycle();
        s.wheels.clear();
        assert_eq!(s.validate(), Err(VehicleError::NoWheels));
        let mut s = bicycle();
        s.rider_mass = s.mass;
        assert!(matches!(s.validate(), Err(VehicleError::InvalidParam { name: "rider_mass", .. })));
        let mut s = bicycle();
        s.wheels[0].tire.friction = -1.0;
        assert!(matches!(s.validate(), Err(VehicleError::Tire { index: 0, .. })));
        assert!(cart().validate().is_ok());
    }
}
