use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Number of integrated state variables.
pub const STATE_DIM: usize = 7;

/// Planar rigid-body state shared by every dynamics model.
///
/// Internally the body frame is x-forward, y-left, z-up. Positions refer to
/// the vehicle center of gravity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub lean: f64,
    /// Model-specific scalars carried between steps (e.g. last-step accelerations).
    #[serde(default)]
    pub aux: BTreeMap<String, f64>,
}

/// Time derivative of the integrated part of [`VehicleState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative(pub [f64; STATE_DIM]);

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    if !a.is_finite() || (a > -PI && a <= PI) {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

impl VehicleState {
    pub fn at(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading), vx: speed, ..Default::default() }
    }

    pub fn to_vector(&self) -> [f64; STATE_DIM] {
        [self.x, self.y, self.heading, self.vx, self.vy, self.yaw_rate, self.lean]
    }

    /// Copies the integrated variables from `v`; `aux` is left untouched.
    pub fn set_vector(&mut self, v: &[f64; STATE_DIM]) {
        [self.x, self.y, self.heading, self.vx, self.vy, self.yaw_rate, self.lean] = *v;
    }

    pub fn with_vector(&self, v: &[f64; STATE_DIM]) -> Self {
        let mut s = self.clone();
        s.set_vector(v);
        s
    }

    pub fn aux(&self, key: &str) -> f64 {
        self.aux.get(key).copied().unwrap_or(0.0)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite()) && self.aux.values().all(|v| v.is_finite())
    }

    /// Reflects the state across the body x-axis, switching between the
    /// internal y-left convention and the external y-right one.
    pub fn mirrored(&self) -> Self {
        Self {
            x: self.x,
            y: -self.y,
            heading: normalize_angle(-self.heading),
            vx: self.vx,
            vy: -self.vy,
            yaw_rate: -self.yaw_rate,
            lean: -self.lean,
            aux: self.aux.clone(),
        }
    }
}
