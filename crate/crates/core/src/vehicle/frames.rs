use crate::state::VehicleState;

use super::WheelSpec;

/// Contact-point velocity of `wheel` expressed in its own (steered) frame.
///
/// With `full_kinematics` unset the longitudinal term omits `-r * y_i`, which
/// matches the usual single-track derivation.
pub fn body_to_tire_velocity(state: &VehicleState, wheel: &WheelSpec, steer: f64, full_kinematics: bool) -> (f64, f64) {
    let r = state.yaw_rate;
    let vx = if full_kinematics { state.vx - r * wheel.y } else { state.vx };
    let vy = state.vy + r * wheel.x;
    let (s, c) = steer.sin_cos();
    (vx * c + vy * s, -vx * s + vy * c)
}

/// Rotates a tire-frame force into the body frame.
pub fn tire_to_body_forces(fx: f64, fy: f64, steer: f64) -> (f64, f64) {
    let (s, c) = steer.sin_cos();
    (fx * c - fy * s, fx * s + fy * c)
}
