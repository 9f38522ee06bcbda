//! Isotropic brush tire model.
//!
//! A single tire is described by [`TireParams`] (geometry, friction, tread
//! stiffness) and driven by [`TireInputs`] (load, wheel speed, contact-point
//! velocities, path curvature). [`compute_slip`] turns those into a
//! [`SlipState`], and [`compute_forces`] evaluates the piecewise cubic force
//! laws for the adhesion region and the saturated values for the sliding
//! region.
//!
//! Every quantity here is expressed in the tire frame: `x` along the wheel
//! heading, `y` to the left, `z` up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TireError {
    #[error("invalid tire parameter `{name}` = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("normal load must be finite and non-negative, got {0}")]
    NegativeLoad(f64),
    #[error("degenerate slip denominator: 1 + kappa = {0} (wheel locked against motion)")]
    LockedWheel(f64),
}

/// Physical constants of one tire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TireParams {
    /// Half length of the contact patch, m.
    pub half_contact_length: f64,
    /// Unloaded radius, m.
    pub radius: f64,
    /// Camber angle, rad.
    pub camber: f64,
    /// Friction coefficient (same in every direction).
    pub friction: f64,
    /// Tread element stiffness per unit area, N/m^2.
    pub tread_stiffness: f64,
    /// Camber reduction factor in `[0, 1]`; near 0 for small tires.
    pub camber_reduction: f64,
    /// Effective rolling radius, m.
    pub rolling_radius: f64,
}

impl TireParams {
    /// Builds parameters with zero camber and the rolling radius equal to `radius`.
    pub fn new(half_contact_length: f64, radius: f64, friction: f64, tread_stiffness: f64) -> Self {
        Self {
            half_contact_length,
            radius,
            camber: 0.0,
            friction,
            tread_stiffness,
            camber_reduction: 0.0,
            rolling_radius: radius,
        }
    }

    pub fn with_camber(mut self, camber: f64) -> Self {
        self.camber = camber;
        self
    }

    pub fn validate(&self) -> Result<(), TireError> {
        let positive = [
            ("half_contact_length", self.half_contact_length),
            ("radius", self.radius),
            ("friction", self.friction),
            ("tread_stiffness", self.tread_stiffness),
            ("rolling_radius", self.rolling_radius),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(TireError::InvalidParam { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.camber_reduction) {
            return Err(TireError::InvalidParam { name: "camber_reduction", value: self.camber_reduction });
        }
        if !self.camber.is_finite() {
            return Err(TireError::InvalidParam { name: "camber", value: self.camber });
        }
        Ok(())
    }

    /// Cornering stiffness of the adhesion branch at small slip, `2 cp a^2` (N/rad).
    pub fn cornering_stiffness(&self) -> f64 {
        2.0 * self.tread_stiffness * self.half_contact_length.powi(2)
    }
}

/// Per-step inputs to one tire.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TireInputs {
    /// Normal load, N.
    pub normal_load: f64,
    /// Wheel angular velocity, rad/s.
    pub wheel_speed: f64,
    /// Steer angle of the wheel, rad.
    pub steer: f64,
    /// Vehicle yaw rate, rad/s.
    pub yaw_rate: f64,
    /// Contact point velocity along the wheel heading, m/s.
    pub vx: f64,
    /// Contact point velocity across the wheel heading, m/s.
    pub vy: f64,
    /// Signed turn radius of the contact point path, m. Infinite on straight paths.
    pub turn_radius: f64,
}

/// Numerical guards for the slip definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlipConfig {
    /// Lower bound on the `|V_x|` denominator of the practical slips, m/s.
    pub v_eps: f64,
    /// Below this speed (and with matching wheel speed) all slip is zero, m/s.
    pub standstill_speed: f64,
    /// Lower bound on `1 + kappa`.
    pub kappa_eps: f64,
    /// Yaw rates below this magnitude mean a straight path, rad/s.
    pub straight_yaw_rate: f64,
    /// Turn radii beyond this magnitude mean a straight path, m.
    pub straight_radius: f64,
}

impl Default for SlipConfig {
    fn default() -> Self {
        Self { v_eps: 0.1, standstill_speed: 0.01, kappa_eps: 1e-3, straight_yaw_rate: 1e-6, straight_radius: 1e6 }
    }
}

impl TireInputs {
    /// Fills in the turn radius from the contact-point speed and the vehicle yaw rate.
    pub fn from_kinematics(
        normal_load: f64,
        wheel_speed: f64,
        steer: f64,
        yaw_rate: f64,
        vx: f64,
        vy: f64,
        cfg: &SlipConfig,
    ) -> Self {
        let turn_radius =
            if yaw_rate.abs() < cfg.straight_yaw_rate { f64::INFINITY } else { vx.hypot(vy).max(cfg.v_eps) / yaw_rate };
        Self { normal_load, wheel_speed, steer, yaw_rate, vx, vy, turn_radius }
    }
}

/// Slip quantities derived from one set of tire inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlipState {
    /// Practical longitudinal slip.
    pub kappa: f64,
    /// `tan` of the slip angle.
    pub tan_alpha: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Magnitude of the theoretical slip vector.
    pub sigma: f64,
    /// Turn slip (spin), 1/m.
    pub spin: f64,
    /// Composite tire parameter. Zero when the tire carries no load.
    pub theta: f64,
    /// Composite parameter modified for spin and camber.
    pub theta_star: f64,
}

/// Longitudinal force, lateral force and aligning moment in the tire frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TireForces {
    pub fx: f64,
    pub fy: f64,
    pub mz: f64,
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Computes the slip state. Fails if `1 + kappa` drops below `cfg.kappa_eps`.
pub fn compute_slip(inputs: &TireInputs, params: &TireParams, cfg: &SlipConfig) -> Result<SlipState, TireError> {
    slip_impl(inputs, params, cfg, false)
}

/// Like [`compute_slip`] but clamps `1 + kappa` at `cfg.kappa_eps` instead of failing.
pub fn compute_slip_clamped(
    inputs: &TireInputs,
    params: &TireParams,
    cfg: &SlipConfig,
) -> Result<SlipState, TireError> {
    slip_impl(inputs, params, cfg, true)
}

fn slip_impl(inputs: &TireInputs, params: &TireParams, cfg: &SlipConfig, clamp: bool) -> Result<SlipState, TireError> {
    let fz = inputs.normal_load;
    if !(fz.is_finite() && fz >= 0.0) {
        return Err(TireError::NegativeLoad(fz));
    }

    let rolling_speed = inputs.wheel_speed * params.rolling_radius;
    let at_rest = inputs.vx.abs() < cfg.standstill_speed
        && inputs.vy.abs() < cfg.standstill_speed
        && (rolling_speed - inputs.vx).abs() < cfg.standstill_speed;

    let (kappa, tan_alpha) = if at_rest {
        (0.0, 0.0)
    } else {
        let denom = inputs.vx.abs().max(cfg.v_eps);
        let slip_x = inputs.vx - rolling_speed;
        let slip_y = inputs.vy;
        (-slip_x / denom, -slip_y / denom)
    };

    let mut one_plus_kappa = 1.0 + kappa;
    if one_plus_kappa < cfg.kappa_eps {
        if !clamp {
            return Err(TireError::LockedWheel(one_plus_kappa));
        }
        one_plus_kappa = cfg.kappa_eps;
    }
    let sigma_x = kappa / one_plus_kappa;
    let sigma_y = tan_alpha / one_plus_kappa;

    let inv_turn = if !inputs.turn_radius.is_finite() || inputs.turn_radius.abs() > cfg.straight_radius {
        0.0
    } else {
        1.0 / inputs.turn_radius
    };
    let spin = -inv_turn + (1.0 - params.camber_reduction) * params.camber.sin() * inv_turn;

    let (theta, theta_star) = if fz > 0.0 {
        let a = params.half_contact_length;
        let theta = 2.0 * params.tread_stiffness * a * a / (3.0 * params.friction * fz);
        // The adhesion region vanishes when the denominator reaches zero.
        let den = (1.0 - a * spin * theta * sgn(tan_alpha)).max(1e-3);
        (theta, theta / den)
    } else {
        (0.0, 0.0)
    };

    Ok(SlipState { kappa, tan_alpha, sigma_x, sigma_y, sigma: sigma_x.hypot(sigma_y), spin, theta, theta_star })
}

/// Normalized cubic `3u - 3u^2 + u^3` extended as an odd function of `u`.
pub(crate) fn adhesion_cubic(u: f64) -> f64 {
    let m = u.abs();
    sgn(u) * (3.0 * m - 3.0 * m * m + m * m * m)
}

/// Evaluates the force laws for a slip state produced from the same inputs.
pub fn compute_forces(slip: &SlipState, inputs: &TireInputs, params: &TireParams) -> TireForces {
    let fz = inputs.normal_load;
    if fz <= 0.0 {
        return TireForces::default();
    }
    let mu_fz = params.friction * fz;
    let a = params.half_contact_length;

    let fx = if slip.sigma == 0.0 {
        0.0
    } else {
        let direction = slip.sigma_x / slip.sigma;
        let u = slip.theta * slip.sigma;
        if u <= 1.0 {
            mu_fz * direction * adhesion_cubic(u)
        } else {
            mu_fz * direction
        }
    };

    let u_y = slip.theta_star * slip.sigma_y;
    let (fy, mz) = if u_y.abs() <= 1.0 {
        let m = u_y.abs();
        let fy = mu_fz * adhesion_cubic(u_y) + 2.0 / 3.0 * params.tread_stiffness * a.powi(3) * slip.spin;
        let mz = -mu_fz * a * u_y * (1.0 - 3.0 * m + 3.0 * m * m - m * m * m);
        (fy, mz)
    } else {
        (mu_fz * sgn(slip.tan_alpha), 0.0)
    };

    TireForces { fx, fy, mz }
}

/// Convenience pipeline used by the vehicle assembly: clamped slip, then forces.
pub fn tire_forces(
    inputs: &TireInputs,
    params: &TireParams,
    cfg: &SlipConfig,
) -> Result<(SlipState, TireForces), TireError> {
    let slip = compute_slip_clamped(inputs, params, cfg)?;
    Ok((slip, compute_forces(&slip, inputs, params)))
}
