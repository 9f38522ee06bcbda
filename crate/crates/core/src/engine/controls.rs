use serde::{Deserialize, Serialize};

use crate::models::{Longitudinal, LongitudinalKind, ModelCommand};

/// Normalized driver intents as they arrive from a keyboard or script.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Steering (or lean) intent in `[-1, 1]`.
    #[serde(default)]
    pub steer: f64,
    /// Speed intent in `[-1, 1]`.
    #[serde(default)]
    pub speed: f64,
    /// Brake intent in `[0, 1]`.
    #[serde(default)]
    pub brake: f64,
    #[serde(default)]
    pub timestamp: f64,
}

impl ControlCommand {
    pub fn new(steer: f64, speed: f64, brake: f64) -> Self {
        Self { steer, speed, brake, timestamp: 0.0 }
    }

    /// Intents clamped to their valid ranges. NaN becomes zero.
    pub fn saturated(&self) -> Self {
        let clamp = |v: f64, lo: f64, hi: f64| if v.is_nan() { 0.0 } else { v.clamp(lo, hi) };
        Self {
            steer: clamp(self.steer, -1.0, 1.0),
            speed: clamp(self.speed, -1.0, 1.0),
            brake: clamp(self.brake, 0.0, 1.0),
            timestamp: self.timestamp,
        }
    }
}

/// Actuator limits used when mapping intents to model commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlLimits {
    /// Maximum steer (or lean for skateboards), rad.
    pub max_steer: f64,
    /// rad/s
    pub max_steer_rate: f64,
    /// rad/s
    pub max_wheel_speed: f64,
    /// m/s^2
    pub max_accel: f64,
    /// m/s^2
    pub max_decel: f64,
    /// Rate at which full braking pulls the wheel speed command to zero, rad/s^2.
    pub wheel_brake_rate: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            max_steer: 0.5,
            max_steer_rate: 1.0,
            max_wheel_speed: 20.0,
            max_accel: 2.0,
            max_decel: 4.0,
            wheel_brake_rate: 15.0,
        }
    }
}

impl ControlLimits {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("max_steer", self.max_steer),
            ("max_steer_rate", self.max_steer_rate),
            ("max_wheel_speed", self.max_wheel_speed),
            ("max_accel", self.max_accel),
            ("max_decel", self.max_decel),
            ("wheel_brake_rate", self.wheel_brake_rate),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(format!("control limit `{name}` must be positive, got {v}")),
            None => Ok(()),
        }
    }
}

/// Maps intents to a model command for one step of length `dt`.
///
/// Steering is saturated at `max_steer` and slewed at `max_steer_rate` from
/// the previous mapped value. Wheel-speed models get
/// `speed * max_wheel_speed`; while braking the previous wheel speed is
/// instead pulled toward zero at `brake * wheel_brake_rate`. Acceleration
/// models get `speed * max_accel`, or `-brake * max_decel` while braking.
pub fn map_controls(
    intents: &ControlCommand,
    limits: &ControlLimits,
    kind: LongitudinalKind,
    prev: &ModelCommand,
    dt: f64,
) -> ModelCommand {
    let i = intents.saturated();
    let target = i.steer * limits.max_steer;
    let slew = limits.max_steer_rate * dt;
    let steer = (prev.steer + (target - prev.steer).clamp(-slew, slew)).clamp(-limits.max_steer, limits.max_steer);

    let longitudinal = match kind {
        LongitudinalKind::WheelSpeed => {
            if i.brake > 0.0 {
                let prev_w = match prev.longitudinal {
                    Longitudinal::WheelSpeed(w) => w,
                    Longitudinal::Acceleration(_) => 0.0,
                };
                let drop = i.brake * limits.wheel_brake_rate * dt;
                let w = if prev_w.abs() <= drop { 0.0 } else { prev_w - drop * prev_w.signum() };
                Longitudinal::WheelSpeed(w)
            } else {
                Longitudinal::WheelSpeed(i.speed * limits.max_wheel_speed)
            }
        }
        LongitudinalKind::Acceleration => {
            if i.brake > 0.0 {
                Longitudinal::Acceleration(-i.brake * limits.max_decel)
            } else {
                Longitudinal::Acceleration(i.speed * limits.max_accel)
            }
        }
    };
    ModelCommand { steer, longitudinal, brake: i.brake }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero(kind: LongitudinalKind) -> ModelCommand {
        ModelCommand::zero(kind)
    }

    #[test]
    fn steer_is_rate_limited() {
        let limits = ControlLimits { max_steer: 0.5, max_steer_rate: 1.0, ..Default::default() };
        let m = map_controls(
            &ControlCommand::new(1.0, 0.0, 0.0),
            &limits,
            LongitudinalKind::WheelSpeed,
            &zero(LongitudinalKind::WheelSpeed),
            0.1,
        );
        assert!((m.steer - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_intents_give_zero_command() {
        for kind in [LongitudinalKind::WheelSpeed, LongitudinalKind::Acceleration] {
            let m = map_controls(&ControlCommand::default(), &ControlLimits::default(), kind, &zero(kind), 0.01);
            assert_eq!(m, zero(kind));
        }
    }

    #[test]
    fn out_of_range_intents_are_clamped() {
        let limits = ControlLimits { max_steer_rate: 100.0, ..Default::default() };
        let m = map_controls(
            &ControlCommand::new(7.0, 3.0, 0.0),
            &limits,
            LongitudinalKind::Acceleration,
            &zero(LongitudinalKind::Acceleration),
            1.0,
        );
        assert_eq!(m.steer, limits.max_steer);
        assert_eq!(m.longitudinal, Longitudinal::Acceleration(limits.max_accel));
        let m = map_controls(
            &ControlCommand::new(0.0, -3.0, 0.0),
            &limits,
            LongitudinalKind::WheelSpeed,
            &zero(LongitudinalKind::WheelSpeed),
            1.0,
        );
        assert_eq!(m.longitudinal, Longitudinal::WheelSpeed(-limits.max_wheel_speed));
    }

    #[test]
    fn braking_semantics_per_model() {
        let limits = ControlLimits::default();
        let m = map_controls(
            &ControlCommand::new(0.0, 1.0, 0.5),
            &limits,
            LongitudinalKind::Acceleration,
            &zero(LongitudinalKind::Acceleration),
            0.01,
        );
        assert_eq!(m.longitudinal, Longitudinal::Acceleration(-0.5 * limits.max_decel));

        let prev = ModelCommand { longitudinal: Longitudinal::WheelSpeed(10.0), ..zero(LongitudinalKind::WheelSpeed) };
        let m = map_controls(&ControlCommand::new(0.0, 1.0, 1.0), &limits, LongitudinalKind::WheelSpeed, &prev, 0.1);
        assert_eq!(m.longitudinal, Longitudinal::WheelSpeed(10.0 - 1.5));
        let prev = ModelCommand { longitudinal: Longitudinal::WheelSpeed(0.5), ..prev };
        let m = map_controls(&ControlCommand::new(0.0, 1.0, 1.0), &limits, LongitudinalKind::WheelSpeed, &prev, 0.1);
        assert_eq!(m.longitudinal, Longitudinal::WheelSpeed(0.0));
    }

    proptest! {
        #[test]
        fn slew_bound_holds(seq in proptest::collection::vec(-2.0f64..2.0, 1..60), dt in 0.001f64..0.1) {
            let limits = ControlLimits::default();
            let mut prev = zero(LongitudinalKind::WheelSpeed);
            for s in seq {
                let next = map_controls(&ControlCommand::new(s, 0.0, 0.0), &limits, LongitudinalKind::WheelSpeed, &prev, dt);
                prop_assert!((next.steer - prev.steer).abs() <= limits.max_steer_rate * dt + 1e-12);
                prop_assert!(next.steer.abs() <= limits.max_steer);
                prev = next;
            }
        }
    }
}
