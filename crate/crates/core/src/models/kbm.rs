use crate::state::{StateDerivative, VehicleState};
use crate::vehicle::{kinematic_curvature, SteeringMode, VehicleSpec};

use super::{DynamicsModel, LogColumn, Longitudinal, LongitudinalKind, ModelCommand, ModelError};

/// Kinematic bicycle model without slip.
///
/// The reference point (rear axle, truck midpoint or wheel centroid, see
/// [`VehicleSpec::kinematic_reference_x`]) moves along the heading at speed
/// `v` and turns with curvature [`kinematic_curvature`]. The state keeps the
/// center of gravity position so both models share one logging schema; the
/// body `vy` and yaw rate are derived after each step.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kbm;

impl Kbm {
    fn accel(cmd: &ModelCommand) -> Result<f64, ModelError> {
        match cmd.longitudinal {
            Longitudinal::Acceleration(a) => Ok(a),
            Longitudinal::WheelSpeed(_) => {
                Err(ModelError::CommandMismatch { model: "kbm".into(), expected: LongitudinalKind::Acceleration })
            }
        }
    }
}

impl DynamicsModel for Kbm {
    fn id(&self) -> &str {
        "kbm"
    }

    fn longitudinal_kind(&self) -> LongitudinalKind {
        LongitudinalKind::Acceleration
    }

    fn derivative(
        &self,
        spec: &VehicleSpec,
        state: &VehicleState,
        cmd: &ModelCommand,
    ) -> Result<StateDerivative, ModelError> {
        let mut a = Self::accel(cmd)?;
        let v = state.vx;
        // braking brings the vehicle to rest and holds it there
        if cmd.brake > 0.0 && v <= 0.0 {
            a = 0.0;
        }
        let x_ref = spec.kinematic_reference_x();
        let psi_dot = v * kinematic_curvature(spec, cmd.steer);
        let (s, c) = state.heading.sin_cos();
        Ok(StateDerivative([v * c + x_ref * psi_dot * s, v * s - x_ref * psi_dot * c, psi_dot, a, 0.0, 0.0, 0.0]))
    }

    fn finish_step(
        &self,
        spec: &VehicleSpec,
        state: &mut VehicleState,
        cmd: &ModelCommand,
    ) -> Result<Vec<f64>, ModelError> {
        Self::accel(cmd)?;
        if cmd.brake > 0.0 && state.vx < 0.0 {
            state.vx = 0.0;
        }
        let curvature = kinematic_curvature(spec, cmd.steer);
        state.yaw_rate = state.vx * curvature;
        state.vy = -spec.kinematic_reference_x() * state.yaw_rate;
        if spec.steering_mode == SteeringMode::Skateboard {
            state.lean = cmd.steer;
        }
        Ok(vec![curvature])
    }

    fn log_columns(&self, _spec: &VehicleSpec) -> Vec<LogColumn> {
        vec![LogColumn::new("curvature", true)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::advance;
    use crate::vehicle::fixtures::{bicycle, cart};

    fn cmd(steer: f64, a: f64) -> ModelCommand {
        ModelCommand { steer, longitudinal: Longitudinal::Acceleration(a), brake: 0.0 }
    }

    fn step(spec: &VehicleSpec, s: &VehicleState, c: &ModelCommand, dt: f64) -> VehicleState {
        let mut n = advance(&Kbm, spec, s, c, dt).unwrap();
        Kbm.finish_step(spec, &mut n, c).unwrap();
        n
    }

    #[test]
    fn straight_line() {
        let spec = bicycle();
        let mut s = VehicleState::at(0.0, 0.0, 0.0, 2.0);
        for _ in 0..100 {
            s = step(&spec, &s, &cmd(0.0, 0.0), 0.01);
        }
        assert!((s.x - 2.0).abs() < 1e-12);
        assert_eq!(s.heading, 0.0);
    }

    #[test]
    fn standstill_has_zero_derivative() {
        let d = Kbm.derivative(&cart(), &VehicleState::default(), &cmd(0.3, 0.0)).unwrap();
        assert_eq!(d.0, [0.0; 7]);
    }

    #[test]
    fn rear_axle_follows_circle() {
        let spec = bicycle();
        let delta = 0.2f64;
        let radius = 1.0 / delta.tan();
        let x_ref = spec.kinematic_reference_x();
        let mut s = VehicleState::at(0.0, 0.0, 0.0, 1.0);
        s.yaw_rate = delta.tan();
        s.vy = -x_ref * s.yaw_rate;
        let dt = 0.001;
        for _ in 0..((2.0 * std::f64::consts::PI * radius) / dt) as usize {
            s = step(&spec, &s, &cmd(delta, 0.0), dt);
            let (px, py) = (s.x + x_ref * s.heading.cos(), s.y + x_ref * s.heading.sin());
            // rear-axle start at (x_ref, 0), circle centre at (x_ref, R)
            let r = (px - x_ref).hypot(py - radius);
            assert!((r / radius - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn braking_stops_at_zero() {
        let spec = bicycle();
        let brake = ModelCommand { brake: 1.0, ..cmd(0.0, -4.0) };
        let mut s = VehicleState::at(0.0, 0.0, 0.0, 1.0);
        for _ in 0..100 {
            s = step(&spec, &s, &brake, 0.01);
        }
        assert_eq!(s.vx, 0.0);
        assert!(s.x > 0.0);
    }
}
