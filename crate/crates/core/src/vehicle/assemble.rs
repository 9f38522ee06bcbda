use serde::Serialize;

use crate::state::VehicleState;
use crate::tire_brush::{tire_forces, SlipState, TireForces, TireInputs};

use super::frames::{body_to_tire_velocity, tire_to_body_forces};
use super::{VehicleError, VehicleSpec};

/// Resolved per-wheel inputs for one force evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WheelCommand {
    pub steer: f64,
    pub wheel_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TireContribution {
    pub normal_load: f64,
    pub steer: f64,
    pub slip: SlipState,
    /// Forces in the tire frame.
    pub tire: TireForces,
    pub fx_body: f64,
    pub fy_body: f64,
}

/// Total body-frame forces and yaw moment, plus the per-tire breakdown.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BodyForces {
    pub fx: f64,
    pub fy: f64,
    pub mz: f64,
    pub per_tire: Vec<TireContribution>,
}

/// Runs every tire through velocity transform, slip, brush forces and the
/// body transform, then sums forces and the yaw moment
/// `k_align * Mz_i + x_i * Fy_i - y_i * Fx_i`.
///
/// `camber_override` replaces every tire's camber (used for leaning single-track riders).
pub fn assemble_body_forces(
    spec: &VehicleSpec,
    state: &VehicleState,
    commands: &[WheelCommand],
    loads: &[f64],
    camber_override: Option<f64>,
) -> Result<BodyForces, VehicleError> {
    let n = spec.wheels.len();
    for got in [commands.len(), loads.len()] {
        if got != n {
            return Err(VehicleError::WheelCount { expected: n, got });
        }
    }

    let mut out = BodyForces { per_tire: Vec::with_capacity(n), ..Default::default() };
    for (index, ((wheel, cmd), &fz)) in spec.wheels.iter().zip(commands).zip(loads).enumerate() {
        let (vx, vy) = body_to_tire_velocity(state, wheel, cmd.steer, spec.full_kinematics);
        let inputs = TireInputs::from_kinematics(fz, cmd.wheel_speed, cmd.steer, state.yaw_rate, vx, vy, &spec.slip);
        let mut tire = wheel.tire;
        if let Some(camber) = camber_override {
            tire.camber = camber;
        }
        let (slip, f) =
            tire_forces(&inputs, &tire, &spec.slip).map_err(|source| VehicleError::Tire { index, source })?;
        let (fx_body, fy_body) = tire_to_body_forces(f.fx, f.fy, cmd.steer);

        out.fx += fx_body;
        out.fy += fy_body;
        out.mz += spec.align_gain * f.mz + wheel.x * fy_body - wheel.y * fx_body;
        out.per_tire.push(TireContribution { normal_load: fz, steer: cmd.steer, slip, tire: f, fx_body, fy_body });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{compute_load_distribution, resolve_wheel_steer, SteeringMode};
    use super::*;
    use approx::assert_relative_eq;

    fn commands(spec: &VehicleSpec, steer: f64, state: &VehicleState, extra: f64) -> Vec<WheelCommand> {
        resolve_wheel_steer(spec, steer)
            .into_iter()
            .map(|s| WheelCommand { steer: s, wheel_speed: (state.vx + extra) / 0.3 })
            .collect()
    }

    #[test]
    fn straight_rolling_cart_is_balanced() {
        let c = cart();
        let st = VehicleState { vx: 4.0, ..Default::default() };
        let loads = compute_load_distribution(&c, 0.0, 0.0).unwrap();
        let f = assemble_body_forces(&c, &st, &commands(&c, 0.0, &st, 0.0), &loads, None).unwrap();
        assert!(f.fx.abs() < 1e-9);
        assert_eq!(f.fy, 0.0);
        assert_eq!(f.mz, 0.0);
    }

    #[test]
    fn single_tire_at_origin_matches_tire_forces() {
        let s = spec("unicycle", SteeringMode::SingleTrack, vec![wheel(0.0, 0.0, false, true)]);
        let st = VehicleState { vx: 3.0, vy: 0.1, ..Default::default() };
        let cmd = [WheelCommand { steer: 0.0, wheel_speed: 3.2 / 0.3 }];
        let f = assemble_body_forces(&s, &st, &cmd, &[500.0], None).unwrap();
        let t = f.per_tire[0].tire;
        assert_eq!((f.fx, f.fy), (t.fx, t.fy));
        assert_eq!(f.mz, s.align_gain * t.mz);
    }

    #[test]
    fn mirrored_layout_mirrors_forces() {
        // asymmetric cart to make the check non-trivial
        let mut c = cart();
        c.wheels[0].y = 0.7;
        c.wheels[3].tire.friction = 0.8;
        let m = c.mirrored();
        let st = VehicleState { vx: 3.0, vy: 0.2, yaw_rate: 0.3, ..Default::default() };
        let mst = VehicleState { vy: -0.2, yaw_rate: -0.3, ..st.clone() };
        let loads = compute_load_distribution(&c, 0.5, 1.0).unwrap();
        let mloads = compute_load_distribution(&m, 0.5, -1.0).unwrap();
        let f = assemble_body_forces(&c, &st, &commands(&c, 0.2, &st, 0.1), &loads, None).unwrap();
        let g = assemble_body_forces(&m, &mst, &commands(&m, -0.2, &mst, 0.1), &mloads, None).unwrap();
        assert_relative_eq!(f.fx, g.fx, max_relative = 1e-12);
        assert_relative_eq!(f.fy, -g.fy, max_relative = 1e-12);
        assert_relative_eq!(f.mz, -g.mz, max_relative = 1e-12);
    }

    #[test]
    fn totals_are_sums_of_entries() {
        let c = cart();
        let st = VehicleState { vx: 2.0, vy: -0.1, yaw_rate: 0.4, ..Default::default() };
        let loads = compute_load_distribution(&c, 0.0, 0.8).unwrap();
        let f = assemble_body_forces(&c, &st, &commands(&c, -0.3, &st, 0.3), &loads, None).unwrap();
        let fx: f64 = f.per_tire.iter().map(|t| t.fx_body).sum();
        let fy: f64 = f.per_tire.iter().map(|t| t.fy_body).sum();
        let mz: f64 = f
            .per_tire
            .iter()
            .zip(&c.wheels)
            .map(|(t, w)| c.align_gain * t.tire.mz + w.x * t.fy_body - w.y * t.fx_body)
            .sum();
        assert_eq!((f.fx, f.fy, f.mz), (fx, fy, mz));
    }

    #[test]
    fn wheel_count_mismatch_is_an_error() {
        let c = cart();
        let err = assemble_body_forces(&c, &VehicleState::default(), &[], &[0.0; 4], None).unwrap_err();
        assert_eq!(err, VehicleError::WheelCount { expected: 4, got: 0 });
    }
}
