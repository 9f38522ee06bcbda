use super::{SteeringMode, VehicleSpec};

/// Roll moment about the body x-axis contributed by a leaning rider.
///
/// The rider CG is rotated by `lean` about the x-axis; the moment combines
/// the displaced weight and the lateral inertial load at rider height.
pub fn lean_roll_moment(spec: &VehicleSpec, lean: f64, ay: f64) -> f64 {
    let [_, y_cg, h_cg] = spec.rider_cg;
    let (s, c) = lean.sin_cos();
    let y_rot = y_cg * c + h_cg * s;
    let centripetal = spec.rider_mass * ay;
    y_rot * spec.rider_mass * spec.gravity + centripetal * h_cg
}

/// Front and rear truck steer angles for a deck lean `lean`.
pub fn skateboard_steer(lean: f64, kingpin: f64, gain: f64) -> (f64, f64) {
    let front = gain * lean * kingpin.sin();
    (front, -front)
}

/// Distance from the rear reference axle to the mean steerable wheel.
fn steer_base(spec: &VehicleSpec) -> f64 {
    let x_ref = spec.rear_reference_x();
    let (sum, n) = spec.wheels.iter().filter(|w| w.steerable).fold((0.0, 0usize), |(s, n), w| (s + w.x, n + 1));
    if n == 0 {
        return spec.wheelbase();
    }
    let base = sum / n as f64 - x_ref;
    if base > 0.0 {
        base
    } else {
        spec.wheelbase()
    }
}

fn differential_base(spec: &VehicleSpec) -> f64 {
    let w = spec.track_width();
    if w > 0.0 {
        w
    } else {
        1.0
    }
}

/// Per-wheel Ackermann angles for a virtual center-wheel command `steer`.
///
/// Each steerable wheel points at the turn center on the rear reference
/// axle; for a front axle at track `W` this gives
/// `cot(outer) = cot(steer) + W / 2L` and `cot(inner) = cot(steer) - W / 2L`.
pub fn ackermann_angles(spec: &VehicleSpec, steer: f64) -> Vec<f64> {
    let x_ref = spec.rear_reference_x();
    let (s, c) = steer.sin_cos();
    spec.wheels
        .iter()
        .map(|w| {
            if !w.steerable || steer == 0.0 {
                return 0.0;
            }
            let d = w.x - x_ref;
            if d <= 0.0 {
                steer
            } else {
                (d * s).atan2(d * c - w.y * s)
            }
        })
        .collect()
}

/// Resolves the scalar command into one steer angle per wheel.
pub fn resolve_wheel_steer(spec: &VehicleSpec, command: f64) -> Vec<f64> {
    match spec.steering_mode {
        SteeringMode::SingleTrack => spec.wheels.iter().map(|w| if w.steerable { command } else { 0.0 }).collect(),
        SteeringMode::AckermannFront => ackermann_angles(spec, command),
        SteeringMode::Skateboard => {
            let (front, rear) = skateboard_steer(command, spec.kingpin_angle, spec.lean_gain);
            spec.wheels
                .iter()
                .map(|w| match (w.steerable, w.x > 0.0) {
                    (false, _) => 0.0,
                    (true, true) => front,
                    (true, false) => rear,
                })
                .collect()
        }
        SteeringMode::Differential => vec![0.0; spec.wheels.len()],
    }
}

/// Wheel speed multiplier for differential layouts: the command sets a yaw
/// rate of `v tan(command) / W`.
pub(crate) fn differential_factor(spec: &VehicleSpec, y: f64, command: f64) -> f64 {
    1.0 - y * command.tan() / differential_base(spec)
}

/// Path curvature (1/m) a slip-free vehicle follows under `command`.
pub fn kinematic_curvature(spec: &VehicleSpec, command: f64) -> f64 {
    match spec.steering_mode {
        SteeringMode::SingleTrack | SteeringMode::AckermannFront => {
            let l = steer_base(spec);
            if l > 0.0 {
                command.tan() / l
            } else {
                0.0
            }
        }
        SteeringMode::Skateboard => {
            let l = spec.wheelbase();
            if l > 0.0 {
                let (front, _) = skateboard_steer(command, spec.kingpin_angle, spec.lean_gain);
                2.0 * front.tan() / l
            } else {
                0.0
            }
        }
        SteeringMode::Differential => command.tan() / differential_base(spec),
    }
}

/// Inverse of [`kinematic_curvature`].
pub fn command_for_curvature(spec: &VehicleSpec, curvature: f64) -> f64 {
    match spec.steering_mode {
        SteeringMode::SingleTrack | SteeringMode::AckermannFront => (steer_base(spec) * curvature).atan(),
        SteeringMode::Skateboard => {
            let per_lean = spec.lean_gain * spec.kingpin_angle.sin();
            if per_lean == 0.0 {
                0.0
            } else {
                (spec.wheelbase() * curvature / 2.0).atan() / per_lean
            }
        }
        SteeringMode::Differential => (differential_base(spec) * curvature).atan(),
    }
}
