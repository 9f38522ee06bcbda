//! Inverse kinematics from an observed path to a model command sequence.
//!
//! Positions are smoothed with a centered moving average, differentiated with
//! centered differences, and converted to speed, heading and path curvature.
//! Curvature maps to a steer (or lean) command through the vehicle's slip-free
//! geometry, so both models receive the same geometric intent; only the
//! longitudinal channel differs (wheel speed `v / R_e` or acceleration `dv/dt`).

use std::collections::BTreeMap;

use super::{EvalError, TrajPoint, Trajectory};
use crate::config::VehicleConfig;
use crate::engine::script::{run_script, ControlScript, InitialState, ScriptCommand, TimedCommand};
use crate::models::{Longitudinal, LongitudinalKind, ModelCommand, ModelRegistry};
use crate::vehicle::command_for_curvature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    /// Moving-average window in samples (odd; even values are rounded up).
    pub window: usize,
    /// Tracks whose median speed is below this are excluded, m/s.
    pub min_median_speed: f64,
    /// RK4 substeps per data sample.
    pub substeps: usize,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { window: 5, min_median_speed: 0.1, substeps: 6 }
    }
}

/// Per-sample kinematics shared by every model's command sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricIntent {
    pub dt: f64,
    /// Body x of the slip-free reference point.
    pub x_ref: f64,
    /// Speed of the reference point, m/s.
    pub speed: Vec<f64>,
    pub accel: Vec<f64>,
    /// Unwrapped body heading, rad.
    pub heading: Vec<f64>,
    /// Path curvature of the reference point, 1/m.
    pub curvature: Vec<f64>,
    /// Steer or lean command, clamped to the vehicle limit.
    pub steer: Vec<f64>,
}

/// Centered moving average; the window shrinks symmetrically at the ends so
/// endpoints are kept.
pub fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = xs.len();
    (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            xs[k - h..=k + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect()
}

/// Centered differences; second-order one-sided stencils at the ends.
pub fn derivative(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    match n {
        0 | 1 => return vec![0.0; n],
        2 => return vec![(xs[1] - xs[0]) / dt; 2],
        _ => {}
    }
    (0..n)
        .map(|k| match k {
            0 => (-3.0 * xs[0] + 4.0 * xs[1] - xs[2]) / (2.0 * dt),
            k if k == n - 1 => (3.0 * xs[k] - 4.0 * xs[k - 1] + xs[k - 2]) / (2.0 * dt),
            k => (xs[k + 1] - xs[k - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Replaces the first and last `edge` samples by linear extrapolation from
/// the two nearest interior samples.
fn extrapolate_edges(xs: &mut [f64], edge: usize) {
    let n = xs.len();
    let slope = xs[edge + 1] - xs[edge];
    for k in 0..edge {
        xs[k] = xs[edge] - (edge - k) as f64 * slope;
    }
    let (last, slope) = (xs[n - 1 - edge], xs[n - 1 - edge] - xs[n - 2 - edge]);
    for k in n - edge..n {
        xs[k] = last + (k - (n - 1 - edge)) as f64 * slope;
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn geometric_intent(
    traj: &Trajectory,
    cfg: &VehicleConfig,
    opts: &ReconstructOptions,
) -> Result<GeometricIntent, EvalError> {
    traj.validate()?;
    let spec = cfg.spec().map_err(|e| EvalError::InvalidParam(e.to_string()))?;
    let dt = traj.dt().ok_or(EvalError::EmptyTrajectory)?;
    let window = opts.window.max(1) | 1;
    let xs = smooth(&traj.points.iter().map(|p| p.x).collect::<Vec<_>>(), window);
    let ys = smooth(&traj.points.iter().map(|p| p.y).collect::<Vec<_>>(), window);
    let (vx, vy) = (derivative(&xs, dt), derivative(&ys, dt));
    let speed: Vec<f64> = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();

    let med = median(&speed);
    if med < opts.min_median_speed {
        return Err(EvalError::Excluded(format!("median speed {med:.3} m/s below {}", opts.min_median_speed)));
    }

    // heading is undefined while (nearly) stopped: hold the last defined value
    let moving = opts.min_median_speed * 0.5;
    let first = speed.iter().position(|&v| v >= moving).unwrap_or(0);
    let mut heading = Vec::with_capacity(speed.len());
    let mut last = vy[first].atan2(vx[first]);
    for k in 0..speed.len() {
        if speed[k] >= moving {
            let raw = vy[k].atan2(vx[k]);
            // unwrap against the previous sample
            let mut d = raw - last;
            d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            last += d;
        }
        heading.push(last);
    }
    // Samples within half a window of either end see a shrunken smoothing
    // window and one-sided differences; extrapolate them from the interior.
    let edge = window / 2 + 1;
    let n = speed.len();
    let mut speed = speed;
    if n > 2 * edge + 1 {
        for series in [&mut heading, &mut speed] {
            extrapolate_edges(series, edge);
        }
    }
    let heading_rate = derivative(&heading, dt);
    let mut observed: Vec<f64> =
        heading_rate.iter().zip(&speed).map(|(&r, &v)| if v >= moving { r / v } else { 0.0 }).collect();
    if n > 2 * edge + 1 {
        let (head, tail) = (observed[edge], observed[n - 1 - edge]);
        observed[..edge].fill(head);
        observed[n - edge..].fill(tail);
    }

    // The observed point is the center of gravity; the slip-free reference
    // point sits `x_ref` behind it on the body axis. Shift curvature, speed
    // and heading to that point.
    let x_ref = spec.kinematic_reference_x();
    let curvature: Vec<f64> = observed
        .iter()
        .map(|&k| {
            if k == 0.0 || x_ref == 0.0 {
                return k;
            }
            let r_sq = (1.0 / (k * k) - x_ref * x_ref).max(x_ref * x_ref);
            k.signum() / r_sq.sqrt()
        })
        .collect();
    let speed: Vec<f64> = speed.iter().zip(&curvature).map(|(&v, &k)| v / (x_ref * k).hypot(1.0)).collect();
    let heading: Vec<f64> = heading.iter().zip(&curvature).map(|(&h, &k)| h + (x_ref * k).atan()).collect();

    let max_steer = cfg.limits.max_steer;
    let steer = curvature.iter().map(|&k| command_for_curvature(&spec, k).clamp(-max_steer, max_steer)).collect();
    let accel = derivative(&speed, dt);
    Ok(GeometricIntent { dt, x_ref, speed, accel, heading, curvature, steer })
}

/// Builds the replay script for `model_id` (external convention).
pub fn reconstruct_controls(
    traj: &Trajectory,
    model_id: &str,
    cfg: &VehicleConfig,
    registry: &ModelRegistry,
    opts: &ReconstructOptions,
) -> Result<ControlScript, EvalError> {
    let kind = registry.get(model_id).map_err(|e| EvalError::InvalidParam(e.to_string()))?.longitudinal_kind();
    let intent = geometric_intent(traj, cfg, opts)?;
    let spec = cfg.spec().map_err(|e| EvalError::InvalidParam(e.to_string()))?;
    let radius = spec.drive_radius();
    let timeline = (0..traj.len())
        .map(|k| {
            let longitudinal = match kind {
                LongitudinalKind::WheelSpeed => Longitudinal::WheelSpeed(intent.speed[k] / radius),
                LongitudinalKind::Acceleration => Longitudinal::Acceleration(intent.accel[k]),
            };
            let command = ScriptCommand::Model(ModelCommand { steer: intent.steer[k], longitudinal, brake: 0.0 });
            TimedCommand { t: k as f64 * intent.dt, command }
        })
        .collect();
    let p0 = traj.points[0];
    let yaw_rate = intent.speed[0] * intent.curvature[0];
    let initial_state = InitialState {
        x: p0.x,
        y: p0.y,
        heading: intent.heading[0],
        vx: intent.speed[0],
        vy: -intent.x_ref * yaw_rate,
        yaw_rate,
    };
    Ok(ControlScript {
        schema_version: 1,
        vehicle_kind: cfg.name.clone(),
        model: model_id.to_string(),
        dt: Some(intent.dt / opts.substeps.max(1) as f64),
        duration: Some((traj.len() - 1) as f64 * intent.dt),
        initial_state,
        param_overrides: BTreeMap::new(),
        timeline,
    })
}

/// Runs `script` and samples the path at the data rate of `truth`.
pub fn replay(
    script: &ControlScript,
    cfg: &VehicleConfig,
    registry: &ModelRegistry,
    truth: &Trajectory,
    substeps: usize,
) -> Result<Trajectory, EvalError> {
    let log = run_script(script, cfg, registry)?;
    if let Some(fault) = &log.fault {
        return Err(EvalError::Excluded(format!("replay fault: {fault}")));
    }
    let (xi, yi) = (log.column("x").expect("base column"), log.column("y").expect("base column"));
    let points: Vec<TrajPoint> = log
        .rows
        .iter()
        .step_by(substeps.max(1))
        .zip(&truth.points)
        .map(|(row, p)| TrajPoint { t: p.t, x: row[xi], y: -row[yi] })
        .collect();
    if points.len() != truth.len() {
        return Err(EvalError::LengthMismatch(points.len(), truth.len()));
    }
    Ok(Trajectory::new(truth.id.clone(), truth.mode, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Mode, TrackId};
    use crate::vehicle::kinematic_curvature;

    fn id() -> TrackId {
        TrackId { source: String::new(), track: 1, segment: 0 }
    }

    fn circle(radius: f64, speed: f64, n: usize, dt: f64) -> Trajectory {
        let xy: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let a = speed * k as f64 * dt / radius;
                [radius * a.sin(), radius * (1.0 - a.cos())]
            })
            .collect();
        Trajectory::sampled(id(), Mode::Biker, 0.0, dt, &xy)
    }

    #[test]
    fn smoothing_and_differences() {
        assert_eq!(smooth(&[0.0, 3.0, 6.0, 0.0, 3.0], 3), vec![0.0, 3.0, 3.0, 3.0, 3.0]);
        assert_eq!(smooth(&[1.0, 2.0, 4.0], 5), vec![1.0, 7.0 / 3.0, 4.0]);
        assert_eq!(derivative(&[0.0, 1.0, 4.0], 0.5), vec![0.0, 4.0, 8.0]);
        assert_eq!(derivative(&[1.0, 2.0], 0.5), vec![2.0, 2.0]);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn straight_track_has_zero_steer() {
        let xy: Vec<[f64; 2]> = (0..60).map(|k| [2.0 * k as f64 / 30.0, 1.0]).collect();
        let t = Trajectory::sampled(id(), Mode::Cart, 0.0, 1.0 / 30.0, &xy);
        let cfg = VehicleConfig::builtin("cart").unwrap();
        let i = geometric_intent(&t, &cfg, &ReconstructOptions::default()).unwrap();
        assert!(i.steer.iter().all(|s| s.abs() < 1e-9));
        assert!(i.speed.iter().all(|v| (v - 2.0).abs() < 1e-9));
        let s =
            reconstruct_controls(&t, "gm3", &cfg, &ModelRegistry::default(), &ReconstructOptions::default()).unwrap();
        let r = cfg.spec().unwrap().drive_radius();
        for c in &s.timeline {
            let ScriptCommand::Model(m) = c.command else { panic!() };
            assert!((m.longitudinal.value() - 2.0 / r).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_recovers_geometric_steer() {
        let cfg = VehicleConfig::builtin("bicycle").unwrap();
        let spec = cfg.spec().unwrap();
        let (radius, dt) = (8.0, 1.0 / 30.0);
        let t = circle(radius, 3.0, 150, dt);
        let i = geometric_intent(&t, &cfg, &ReconstructOptions::default()).unwrap();
        let (wheelbase, x_ref) = (1.05, -0.5);
        let expected = (wheelbase / (radius * radius - x_ref * x_ref).sqrt()).atan();
        for &s in &i.steer[5..145] {
            assert!((s - expected).abs() < 1e-3 * expected.max(1.0), "{s} vs {expected}");
        }
        let ref_radius = 1.0 / kinematic_curvature(&spec, expected);
        assert!((ref_radius.hypot(x_ref) - radius).abs() < 1e-9);
    }

    #[test]
    fn both_models_get_the_same_steering() {
        let cfg = VehicleConfig::builtin("skateboard").unwrap();
        let t = circle(6.0, 2.5, 90, 1.0 / 30.0);
        let reg = ModelRegistry::default();
        let o = ReconstructOptions::default();
        let a = reconstruct_controls(&t, "gm3", &cfg, &reg, &o).unwrap();
        let b = reconstruct_controls(&t, "kbm", &cfg, &reg, &o).unwrap();
        let steer = |s: &ControlScript| -> Vec<f64> {
            s.timeline
                .iter()
                .map(|c| match c.command {
                    ScriptCommand::Model(m) => m.steer,
                    ScriptCommand::Intent(_) => unreachable!(),
                })
                .collect()
        };
        assert_eq!(steer(&a), steer(&b));
        assert_eq!(a.initial_state, b.initial_state);
    }

    #[test]
    fn standstill_tracks_are_excluded() {
        let xy = vec![[1.0, 1.0]; 30];
        let t = Trajectory::sampled(id(), Mode::Biker, 0.0, 1.0 / 30.0, &xy);
        let cfg = VehicleConfig::builtin("bicycle").unwrap();
        assert!(matches!(geometric_intent(&t, &cfg, &ReconstructOptions::default()), Err(EvalError::Excluded(_))));
    }

    #[test]
    fn kbm_replay_retraces_a_circle() {
        let cfg = VehicleConfig::builtin("bicycle").unwrap();
        let reg = ModelRegistry::default();
        let t = circle(10.0, 2.0, 120, 1.0 / 30.0);
        let o = ReconstructOptions::default();
        let s = reconstruct_controls(&t, "kbm", &cfg, &reg, &o).unwrap();
        let est = replay(&s, &cfg, &reg, &t, o.substeps).unwrap();
        assert_eq!(est.len(), t.len());
        let e = crate::eval::ade(&est, &t).unwrap();
        assert!(e < 0.005, "{e}");
    }
}
