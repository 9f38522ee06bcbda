//! Writes the 10-track synthetic annotation fixture used by the acceptance
//! suite:
//!
//! ```text
//! cargo run -p gm3-core --example gen_mini_fixture -- crates/core/tests/fixtures/mini_sdd
//! ```
//!
//! Tracks are GM3 runs with slowly varying steering, projected to pixels at
//! 0.05 m/px and rounded to whole pixels like the published boxes.

use std::fmt::Write as _;
use std::path::PathBuf;

use gm3_core::eval::Mode;
use gm3_core::models::{Longitudinal, ModelCommand};
use gm3_core::{Engine, ModelRegistry, VehicleConfig, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCALE: f64 = 0.05;
const FPS: f64 = 30.0;
const SUBSTEPS: usize = 6;

struct Track {
    mode: Mode,
    start_frame: u64,
    /// Anchor (bottom-midpoint) positions in pixels, one per frame.
    anchors: Vec<(f64, f64)>,
}

fn simulate(mode: Mode, rng: &mut ChaCha8Rng, frames: usize) -> Vec<(f64, f64)> {
    let cfg = VehicleConfig::builtin(mode.vehicle_id()).unwrap();
    let spec = cfg.spec().unwrap();
    let (speed, amplitude) = match mode {
        Mode::Biker => (rng.random_range(3.0..5.0), 0.08),
        Mode::Skater => (rng.random_range(2.0..3.0), 0.2),
        Mode::Cart => (rng.random_range(2.0..3.5), 0.2),
    };
    let period = rng.random_range(3.0..8.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let initial = VehicleState::at(
        rng.random_range(15.0..45.0),
        rng.random_range(15.0..45.0),
        rng.random_range(-3.1..3.1),
        speed,
    );
    let dt = 1.0 / (FPS * SUBSTEPS as f64);
    let mut engine =
        Engine::from_registry(&ModelRegistry::default(), "gm3", spec.clone(), cfg.limits, dt, initial).unwrap();
    let mut out = Vec::with_capacity(frames);
    for k in 0..frames * SUBSTEPS {
        if k % SUBSTEPS == 0 {
            let s = engine.state();
            // internal y-left to image y-down
            out.push((s.x / SCALE, -s.y / SCALE + 1000.0));
        }
        let t = engine.time();
        let steer = amplitude * (std::f64::consts::TAU * t / period + phase).sin();
        let cmd =
            ModelCommand { steer, longitudinal: Longitudinal::WheelSpeed(speed / spec.drive_radius()), brake: 0.0 };
        engine.step_command(cmd).unwrap();
    }
    out
}

fn box_size(mode: Mode) -> (f64, f64) {
    match mode {
        Mode::Biker => (24.0, 40.0),
        Mode::Skater => (16.0, 34.0),
        Mode::Cart => (44.0, 52.0),
    }
}

fn label(mode: Mode) -> &'static str {
    mode.title()
}

fn write_video(tracks: &[(u64, Track)], rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for (id, track) in tracks {
        let (w, h) = box_size(track.mode);
        let n = track.anchors.len();
        for (k, &(u, v)) in track.anchors.iter().enumerate() {
            // a bridged two-frame gap in the middle of every third track
            if id % 3 == 0 && (n / 2..n / 2 + 2).contains(&k) {
                continue;
            }
            let lost = k == n / 3 && id % 2 == 1;
            let occluded = rng.random_bool(0.05);
            let (xmin, xmax) = ((u - w / 2.0).round(), (u + w / 2.0).round());
            let (ymin, ymax) = ((v - h).round(), v.round());
            let _ = writeln!(
                s,
                "{id} {xmin} {ymin} {xmax} {ymax} {} {} {} 0 \"{}\"",
                track.start_frame + k as u64,
                lost as u8,
                occluded as u8,
                label(track.mode)
            );
        }
    }
    // a pedestrian, ignored by the evaluation
    for k in 0..60u64 {
        let _ = writeln!(s, "99 {} 500 {} 530 {k} 0 0 0 \"Pedestrian\"", 300 + k, 312 + k);
    }
    s
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "crates/core/tests/fixtures/mini_sdd".into()).into();
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let modes = [
        Mode::Biker,
        Mode::Biker,
        Mode::Biker,
        Mode::Biker,
        Mode::Skater,
        Mode::Skater,
        Mode::Skater,
        Mode::Cart,
        Mode::Cart,
        Mode::Cart,
    ];
    let mut videos: [Vec<(u64, Track)>; 2] = [Vec::new(), Vec::new()];
    for (i, &mode) in modes.iter().enumerate() {
        let frames = rng.random_range(150..210);
        let anchors = simulate(mode, &mut rng, frames);
        let track = Track { mode, start_frame: rng.random_range(0..300), anchors };
        videos[i % 2].push((i as u64, track));
    }
    for (v, tracks) in videos.iter().enumerate() {
        let dir = out.join("annotations").join("deathCircle").join(format!("video{v}"));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("annotations.txt"), write_video(tracks, &mut rng)).unwrap();
    }
    println!("wrote {}", out.display());
}
