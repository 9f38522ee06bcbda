//! Replay of observed trajectories against the dynamics models.
//!
//! Pipeline: annotation files are ingested into uniformly sampled metric
//! [`Trajectory`]s ([`sdd`]), a command sequence is reconstructed from each
//! track ([`reconstruct`]), both models replay it open loop from the track's
//! first state, and the replays are scored against the observation with ADE
//! and the discrete Fréchet distance ([`metrics`], [`harness`]).

pub mod harness;
pub mod metrics;
pub mod reconstruct;
pub mod sdd;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use harness::{evaluate_modes, evaluate_tracks, EvalOptions, MetricsReport, ModeSummary, TrackMetrics};
pub use metrics::{ade, discrete_frechet};
pub use reconstruct::{reconstruct_controls, replay, ReconstructOptions};
pub use sdd::{ingest_annotations, parse_annotations, AnnotationRecord};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no usable trajectories in {0}")]
    Empty(String),
    #[error("trajectory length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("timestamps differ at index {index}: {a} vs {b}")]
    TimestampMismatch { index: usize, a: f64, b: f64 },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("track excluded: {0}")]
    Excluded(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Script(#[from] crate::engine::script::ScriptError),
}

/// Micro-mobility classes carried through the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Biker,
    Skater,
    Cart,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Biker, Mode::Skater, Mode::Cart];

    /// Maps an annotation label; other classes yield `None`.
    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "Biker" => Some(Mode::Biker),
            "Skater" => Some(Mode::Skater),
            "Cart" => Some(Mode::Cart),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Biker => "biker",
            Mode::Skater => "skater",
            Mode::Cart => "cart",
        }
    }

    /// Bundled vehicle config used for this mode.
    pub fn vehicle_id(self) -> &'static str {
        match self {
            Mode::Biker => "bicycle",
            Mode::Skater => "skateboard",
            Mode::Cart => "cart",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Mode::Biker => "Biker",
            Mode::Skater => "Skater",
            Mode::Cart => "Cart",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "biker" => Ok(Mode::Biker),
            "skater" => Ok(Mode::Skater),
            "cart" => Ok(Mode::Cart),
            _ => Err(format!("unknown mode `{s}` (expected biker, skater or cart)")),
        }
    }
}

/// Source file, annotation track id and segment after gap splitting.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId {
    pub source: String,
    pub track: u64,
    pub segment: u32,
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.source.is_empty() {
            write!(f, "{}.{}", self.track, self.segment)
        } else {
            write!(f, "{}/{}.{}", self.source, self.track, self.segment)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Uniformly sampled world-frame path, external (data) convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: TrackId,
    pub mode: Mode,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn new(id: TrackId, mode: Mode, points: Vec<TrajPoint>) -> Self {
        Self { id, mode, points }
    }

    /// Builds a trajectory sampled at `t0 + k dt`.
    pub fn sampled(id: TrackId, mode: Mode, t0: f64, dt: f64, xy: &[[f64; 2]]) -> Self {
        let points = xy.iter().enumerate().map(|(k, &[x, y])| TrajPoint { t: t0 + k as f64 * dt, x, y }).collect();
        Self { id, mode, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xy(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }

    /// Sample step, from the first two points.
    pub fn dt(&self) -> Option<f64> {
        match self.points.as_slice() {
            [a, b, ..] => Some(b.t - a.t),
            _ => None,
        }
    }

    pub fn path_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
    }

    /// Checks the sampling invariants: at least two points, finite
    /// coordinates, uniform step within 1e-6 s.
    pub fn validate(&self) -> Result<(), EvalError> {
        let dt = self.dt().ok_or(EvalError::EmptyTrajectory)?;
        if !(dt > 0.0) {
            return Err(EvalError::InvalidParam(format!("track {}: non-increasing time", self.id)));
        }
        for (k, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.t.is_finite()) {
                return Err(EvalError::InvalidParam(format!("track {}: non-finite point {k}", self.id)));
            }
            let expected = self.points[0].t + k as f64 * dt;
            if (p.t - expected).abs() > 1e-6 {
                return Err(EvalError::InvalidParam(format!("track {}: non-uniform time at {k}", self.id)));
            }
        }
        Ok(())
    }
}
