//! Drone-video annotation files.
//!
//! One box per line, whitespace separated:
//! `track_id xmin ymin xmax ymax frame lost occluded generated "label"`.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use super::{EvalError, Mode, TrackId, Trajectory};

/// Longest run of missing frames bridged by interpolation; longer gaps split the track.
pub const MAX_GAP_FRAMES: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub track_id: u64,
    /// `(xmin, ymin, xmax, ymax)` in pixels.
    pub bbox: [f64; 4],
    pub frame: u64,
    pub lost: bool,
    pub occluded: bool,
    pub generated: bool,
    pub label: String,
}

impl AnnotationRecord {
    /// Bottom-midpoint of the box in pixels.
    pub fn anchor(&self) -> (f64, f64) {
        let [xmin, _, xmax, ymax] = self.bbox;
        (0.5 * (xmin + xmax), ymax)
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<AnnotationRecord>, EvalError> {
    let err = |message: String| EvalError::Malformed { line: lineno, message };
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = trimmed.split_whitespace().collect();
    if fields.len() < 10 {
        return Err(err(format!("expected 10 fields, found {}", fields.len())));
    }
    let int = |i: usize, name: &str| fields[i].parse::<u64>().map_err(|_| err(format!("bad {name} `{}`", fields[i])));
    let num = |i: usize, name: &str| {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(format!("bad {name} `{}`", fields[i])))
    };
    let flag = |i: usize, name: &str| match fields[i] {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(err(format!("bad {name} flag `{other}`"))),
    };
    let bbox = [num(1, "xmin")?, num(2, "ymin")?, num(3, "xmax")?, num(4, "ymax")?];
    if bbox[2] < bbox[0] || bbox[3] < bbox[1] {
        return Err(err(format!("inverted box {bbox:?}")));
    }
    let label = fields[9..].join(" ").trim_matches('"').to_string();
    Ok(Some(AnnotationRecord {
        track_id: int(0, "track_id")?,
        bbox,
        frame: int(5, "frame")?,
        lost: flag(6, "lost")?,
        occluded: flag(7, "occluded")?,
        generated: flag(8, "generated")?,
        label,
    }))
}

/// Parses every record; the first malformed line aborts with its line number.
pub fn parse_annotations<R: BufRead>(reader: R) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Malformed { line: i + 1, message: e.to_string() })?;
        if let Some(r) = parse_line(&line, i + 1)? {
            out.push(r);
        }
    }
    Ok(out)
}

type FirstLabel = (u64, Mode);
type Frames = BTreeMap<u64, (f64, f64)>;

/// Groups records into metric trajectories.
///
/// Lost frames are dropped, occluded ones kept. Within a track, gaps of up
/// to [`MAX_GAP_FRAMES`] missing frames are linearly interpolated and longer
/// gaps start a new segment. Segments with fewer than two frames and labels
/// outside [`Mode`] are discarded. A track takes the mode of its earliest
/// kept frame.
pub fn trajectories_from_records(
    records: &[AnnotationRecord],
    source: &str,
    scale: f64,
    fps: f64,
) -> Result<Vec<Trajectory>, EvalError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(EvalError::InvalidParam(format!("scale must be positive, got {scale}")));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(EvalError::InvalidParam(format!("fps must be positive, got {fps}")));
    }
    // mode comes from the earliest kept frame, so record order does not matter
    let mut tracks: BTreeMap<u64, (FirstLabel, Frames)> = BTreeMap::new();
    for r in records {
        let Some(mode) = Mode::from_label(&r.label) else { continue };
        if r.lost {
            continue;
        }
        let entry = tracks.entry(r.track_id).or_insert_with(|| ((r.frame, mode), BTreeMap::new()));
        if r.frame < entry.0 .0 {
            entry.0 = (r.frame, mode);
        }
        let (u, v) = r.anchor();
        entry.1.insert(r.frame, (u * scale, v * scale));
    }

    let dt = 1.0 / fps;
    let mut out = Vec::new();
    for (track, ((_, mode), frames)) in tracks {
        let mut segments: Vec<(u64, Vec<[f64; 2]>)> = Vec::new();
        let mut last: Option<(u64, [f64; 2])> = None;
        for (&frame, &(x, y)) in &frames {
            let p = [x, y];
            match last {
                Some((f0, p0)) if frame - f0 <= MAX_GAP_FRAMES + 1 => {
                    let seg = &mut segments.last_mut().expect("segment open").1;
                    let n = frame - f0;
                    for k in 1..n {
                        let s = k as f64 / n as f64;
                        seg.push([p0[0] + s * (p[0] - p0[0]), p0[1] + s * (p[1] - p0[1])]);
                    }
                    seg.push(p);
                }
                _ => segments.push((frame, vec![p])),
            }
            last = Some((frame, p));
        }
        for (segment, (start, xy)) in segments.into_iter().filter(|(_, xy)| xy.len() >= 2).enumerate() {
            let id = TrackId { source: source.to_string(), track, segment: segment as u32 };
            out.push(Trajectory::sampled(id, mode, start as f64 * dt, dt, &xy));
        }
    }
    Ok(out)
}

/// Reads an annotation file into metric trajectories at `scale` m/px.
pub fn ingest_annotations(path: impl AsRef<Path>, scale: f64, fps: f64) -> Result<Vec<Trajectory>, EvalError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io { path: display.clone(), source })?;
    let records = parse_annotations(std::io::BufReader::new(file))?;
    let source =
        path.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tracks = trajectories_from_records(&records, &source, scale, fps)?;
    if tracks.is_empty() {
        return Err(EvalError::Empty(display));
    }
    Ok(tracks)
}
