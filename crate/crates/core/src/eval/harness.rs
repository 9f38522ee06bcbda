use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{ade, discrete_frechet};
use super::reconstruct::{reconstruct_controls, replay, ReconstructOptions};
use super::sdd::ingest_annotations;
use super::{EvalError, Mode, TrackId, Trajectory};
use crate::config::VehicleConfig;
use crate::engine::csv::format_sig;
use crate::models::ModelRegistry;
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub fps: f64,
    pub reconstruct: ReconstructOptions,
    pub execution: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { fps: 30.0, reconstruct: ReconstructOptions::default(), execution: Execution::default() }
    }
}

/// Pixel-to-meter factor for every source, or per source (video) name.
#[derive(Debug, Clone, PartialEq)]
pub enum Scale {
    Uniform(f64),
    PerSource(BTreeMap<String, f64>),
}

/// Calibration file layout: `[scales]` maps video directory names to m/px,
/// with an optional `default` entry for the others.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct Calibration {
    scales: BTreeMap<String, f64>,
}

impl Scale {
    pub fn from_calibration_file(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
        let c: Calibration =
            toml::from_str(&text).map_err(|e| EvalError::InvalidParam(format!("{}: {e}", path.display())))?;
        if let Some((k, v)) = c.scales.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(EvalError::InvalidParam(format!("scale for `{k}` must be positive, got {v}")));
        }
        Ok(Scale::PerSource(c.scales))
    }

    fn for_source(&self, source: &str) -> Result<f64, EvalError> {
        match self {
            Scale::Uniform(s) => Ok(*s),
            Scale::PerSource(m) => m
                .get(source)
                .or_else(|| m.get("default"))
                .copied()
                .ok_or_else(|| EvalError::InvalidParam(format!("no scale for `{source}` in calibration"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackMetrics {
    pub id: TrackId,
    pub mode: Mode,
    pub points: usize,
    pub path_length: f64,
    pub ade_gm3: f64,
    pub ade_kbm: f64,
    pub dfd_gm3: f64,
    pub dfd_kbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub tracks: usize,
    pub excluded: usize,
    pub ade_gm3: f64,
    pub ade_kbm: f64,
    pub dfd_gm3: f64,
    pub dfd_kbm: f64,
}

/// `(gm3 - kbm) / gm3` in percent, the convention of the published table.
pub fn relative_change(gm3: f64, kbm: f64) -> f64 {
    100.0 * (gm3 - kbm) / gm3
}

impl ModeSummary {
    /// ADE change of GM3 against KBM, percent of the GM3 value.
    pub fn ade_change(&self) -> f64 {
        relative_change(self.ade_gm3, self.ade_kbm)
    }

    pub fn dfd_change(&self) -> f64 {
        relative_change(self.dfd_gm3, self.dfd_kbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Sorted by track id.
    pub per_track: Vec<TrackMetrics>,
    /// Means over tracks, in [`Mode::ALL`] order for modes with any track.
    pub per_mode: Vec<ModeSummary>,
    pub excluded: Vec<(TrackId, Mode, String)>,
    pub options: EvalOptions,
}

fn score(
    track: &Trajectory,
    cfg: &VehicleConfig,
    registry: &ModelRegistry,
    opts: &ReconstructOptions,
) -> Result<TrackMetrics, EvalError> {
    let mut out = [(0.0, 0.0); 2];
    for (slot, model) in out.iter_mut().zip(["gm3", "kbm"]) {
        let script = reconstruct_controls(track, model, cfg, registry, opts)?;
        let est = replay(&script, cfg, registry, track, opts.substeps)?;
        *slot = (ade(&est, track)?, discrete_frechet(&est, track)?);
    }
    Ok(TrackMetrics {
        id: track.id.clone(),
        mode: track.mode,
        points: track.len(),
        path_length: track.path_length(),
        ade_gm3: out[0].0,
        ade_kbm: out[1].0,
        dfd_gm3: out[0].1,
        dfd_kbm: out[1].1,
    })
}

/// Replays and scores every track with the config of its mode.
///
/// Tracks are processed in track-id order and aggregated in that order, so
/// the result does not depend on [`EvalOptions::execution`].
pub fn evaluate_tracks(
    tracks: &[Trajectory],
    configs: &BTreeMap<Mode, VehicleConfig>,
    registry: &ModelRegistry,
    opts: &EvalOptions,
) -> MetricsReport {
    let mut sorted: Vec<&Trajectory> = tracks.iter().filter(|t| configs.contains_key(&t.mode)).collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let results = opts.execution.map(&sorted, |t| score(t, &configs[&t.mode], registry, &opts.reconstruct));

    let mut per_track = Vec::new();
    let mut excluded = Vec::new();
    for (t, r) in sorted.iter().zip(results) {
        match r {
            Ok(m) => per_track.push(m),
            Err(e) => {
                log::info!("track {} excluded: {e}", t.id);
                excluded.push((t.id.clone(), t.mode, e.to_string()));
            }
        }
    }
    let per_mode = Mode::ALL
        .iter()
        .filter_map(|&mode| {
            let rows: Vec<&TrackMetrics> = per_track.iter().filter(|m| m.mode == mode).collect();
            let n_excluded = excluded.iter().filter(|e| e.1 == mode).count();
            if rows.is_empty() && n_excluded == 0 {
                return None;
            }
            let mean = |f: fn(&TrackMetrics) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / rows.len() as f64;
            Some(ModeSummary {
                mode,
                tracks: rows.len(),
                excluded: n_excluded,
                ade_gm3: mean(|m| m.ade_gm3),
                ade_kbm: mean(|m| m.ade_kbm),
                dfd_gm3: mean(|m| m.dfd_gm3),
                dfd_kbm: mean(|m| m.dfd_kbm),
            })
        })
        .collect();
    MetricsReport { per_track, per_mode, excluded, options: opts.clone() }
}

fn annotation_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            annotation_files(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "annotations.txt") {
            out.push(path);
        }
    }
    Ok(())
}

/// Locates the scene's annotation files under `dataset`, which may be the
/// dataset root (`annotations/<scene>/video*/annotations.txt`), the scene
/// directory, or any directory holding `annotations.txt` files.
pub fn find_scene_files(dataset: &Path, scene: &str) -> Result<Vec<PathBuf>, EvalError> {
    let io = |source| EvalError::Io { path: dataset.display().to_string(), source };
    if !dataset.is_dir() {
        return Err(io(std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found")));
    }
    let root = [dataset.join("annotations").join(scene), dataset.join(scene)]
        .into_iter()
        .find(|p| p.is_dir())
        .unwrap_or_else(|| dataset.to_path_buf());
    let mut files = Vec::new();
    annotation_files(&root, &mut files).map_err(io)?;
    files.sort();
    if files.is_empty() {
        return Err(EvalError::Empty(root.display().to_string()));
    }
    Ok(files)
}

/// Ingests the scene, evaluates the requested modes and, with `out`, writes
/// `per_track.csv`, `summary.csv` and `table.txt` there.
pub fn evaluate_modes(
    dataset: &Path,
    scene: &str,
    modes: &[Mode],
    scale: &Scale,
    configs: &BTreeMap<Mode, VehicleConfig>,
    opts: &EvalOptions,
    out: Option<&Path>,
) -> Result<MetricsReport, EvalError> {
    let mut tracks = Vec::new();
    for file in find_scene_files(dataset, scene)? {
        let source =
            file.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match ingest_annotations(&file, scale.for_source(&source)?, opts.fps) {
            Ok(t) => tracks.extend(t.into_iter().filter(|t| modes.contains(&t.mode))),
            Err(EvalError::Empty(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if tracks.is_empty() {
        return Err(EvalError::Empty(dataset.display().to_string()));
    }
    let configs: BTreeMap<Mode, VehicleConfig> =
        configs.iter().filter(|(m, _)| modes.contains(m)).map(|(m, c)| (*m, c.clone())).collect();
    let report = evaluate_tracks(&tracks, &configs, &ModelRegistry::default(), opts);
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(report)
}

fn num(v: f64) -> String {
    format_sig(v, 9)
}

impl MetricsReport {
    pub fn summary(&self, mode: Mode) -> Option<&ModeSummary> {
        self.per_mode.iter().find(|s| s.mode == mode)
    }

    pub fn per_track_csv(&self) -> String {
        let mut s = String::from("track,mode,points,path_length,ade_gm3,ade_kbm,dfd_gm3,dfd_kbm\n");
        for m in &self.per_track {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                m.id,
                m.mode.as_str(),
                m.points,
                num(m.path_length),
                num(m.ade_gm3),
                num(m.ade_kbm),
                num(m.dfd_gm3),
                num(m.dfd_kbm)
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let o = &self.options.reconstruct;
        let mut s = format!(
            "# smoothing_window={} min_median_speed={} substeps={} fps={}\n",
            o.window, o.min_median_speed, o.substeps, self.options.fps
        );
        s.push_str("mode,tracks,excluded,ade_gm3,ade_kbm,ade_change_pct,dfd_gm3,dfd_kbm,dfd_change_pct\n");
        for m in &self.per_mode {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                m.mode.as_str(),
                m.tracks,
                m.excluded,
                num(m.ade_gm3),
                num(m.ade_kbm),
                num(m.ade_change()),
                num(m.dfd_gm3),
                num(m.dfd_kbm),
                num(m.dfd_change())
            );
        }
        s
    }

    /// Plain-text table: mean ADE and DFD per mode, lower value marked `*`.
    pub fn table(&self) -> String {
        let mark = |a: f64, b: f64| if a < b { "*" } else { " " };
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} | {:^21} | {:^21} | {:>6}", "", "ADE (m)", "DFD (m)", "");
        let _ =
            writeln!(s, "{:<8} | {:>10} {:>10} | {:>10} {:>10} | {:>6}", "Mode", "GM3", "KBM", "GM3", "KBM", "tracks");
        let _ = writeln!(s, "{}", "-".repeat(66));
        for m in &self.per_mode {
            let _ = writeln!(
                s,
                "{:<8} | {:>9.3}{} {:>9.3}{} | {:>9.3}{} {:>9.3}{} | {:>6}",
                m.mode.title(),
                m.ade_gm3,
                mark(m.ade_gm3, m.ade_kbm),
                m.ade_kbm,
                mark(m.ade_kbm, m.ade_gm3),
                m.dfd_gm3,
                mark(m.dfd_gm3, m.dfd_kbm),
                m.dfd_kbm,
                mark(m.dfd_kbm, m.dfd_gm3),
                m.tracks
            );
        }
        let excluded = self.excluded.len();
        if excluded > 0 {
            let _ = writeln!(s, "{excluded} track(s) excluded");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        let io = |source| EvalError::Io { path: dir.display().to_string(), source };
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("per_track.csv"), self.per_track_csv()).map_err(io)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv()).map_err(io)?;
        std::fs::write(dir.join("table.txt"), self.table()).map_err(io)?;
        Ok(())
    }
}

/// Bundled per-mode configs.
pub fn default_configs() -> BTreeMap<Mode, VehicleConfig> {
    Mode::ALL.iter().map(|&m| (m, VehicleConfig::builtin(m.vehicle_id()).expect("bundled config"))).collect()
}
