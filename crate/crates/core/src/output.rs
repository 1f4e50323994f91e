//! Run directories.
//!
//! A run directory holds:
//!
//! - `frame_0000.pgm` ... one normalized 16-bit frame per step (optional)
//! - `events.jsonl`: the event log, one JSON object per line
//! - `points.csv`: `frame,t_hours,kind,track_id,packet_id,x,y` rows for every
//!   live packet (`state`) and every observation (`obs`)
//! - `run.json`: the [`RunManifest`]

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Scene, SimulationResult};
use crate::render::{write_pgm_file, RenderError};
use crate::types::{BoatId, Track};
use crate::Real;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const POINTS_FILE: &str = "points.csv";
pub const MANIFEST_FILE: &str = "run.json";

/// File name of frame `n`.
pub fn frame_file_name(n: usize) -> String {
    format!("frame_{n:04}.pgm")
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("points.csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Render(#[from] RenderError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    /// Write the PGM frames.
    pub frames: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { frames: true }
    }
}

/// When a boat's emissions became visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoatEntry {
    pub boat_id: BoatId,
    /// First time the boat is inside the window, if ever.
    pub entry_time: Option<f64>,
    /// Frame of the boat's spontaneous birth, if within the run.
    pub first_emission_frame: Option<usize>,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// The simulation config; infinite thresholds appear as `null`.
    pub config: serde_json::Value,
    pub n_frames: usize,
    pub dt: f64,
    pub sigma_x: f64,
    pub seed: u64,
    /// Largest raw pixel over the video; zero when nothing was drawn.
    pub max_intensity: f64,
    pub frames_written: bool,
    pub tracks: Vec<Track<f64>>,
    pub boats: Vec<BoatEntry>,
}

impl RunManifest {
    pub fn new<T: Real>(
        scene: &Scene<T>,
        result: &SimulationResult<T>,
        frames_written: bool,
    ) -> Result<Self, OutputError> {
        let cfg = &scene.cfg;
        let tracks = result
            .states
            .last()
            .map(|s| {
                s.tracks
                    .values()
                    .map(|t| Track {
                        track_id: t.track_id,
                        boat_id: t.boat_id,
                        lifetime: t.lifetime.as_f64(),
                        origin_time: t.origin_time.as_f64(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let boats = scene
            .fleet
            .boats()
            .map(|b| BoatEntry {
                boat_id: b.boat_id,
                entry_time: scene.fleet.entry_time(b.boat_id).map(Real::as_f64),
                first_emission_frame: scene.fleet.first_emission_frame(b.boat_id),
            })
            .collect();
        Ok(Self {
            config: serde_json::to_value(&**cfg)?,
            n_frames: cfg.n_frames,
            dt: cfg.dt.as_f64(),
            sigma_x: cfg.sigma_x.as_f64(),
            seed: cfg.seed,
            max_intensity: result.max_intensity.as_f64(),
            frames_written,
            tracks,
            boats,
        })
    }
}

/// Writes the event log as JSON lines.
pub fn write_events<T: Real, W: Write>(result: &SimulationResult<T>, out: W) -> Result<(), OutputError> {
    let mut out = BufWriter::new(out);
    for e in &result.events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").map_err(io_err(Path::new(EVENTS_FILE)))?;
    }
    out.flush().map_err(io_err(Path::new(EVENTS_FILE)))?;
    Ok(())
}

/// Writes the state and observation dump.
pub fn write_points<T: Real, W: Write>(result: &SimulationResult<T>, out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "t_hours", "kind", "track_id", "packet_id", "x", "y"])?;
    for (state, obs) in result.states.iter().zip(&result.observations) {
        let frame = state.frame.to_string();
        let t = state.frame_time.to_string();
        for p in &state.packets {
            w.write_record([
                &frame,
                &t,
                "state",
                &p.track_id.to_string(),
                &p.id.to_string(),
                &p.pos.x.to_string(),
                &p.pos.y.to_string(),
            ])?;
        }
        for o in &obs.observations {
            let track = state.packet(o.source_packet_id).map_or(0, |p| p.track_id);
            w.write_record([
                &frame,
                &t,
                "obs",
                &track.to_string(),
                &o.source_packet_id.to_string(),
                &o.pos.x.to_string(),
                &o.pos.y.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(Path::new(POINTS_FILE)))?;
    Ok(())
}

/// Writes a complete run directory, creating it if needed.
///
/// Logs and the manifest are written first, so a blank video still leaves a
/// summarizable directory behind before [`RenderError::AllZeroVideo`] is
/// returned.
pub fn write_run_dir<T: Real>(
    scene: &Scene<T>,
    result: &SimulationResult<T>,
    dir: &Path,
    opts: OutputOptions,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(EVENTS_FILE);
    write_events(result, File::create(&path).map_err(io_err(&path))?)?;

    let path = dir.join(POINTS_FILE);
    write_points(result, File::create(&path).map_err(io_err(&path))?)?;

    let path = dir.join(MANIFEST_FILE);
    let manifest = RunManifest::new(scene, result, opts.frames)?;
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;

    if opts.frames {
        for n in 0..result.frames.len() {
            let frame = result.normalized_frame(n)?;
            let path = dir.join(frame_file_name(n));
            write_pgm_file(&frame, &path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}
