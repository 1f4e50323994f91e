//! Metrics over a finished run directory.
//!
//! The cross-track spread of a track is measured at the last frame: a
//! total-least-squares line is fitted through the track's packets, each
//! packet's squared perpendicular residual is paired with its age, and the
//! pairs are binned by age and regressed (ordinary least squares) on age.
//! For a straight track in a uniform wind the slope estimates `sigma_x^2`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::output::{RunManifest, EVENTS_FILE, MANIFEST_FILE, POINTS_FILE};
use crate::types::{BoatId, PacketId, TrackId};

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("MissingLog: {0} not found")]
    MissingLog(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
}

fn open(path: &Path) -> Result<File, SummaryError> {
    File::open(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => SummaryError::MissingLog(path.to_path_buf()),
        _ => SummaryError::Io { path: path.to_path_buf(), source },
    })
}

fn malformed(path: &Path, msg: impl fmt::Display) -> SummaryError {
    SummaryError::Malformed { path: path.to_path_buf(), msg: msg.to_string() }
}

/// Squared perpendicular distance of each point from the total-least-squares
/// line through all of them, paired with the point's age. Needs at least
/// three points.
pub fn cross_track_residuals(points: &[(f64, Vec2<f64>)]) -> Vec<(f64, f64)> {
    if points.len() < 3 {
        return Vec::new();
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vec2::zero(), |acc, (_, p)| acc + *p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (_, p) in points {
        let d = *p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // direction of the principal axis of the scatter matrix
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let normal = Vec2::new(-theta.sin(), theta.cos());
    points.iter().map(|(age, p)| (*age, normal.dot(*p - c).powi(2))).collect()
}

/// Ordinary least-squares `(slope, intercept)` of `y` on `x`.
pub fn ols(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeBin {
    pub age_min: f64,
    pub age_max: f64,
    pub count: usize,
    /// Mean squared cross-track residual, the bin's variance estimate.
    pub variance: f64,
}

/// Groups `(age, r^2)` pairs into bins of `width` hours starting at age 0.
pub fn age_bins(pairs: &[(f64, f64)], width: f64) -> Vec<AgeBin> {
    let mut bins: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for &(age, r2) in pairs {
        let k = (age / width + 1e-9).floor().max(0.0) as u64;
        let e = bins.entry(k).or_default();
        e.0 += 1;
        e.1 += r2;
    }
    bins.into_iter()
        .map(|(k, (count, sum))| AgeBin {
            age_min: k as f64 * width,
            age_max: (k + 1) as f64 * width,
            count,
            variance: sum / count as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameCounts {
    pub frame: usize,
    pub t_hours: f64,
    pub packets: usize,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackSpread {
    pub track_id: TrackId,
    pub boat_id: BoatId,
    /// Live packets at the last frame.
    pub packets: usize,
    pub bins: Vec<AgeBin>,
    /// Fitted variance growth per hour, absent with fewer than three packets.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LifetimeStats {
    /// Packet lifetimes (death minus birth time) of every packet that died.
    Observed { count: usize, mean: f64 },
    /// No packet died before the horizon.
    Censored,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxIntensity {
    Value(f64),
    Error(String),
}

/// Everything `summarize` reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n_frames: usize,
    pub seed: u64,
    pub frames: Vec<FrameCounts>,
    pub tracks: usize,
    pub age_bin_hours: f64,
    pub track_spread: Vec<TrackSpread>,
    pub lifetimes: LifetimeStats,
    pub max_intensity: MaxIntensity,
}

#[derive(Debug, Deserialize)]
struct PointRow {
    frame: usize,
    t_hours: f64,
    kind: String,
    track_id: TrackId,
    packet_id: PacketId,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct EventRow {
    event: String,
    packet: PacketId,
    birth_time: Option<f64>,
    death_time: Option<f64>,
}

/// Default age-bin width in hours.
pub const AGE_BIN_HOURS: f64 = 1.0;

/// Reads a run directory and computes its [`Summary`].
pub fn summarize(dir: &Path) -> Result<Summary, SummaryError> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: RunManifest =
        serde_json::from_reader(BufReader::new(open(&path)?)).map_err(|e| malformed(&path, e))?;

    let path = dir.join(EVENTS_FILE);
    let mut birth_times: HashMap<PacketId, f64> = HashMap::new();
    let mut lifetimes = Vec::new();
    for (i, line) in BufReader::new(open(&path)?).lines().enumerate() {
        let line = line.map_err(|source| SummaryError::Io { path: path.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let e: EventRow =
            serde_json::from_str(&line).map_err(|err| malformed(&path, format!("line {}: {err}", i + 1)))?;
        match (e.event.as_str(), e.birth_time, e.death_time) {
            ("birth" | "spawn", Some(b), _) => {
                birth_times.insert(e.packet, b);
            }
            ("death", Some(b), Some(d)) => lifetimes.push(d - b),
            _ => {}
        }
    }

    let path = dir.join(POINTS_FILE);
    let mut counts: Vec<FrameCounts> = (0..manifest.n_frames)
        .map(|frame| FrameCounts { frame, t_hours: frame as f64 * manifest.dt, packets: 0, observations: 0 })
        .collect();
    let last = manifest.n_frames.saturating_sub(1);
    let mut last_points: BTreeMap<TrackId, Vec<(f64, Vec2<f64>)>> = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(open(&path)?);
    for row in reader.deserialize() {
        let row: PointRow = row.map_err(|e| malformed(&path, e))?;
        let c =
            counts.get_mut(row.frame).ok_or_else(|| malformed(&path, format!("frame {} out of range", row.frame)))?;
        match row.kind.as_str() {
            "state" => {
                c.packets += 1;
                if row.frame == last {
                    let birth = birth_times
                        .get(&row.packet_id)
                        .ok_or_else(|| malformed(&path, format!("packet {} has no creation event", row.packet_id)))?;
                    last_points.entry(row.track_id).or_default().push((row.t_hours - birth, Vec2::new(row.x, row.y)));
                }
            }
            "obs" => c.observations += 1,
            other => return Err(malformed(&path, format!("unknown kind `{other}`"))),
        }
    }

    let track_spread = manifest
        .tracks
        .iter()
        .map(|t| {
            let pts = last_points.get(&t.track_id).map(Vec::as_slice).unwrap_or(&[]);
            let pairs = cross_track_residuals(pts);
            let fit = ols(&pairs);
            TrackSpread {
                track_id: t.track_id,
                boat_id: t.boat_id,
                packets: pts.len(),
                bins: age_bins(&pairs, AGE_BIN_HOURS),
                slope: fit.map(|f| f.0),
                intercept: fit.map(|f| f.1),
            }
        })
        .collect();

    let lifetimes = if lifetimes.is_empty() {
        LifetimeStats::Censored
    } else {
        LifetimeStats::Observed { count: lifetimes.len(), mean: lifetimes.iter().sum::<f64>() / lifetimes.len() as f64 }
    };
    let max_intensity = if manifest.max_intensity > 0.0 {
        MaxIntensity::Value(manifest.max_intensity)
    } else {
        MaxIntensity::Error("AllZeroVideo".into())
    };

    Ok(Summary {
        n_frames: manifest.n_frames,
        seed: manifest.seed,
        frames: counts,
        tracks: manifest.tracks.len(),
        age_bin_hours: AGE_BIN_HOURS,
        track_spread,
        lifetimes,
        max_intensity,
    })
}

/// Writes `summary.json` into the run directory.
pub fn write_summary_json(dir: &Path, summary: &Summary) -> Result<PathBuf, SummaryError> {
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| malformed(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|source| SummaryError::Io { path: path.clone(), source })?;
    Ok(path)
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "frames: {}  seed: {}  tracks: {}", self.n_frames, self.seed, self.tracks)?;
        writeln!(s, "\nframe  t_hours  packets  observations")?;
        for c in &self.frames {
            writeln!(s, "{:5}  {:7.2}  {:7}  {:12}", c.frame, c.t_hours, c.packets, c.observations)?;
        }
        writeln!(s, "\ncross-track variance at the last frame (age bins of {} h)", self.age_bin_hours)?;
        for t in &self.track_spread {
            match t.slope {
                Some(slope) => writeln!(
                    s,
                    "track {} (boat {}): {} packets, slope {:.6e} per hour",
                    t.track_id, t.boat_id, t.packets, slope
                )?,
                None => {
                    writeln!(s, "track {} (boat {}): {} packets, too few to fit", t.track_id, t.boat_id, t.packets)?
                }
            }
            for b in &t.bins {
                writeln!(
                    s,
                    "  age [{:6.2}, {:6.2}) n={:4} variance {:.6e}",
                    b.age_min, b.age_max, b.count, b.variance
                )?;
            }
        }
        match &self.lifetimes {
            LifetimeStats::Observed { count, mean } => {
                writeln!(s, "\npacket lifetimes: {count} deaths, mean {mean:.6} h")?
            }
            LifetimeStats::Censored => writeln!(s, "\npacket lifetimes: censored (no deaths before the horizon)")?,
        }
        match &self.max_intensity {
            MaxIntensity::Value(v) => write!(s, "max intensity: {v}")?,
            MaxIntensity::Error(e) => write!(s, "max intensity: error {e}")?,
        }
        f.write_str(&s)
    }
}
