//! Boat trajectories: analytic presets for the four-boat scenario and
//! piecewise-linear waypoint paths loaded from CSV.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::geom::{Rect, Vec2};
use crate::types::BoatId;
use crate::Real;

#[derive(Debug, Error)]
pub enum BoatError {
    #[error("EmptyPath: boat {0} has no waypoints")]
    EmptyPath(BoatId),
    #[error("boat {boat}: waypoint times must be strictly increasing (at t={time})")]
    NonIncreasingTime { boat: BoatId, time: f64 },
    #[error("boat {boat}: non-finite waypoint at t={time}")]
    NonFinite { boat: BoatId, time: f64 },
    #[error("unknown boat preset `{0}`")]
    UnknownPreset(String),
    #[error("boat CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("boat file: {0}")]
    Io(#[from] std::io::Error),
}

/// Closed-form boat trajectories. `horizon` is the run length `N * dt` in hours.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticPath<T> {
    /// `[5 cos(x_rate t) + 3, 5 sin(y_rate t) + 2]`.
    Red { x_rate: T, y_rate: T },
    /// `[1 + 5 t/H, 18 - 2 t/H]`.
    Blue { horizon: T },
    /// `[1 + 5 t/H, 18 - 10 t/H]`.
    Purple { horizon: T },
    /// `[-4 + 10 t/H, 10 + 2 t/H]`.
    Yellow { horizon: T },
    /// `origin + velocity * t`.
    Linear { origin: Vec2<T>, velocity: Vec2<T> },
}

impl<T: Real> AnalyticPath<T> {
    /// Red boat with its two angular rates `pi/(10 H)` and `pi/(2 H)`.
    pub fn red(horizon: T) -> Self {
        Self::Red { x_rate: T::PI() / (T::lit(10.0) * horizon), y_rate: T::PI() / (T::lit(2.0) * horizon) }
    }

    pub fn eval(&self, t: T) -> Vec2<T> {
        let l = T::lit;
        match *self {
            Self::Red { x_rate, y_rate } => {
                Vec2::new(l(5.0) * (x_rate * t).cos() + l(3.0), l(5.0) * (y_rate * t).sin() + l(2.0))
            }
            Self::Blue { horizon: h } => Vec2::new(l(1.0) + l(5.0) * t / h, l(18.0) - l(2.0) * t / h),
            Self::Purple { horizon: h } => Vec2::new(l(1.0) + l(5.0) * t / h, l(18.0) - l(10.0) * t / h),
            Self::Yellow { horizon: h } => Vec2::new(l(-4.0) + l(10.0) * t / h, l(10.0) + l(2.0) * t / h),
            Self::Linear { origin, velocity } => origin + velocity * t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathKind<T> {
    Analytic(AnalyticPath<T>),
    /// `(time, position)` pairs with strictly increasing time.
    Waypoints(Vec<(T, Vec2<T>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoatPath<T> {
    pub boat_id: BoatId,
    pub kind: PathKind<T>,
}

/// A boat position together with whether the query time had to be clamped
/// into the waypoint range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample<T> {
    pub pos: Vec2<T>,
    pub clamped: bool,
}

impl<T: Real> BoatPath<T> {
    pub fn analytic(boat_id: BoatId, path: AnalyticPath<T>) -> Self {
        Self { boat_id, kind: PathKind::Analytic(path) }
    }

    pub fn waypoints(boat_id: BoatId, points: Vec<(T, Vec2<T>)>) -> Result<Self, BoatError> {
        if points.is_empty() {
            return Err(BoatError::EmptyPath(boat_id));
        }
        for (t, p) in &points {
            if !t.is_finite() || !p.is_finite() {
                return Err(BoatError::NonFinite { boat: boat_id, time: t.as_f64() });
            }
        }
        if let Some(w) = points.windows(2).find(|w| !(w[0].0 < w[1].0)) {
            return Err(BoatError::NonIncreasingTime { boat: boat_id, time: w[1].0.as_f64() });
        }
        Ok(Self { boat_id, kind: PathKind::Waypoints(points) })
    }

    /// Named preset: `paper_red`, `paper_blue`, `paper_purple`, `paper_yellow`.
    pub fn preset(name: &str, boat_id: BoatId, horizon: T) -> Result<Self, BoatError> {
        let path = match name {
            "paper_red" => AnalyticPath::red(horizon),
            "paper_blue" => AnalyticPath::Blue { horizon },
            "paper_purple" => AnalyticPath::Purple { horizon },
            "paper_yellow" => AnalyticPath::Yellow { horizon },
            _ => return Err(BoatError::UnknownPreset(name.to_string())),
        };
        Ok(Self::analytic(boat_id, path))
    }

    /// The four scenario boats, ids 0..4 in the order red, blue, purple, yellow.
    pub fn paper_fleet(horizon: T) -> Vec<Self> {
        ["paper_red", "paper_blue", "paper_purple", "paper_yellow"]
            .iter()
            .enumerate()
            .map(|(i, name)| Self::preset(name, i as BoatId, horizon).expect("known preset"))
            .collect()
    }

    pub fn sample(&self, t: T) -> Result<PositionSample<T>, BoatError> {
        match &self.kind {
            PathKind::Analytic(a) => Ok(PositionSample { pos: a.eval(t), clamped: false }),
            PathKind::Waypoints(pts) => {
                let (first, last) = match (pts.first(), pts.last()) {
                    (Some(f), Some(l)) => (f, l),
                    _ => return Err(BoatError::EmptyPath(self.boat_id)),
                };
                if t <= first.0 {
                    return Ok(PositionSample { pos: first.1, clamped: t < first.0 });
                }
                if t >= last.0 {
                    return Ok(PositionSample { pos: last.1, clamped: t > last.0 });
                }
                let i = pts.partition_point(|(wt, _)| *wt <= t) - 1;
                let (t0, p0) = pts[i];
                let (t1, p1) = pts[i + 1];
                let w = (t - t0) / (t1 - t0);
                Ok(PositionSample { pos: p0 + (p1 - p0) * w, clamped: false })
            }
        }
    }
}

/// Position of `path` at time `t` hours. Waypoint paths clamp to their endpoints.
pub fn boat_position<T: Real>(path: &BoatPath<T>, t: T) -> Result<Vec2<T>, BoatError> {
    path.sample(t).map(|s| s.pos)
}

/// Bisection tolerance for [`entry_time`], hours.
pub const ENTRY_TOLERANCE: f64 = 1e-6;

/// Earliest time in `[0, horizon]` at which the boat is inside `window`.
///
/// The path is scanned at `dt / 10` and the first outside-to-inside crossing
/// is refined by bisection to [`ENTRY_TOLERANCE`]. The returned time is the
/// inside end of the final bracket.
pub fn entry_time<T: Real>(path: &BoatPath<T>, window: &Rect<T>, horizon: T, dt: T) -> Option<T> {
    let inside = |t: T| path.sample(t).map(|s| window.contains(s.pos)).unwrap_or(false);
    if inside(T::zero()) {
        return Some(T::zero());
    }
    let step = dt / T::lit(10.0);
    let n_steps = (horizon / step).ceil().to_usize()?;
    let mut prev = T::zero();
    for k in 1..=n_steps {
        let t = (T::lit(k as f64) * step).min(horizon);
        if inside(t) {
            let (mut lo, mut hi) = (prev, t);
            let tol = T::lit(ENTRY_TOLERANCE);
            while hi - lo > tol {
                let mid = lo + (hi - lo) / T::lit(2.0);
                if inside(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

/// Reads waypoint CSV with header `boat_id,time_hours,x,y`; rows of a boat
/// may be interleaved with other boats but must be in time order.
pub fn load_waypoints<T: Real, R: Read>(reader: R) -> Result<Vec<BoatPath<T>>, BoatError> {
    #[derive(Deserialize)]
    struct Row {
        boat_id: BoatId,
        time_hours: f64,
        x: f64,
        y: f64,
    }

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_boat: BTreeMap<BoatId, Vec<(T, Vec2<T>)>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let r: Row = row?;
        by_boat.entry(r.boat_id).or_default().push((T::lit(r.time_hours), Vec2::new(T::lit(r.x), T::lit(r.y))));
    }
    by_boat.into_iter().map(|(id, pts)| BoatPath::waypoints(id, pts)).collect()
}

pub fn load_waypoints_path<T: Real>(path: &Path) -> Result<Vec<BoatPath<T>>, BoatError> {
    load_waypoints(std::fs::File::open(path)?)
}
