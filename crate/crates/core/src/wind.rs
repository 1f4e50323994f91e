//! Drift velocity fields.
//!
//! Velocities are in position units per hour. Three kinds are supported: a
//! constant vector, a rigidly rotating vortex about a drifting center, and a
//! regular `(t, y, x)` lattice read from CSV and interpolated bilinearly in
//! space and linearly in time.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::geom::Vec2;
use crate::Real;

#[derive(Debug, Error)]
pub enum WindError {
    #[error("OutOfDomain: query ({x}, {y}) at t={t} lies outside the gridded wind field")]
    OutOfDomain { x: f64, y: f64, t: f64 },
    #[error("wind grid is not a complete regular lattice: {0}")]
    IncompleteLattice(String),
    #[error("wind grid has a non-finite velocity at t={t}, x={x}, y={y}")]
    NonFinite { t: f64, x: f64, y: f64 },
    #[error("wind grid is empty")]
    Empty,
    #[error("unknown wind preset `{0}`")]
    UnknownPreset(String),
    #[error("wind CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("wind file: {0}")]
    Io(#[from] std::io::Error),
}

/// Solid-body rotation about a center moving at constant velocity.
///
/// Speed grows linearly with the distance `r` from the center:
/// `|v| = angular_rate * r`, directed tangentially.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularWind<T> {
    /// Radians per hour.
    pub angular_rate: T,
    pub center_at_zero: Vec2<T>,
    pub center_velocity: Vec2<T>,
    pub clockwise: bool,
}

impl<T: Real> CircularWind<T> {
    /// The four-boat scenario vortex: speed `10 pi / (4 N dt) * r` about the
    /// center `(0.2 t, -0.1 t)`, counterclockwise.
    pub fn paper(n_frames: usize, dt: T) -> Self {
        let horizon = T::lit(n_frames as f64) * dt;
        Self {
            angular_rate: T::lit(10.0) * T::PI() / (T::lit(4.0) * horizon),
            center_at_zero: Vec2::zero(),
            center_velocity: Vec2::new(T::lit(0.2), T::lit(-0.1)),
            clockwise: false,
        }
    }

    pub fn center(&self, t: T) -> Vec2<T> {
        self.center_at_zero + self.center_velocity * t
    }

    pub fn eval(&self, pos: Vec2<T>, t: T) -> Vec2<T> {
        let tangent = (pos - self.center(t)).perp() * self.angular_rate;
        if self.clockwise {
            -tangent
        } else {
            tangent
        }
    }
}

/// Velocities on a full regular lattice over `(t, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField<T> {
    ts: Vec<T>,
    xs: Vec<T>,
    ys: Vec<T>,
    /// Index `(it * ys.len() + iy) * xs.len() + ix`.
    values: Vec<Vec2<T>>,
    /// Clamp out-of-hull queries to the boundary instead of failing.
    pub clamp: bool,
}

impl<T: Real> GriddedField<T> {
    /// Builds a field from axis coordinates and node velocities in
    /// `(t, y, x)` row-major order.
    pub fn new(ts: Vec<T>, xs: Vec<T>, ys: Vec<T>, values: Vec<Vec2<T>>) -> Result<Self, WindError> {
        if ts.is_empty() || xs.is_empty() || ys.is_empty() {
            return Err(WindError::Empty);
        }
        for (name, axis) in [("t", &ts), ("x", &xs), ("y", &ys)] {
            if axis.windows(2).any(|w| !(w[0] < w[1])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(WindError::IncompleteLattice(format!("{name} axis is not strictly increasing")));
            }
        }
        let expected = ts.len() * xs.len() * ys.len();
        if values.len() != expected {
            return Err(WindError::IncompleteLattice(format!("expected {expected} nodes, got {}", values.len())));
        }
        let field = Self { ts, xs, ys, values, clamp: true };
        for it in 0..field.ts.len() {
            for iy in 0..field.ys.len() {
                for ix in 0..field.xs.len() {
                    if !field.node(it, iy, ix).is_finite() {
                        return Err(WindError::NonFinite {
                            t: field.ts[it].as_f64(),
                            x: field.xs[ix].as_f64(),
                            y: field.ys[iy].as_f64(),
                        });
                    }
                }
            }
        }
        Ok(field)
    }

    /// Reads CSV with header `t_hours,x,y,u,v`. Every `(t, x, y)` combination
    /// of the distinct coordinates must appear exactly once.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, WindError> {
        #[derive(Deserialize)]
        struct Row {
            t_hours: f64,
            x: f64,
            y: f64,
            u: f64,
            v: f64,
        }

        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let wanted = ["t_hours", "x", "y", "u", "v"];
        if header.iter().collect::<Vec<_>>() != wanted {
            return Err(WindError::IncompleteLattice(format!(
                "header must be `t_hours,x,y,u,v`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut nodes: BTreeMap<(Key, Key, Key), (f64, f64)> = BTreeMap::new();
        for row in rdr.deserialize() {
            let r: Row = row?;
            if ![r.t_hours, r.x, r.y].iter().all(|v| v.is_finite()) {
                return Err(WindError::IncompleteLattice("non-finite coordinate".into()));
            }
            if nodes.insert((Key(r.t_hours), Key(r.y), Key(r.x)), (r.u, r.v)).is_some() {
                return Err(WindError::IncompleteLattice(format!(
                    "duplicate node t={}, x={}, y={}",
                    r.t_hours, r.x, r.y
                )));
            }
        }
        if nodes.is_empty() {
            return Err(WindError::Empty);
        }

        let axis = |f: fn(&(Key, Key, Key)) -> f64| {
            let mut a: Vec<f64> = nodes.keys().map(f).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        };
        let ts = axis(|k| k.0 .0);
        let ys = axis(|k| k.1 .0);
        let xs = axis(|k| k.2 .0);

        let mut values = Vec::with_capacity(ts.len() * ys.len() * xs.len());
        for &t in &ts {
            for &y in &ys {
                for &x in &xs {
                    let (u, v) = nodes
                        .get(&(Key(t), Key(y), Key(x)))
                        .ok_or_else(|| WindError::IncompleteLattice(format!("missing node t={t}, x={x}, y={y}")))?;
                    values.push(Vec2::new(T::lit(*u), T::lit(*v)));
                }
            }
        }
        let conv = |a: Vec<f64>| a.into_iter().map(T::lit).collect();
        Self::new(conv(ts), conv(xs), conv(ys), values)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, WindError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    fn node(&self, it: usize, iy: usize, ix: usize) -> Vec2<T> {
        self.values[(it * self.ys.len() + iy) * self.xs.len() + ix]
    }

    /// Bracketing indices and weight of the upper node; `None` if outside.
    fn locate(axis: &[T], q: T, clamp: bool) -> Option<(usize, usize, T)> {
        let n = axis.len();
        if n == 1 {
            return if clamp || q == axis[0] { Some((0, 0, T::zero())) } else { None };
        }
        if q < axis[0] || q > axis[n - 1] {
            if !clamp {
                return None;
            }
            return Some(if q < axis[0] { (0, 0, T::zero()) } else { (n - 1, n - 1, T::zero()) });
        }
        // last index with axis[i] <= q, capped so i + 1 is valid
        let i = axis.partition_point(|&a| a <= q).saturating_sub(1).min(n - 2);
        let w = (q - axis[i]) / (axis[i + 1] - axis[i]);
        Some((i, i + 1, w))
    }

    pub fn eval(&self, pos: Vec2<T>, t: T) -> Result<Vec2<T>, WindError> {
        let out = || WindError::OutOfDomain { x: pos.x.as_f64(), y: pos.y.as_f64(), t: t.as_f64() };
        let (t0, t1, wt) = Self::locate(&self.ts, t, self.clamp).ok_or_else(out)?;
        let (x0, x1, wx) = Self::locate(&self.xs, pos.x, self.clamp).ok_or_else(out)?;
        let (y0, y1, wy) = Self::locate(&self.ys, pos.y, self.clamp).ok_or_else(out)?;
        let one = T::one();
        let plane = |it| {
            let bottom = self.node(it, y0, x0) * (one - wx) + self.node(it, y0, x1) * wx;
            let top = self.node(it, y1, x0) * (one - wx) + self.node(it, y1, x1) * wx;
            bottom * (one - wy) + top * wy
        };
        Ok(plane(t0) * (one - wt) + plane(t1) * wt)
    }
}

/// Total-order wrapper so CSV coordinates can key a map.
#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The drift function `mu(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum WindField<T> {
    Uniform(Vec2<T>),
    Circular(CircularWind<T>),
    Gridded(GriddedField<T>),
}

impl<T: Real> WindField<T> {
    /// Looks up a named analytic preset.
    pub fn preset(name: &str, n_frames: usize, dt: T) -> Result<Self, WindError> {
        match name {
            "paper_circular" => Ok(Self::Circular(CircularWind::paper(n_frames, dt))),
            "paper_circular_cw" => {
                let mut w = CircularWind::paper(n_frames, dt);
                w.clockwise = true;
                Ok(Self::Circular(w))
            }
            "calm" => Ok(Self::Uniform(Vec2::zero())),
            _ => Err(WindError::UnknownPreset(name.to_string())),
        }
    }
}

/// Velocity at `pos` and time `t` (hours).
pub fn eval_wind<T: Real>(field: &WindField<T>, pos: Vec2<T>, t: T) -> Result<Vec2<T>, WindError> {
    match field {
        WindField::Uniform(v) => Ok(*v),
        WindField::Circular(c) => Ok(c.eval(pos, t)),
        WindField::Gridded(g) => g.eval(pos, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> GriddedField<f64> {
        // u = x + 10 y + 100 t, v = -u
        let ts = vec![0.0, 1.0];
        let xs = vec![0.0, 1.0, 3.0];
        let ys = vec![0.0, 2.0];
        let mut values = Vec::new();
        for &t in &ts {
            for &y in &ys {
                for &x in &xs {
                    let u = x + 10.0 * y + 100.0 * t;
                    values.push(Vec2::new(u, -u));
                }
            }
        }
        GriddedField::new(ts, xs, ys, values).unwrap()
    }

    #[test]
    fn uniform_is_constant() {
        let w = WindField::Uniform(Vec2::new(1.0, 2.0));
        assert_eq!(eval_wind(&w, Vec2::new(-7.0, 3.0), 11.0).unwrap(), Vec2::new(1.0, 2.0));
    }

    #[test]
    fn paper_circular_at_unit_radius() {
        let w = WindField::preset("paper_circular", 100, 0.2).unwrap();
        let v = eval_wind(&w, Vec2::new(1.0, 0.0), 0.0).unwrap();
        let speed = 10.0 * std::f64::consts::PI / 80.0;
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, speed, epsilon = 1e-15);
        assert_abs_diff_eq!(speed, std::f64::consts::FRAC_PI_8, epsilon = 1e-12);
    }

    #[test]
    fn paper_circular_center_drifts() {
        let c = CircularWind::<f64>::paper(100, 0.2);
        let v = c.eval(Vec2::new(2.0, -1.0), 10.0);
        assert_eq!(v, Vec2::zero());
        let cw = WindField::preset("paper_circular_cw", 100, 0.2).unwrap();
        let v = eval_wind(&cw, Vec2::new(1.0, 0.0), 0.0).unwrap();
        assert!(v.y < 0.0);
    }

    #[test]
    fn gridded_nodes_are_exact() {
        let g = grid();
        assert_eq!(g.eval(Vec2::new(3.0, 2.0), 1.0).unwrap(), Vec2::new(123.0, -123.0));
        assert_eq!(g.eval(Vec2::new(1.0, 0.0), 0.0).unwrap(), Vec2::new(1.0, -1.0));
    }

    #[test]
    fn gridded_is_linear_between_nodes() {
        let g = grid();
        let v = g.eval(Vec2::new(2.0, 1.0), 0.5).unwrap();
        assert_abs_diff_eq!(v.x, 2.0 + 10.0 + 50.0, epsilon = 1e-12);
    }

    #[test]
    fn gridded_out_of_hull() {
        let mut g = grid();
        assert_eq!(g.eval(Vec2::new(10.0, -5.0), 0.0).unwrap(), Vec2::new(3.0, -3.0));
        g.clamp = false;
        assert!(matches!(g.eval(Vec2::new(10.0, 0.0), 0.0), Err(WindError::OutOfDomain { .. })));
        assert!(matches!(g.eval(Vec2::new(1.0, 1.0), 2.0), Err(WindError::OutOfDomain { .. })));
    }

    #[test]
    fn csv_loader_rebuilds_lattice() {
        let mut text = String::from("t_hours,x,y,u,v\n");
        // deliberately unsorted
        for (t, x, y) in [(1.0, 1.0, 0.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)] {
            text.push_str(&format!("{t},{x},{y},{},{}\n", x + t, -x));
        }
        let g = GriddedField::<f64>::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(g.eval(Vec2::new(1.0, 0.0), 1.0).unwrap(), Vec2::new(2.0, -1.0));
        assert_eq!(g.eval(Vec2::new(0.5, 0.0), 0.5).unwrap(), Vec2::new(1.0, -0.5));
    }

    #[test]
    fn csv_loader_rejects_holes() {
        let text = "t_hours,x,y,u,v\n0,0,0,1,1\n0,1,0,1,1\n0,0,1,1,1\n";
        let err = GriddedField::<f64>::from_csv_reader(text.as_bytes()).unwrap_err();
        assert!(matches!(err, WindError::IncompleteLattice(_)), "{err}");
    }

    #[test]
    fn csv_loader_rejects_bad_header() {
        let text = "t,x,y,u,v\n0,0,0,1,1\n";
        assert!(GriddedField::<f64>::from_csv_reader(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_is_a_convex_combination(
            x in 0.0f64..3.0, y in 0.0f64..2.0, t in 0.0f64..1.0,
        ) {
            let g = grid();
            let v = g.eval(Vec2::new(x, y), t).unwrap();
            let (lo, hi) = g.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
                (lo.min(n.x), hi.max(n.x))
            });
            prop_assert!(v.x >= lo - 1e-12 && v.x <= hi + 1e-12);
            // the test field is affine, which bilinear-linear interpolation reproduces
            prop_assert!((v.x - (x + 10.0 * y + 100.0 * t)).abs() < 1e-9);
            prop_assert_eq!(g.eval(Vec2::new(x, y), t).unwrap(), v);
        }
    }
}
