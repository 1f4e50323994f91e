//! Rasterization of observation sets into intensity frames.
//!
//! Each observation spreads unit mass as an isotropic Gaussian whose variance
//! is the generating packet's marginal variance `sigma_x^2 * age`. The mass a
//! pixel receives is the exact integral over the pixel rectangle, which for an
//! axis-aligned isotropic Gaussian factors into two normal-CDF differences.
//! Contributions beyond [`TRUNCATION_SIGMAS`] standard deviations are dropped.
//!
//! Track intensity is accumulated in 64-bit fixed point so that summation is
//! associative: the raster of a union of observation sets equals the sum of
//! the rasters, bit for bit, whatever the accumulation order.
//!
//! Pixel `(col, row)` covers `x in [x_min + col*pw, x_min + (col+1)*pw]` and
//! `y in [y_max - (row+1)*ph, y_max - row*ph]`; row 0 is the top of the image.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Add;
use std::path::Path;

use thiserror::Error;

use crate::config::SimConfig;
use crate::geom::{Rect, Vec2};
use crate::scalar::normal_cdf;
use crate::types::{MultiTargetObservation, MultiTargetState};
use crate::wind::{eval_wind, WindError, WindField};
use crate::Real;

/// Per-observation support half-width, in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 6.0;

/// Fixed-point quantum of the track accumulator: `2^-44`.
const FIXED_SCALE: f64 = (1u64 << 44) as f64;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("AllZeroVideo: no pixel in any frame has positive intensity")]
    AllZeroVideo,
    #[error("EmptyVideo: no frames to normalize")]
    EmptyVideo,
    #[error("bad PGM: {0}")]
    BadPgm(String),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Row-major image of real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Frame<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "frame data length");
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Value of the pixel containing `pos`, if inside `window`.
    pub fn sample(&self, window: &Rect<T>, pos: Vec2<T>) -> Option<T> {
        pixel_of(window, [self.width, self.height], pos).map(|(c, r)| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Pixel `(col, row)` containing `pos`, or `None` outside the window.
pub fn pixel_of<T: Real>(window: &Rect<T>, grid: [usize; 2], pos: Vec2<T>) -> Option<(usize, usize)> {
    if !window.contains(pos) {
        return None;
    }
    let [w, h] = grid;
    let fx = (pos.x - window.x_min) / window.width() * T::lit(w as f64);
    let fy = (window.y_max - pos.y) / window.height() * T::lit(h as f64);
    let col = fx.floor().to_usize()?.min(w - 1);
    let row = fy.floor().to_usize()?.min(h - 1);
    Some((col, row))
}

/// Center of pixel `(col, row)`.
pub fn pixel_center<T: Real>(window: &Rect<T>, grid: [usize; 2], col: usize, row: usize) -> Vec2<T> {
    let half = T::lit(0.5);
    let x = window.x_min + window.width() * (T::lit(col as f64) + half) / T::lit(grid[0] as f64);
    let y = window.y_max - window.height() * (T::lit(row as f64) + half) / T::lit(grid[1] as f64);
    Vec2::new(x, y)
}

/// Track intensity accumulated in fixed point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    width: usize,
    height: usize,
    acc: Vec<i64>,
}

impl RawFrame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, acc: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn deposit(&mut self, col: usize, row: usize, mass: f64) {
        let q = (mass * FIXED_SCALE).round() as i64;
        let cell = &mut self.acc[row * self.width + col];
        *cell = cell.saturating_add(q);
    }

    pub fn value(&self, col: usize, row: usize) -> f64 {
        self.acc[row * self.width + col] as f64 / FIXED_SCALE
    }

    pub fn is_zero(&self) -> bool {
        self.acc.iter().all(|&v| v == 0)
    }

    /// Sum over all pixels.
    pub fn total(&self) -> f64 {
        self.acc.iter().map(|&v| v as i128).sum::<i128>() as f64 / FIXED_SCALE
    }

    pub fn to_frame<T: Real>(&self) -> Frame<T> {
        Frame {
            width: self.width,
            height: self.height,
            data: self.acc.iter().map(|&v| T::lit(v as f64 / FIXED_SCALE)).collect(),
        }
    }
}

impl Add for &RawFrame {
    type Output = RawFrame;
    fn add(self, rhs: &RawFrame) -> RawFrame {
        assert_eq!((self.width, self.height), (rhs.width, rhs.height), "frame sizes differ");
        RawFrame {
            width: self.width,
            height: self.height,
            acc: self.acc.iter().zip(&rhs.acc).map(|(a, b)| a.saturating_add(*b)).collect(),
        }
    }
}

/// Masses of a 1-d Gaussian over consecutive cells `[first, first + len)` of
/// an axis with cell edges `origin + k * step`. `dir` is +1 for axes that grow
/// with the index and -1 for the flipped y axis.
fn axis_masses<T: Real>(mean: T, std: T, origin: T, step: T, cells: usize, dir: T) -> Option<(usize, Vec<T>)> {
    // position along the axis in cell units
    let u = (mean - origin) * dir / step;
    if std == T::zero() {
        let k = u.floor();
        if k < T::zero() || k >= T::lit(cells as f64) {
            // on the closing edge the point still belongs to the last cell
            return (u == T::lit(cells as f64)).then(|| (cells - 1, vec![T::one()]));
        }
        return Some((k.to_usize()?, vec![T::one()]));
    }
    let s = std / step;
    let reach = T::lit(TRUNCATION_SIGMAS) * s;
    let lo = (u - reach).floor().max(T::zero());
    let hi = (u + reach).floor().min(T::lit(cells as f64 - 1.0));
    if lo > hi {
        return None;
    }
    let (lo, hi) = (lo.to_usize()?, hi.to_usize()?);
    let cdf = |edge: usize| normal_cdf((T::lit(edge as f64) - u) / s);
    let mut prev = cdf(lo);
    let masses = (lo..=hi)
        .map(|k| {
            let next = cdf(k + 1);
            let m = next - prev;
            prev = next;
            m
        })
        .collect();
    Some((lo, masses))
}

/// Adds the pixel masses of one Gaussian blob to `raw`.
pub fn deposit_gaussian<T: Real>(raw: &mut RawFrame, window: &Rect<T>, center: Vec2<T>, std: T) {
    let pw = window.width() / T::lit(raw.width as f64);
    let ph = window.height() / T::lit(raw.height as f64);
    let Some((c0, mx)) = axis_masses(center.x, std, window.x_min, pw, raw.width, T::one()) else {
        return;
    };
    let Some((r0, my)) = axis_masses(center.y, std, window.y_max, ph, raw.height, -T::one()) else {
        return;
    };
    for (j, &wy) in my.iter().enumerate() {
        for (i, &wx) in mx.iter().enumerate() {
            let m = (wx * wy).as_f64();
            if m > 0.0 {
                raw.deposit(c0 + i, r0 + j, m);
            }
        }
    }
}

/// Track intensity of one frame: the sum over observations of the pixel
/// integrals of their observation densities, accumulated in packet-id order.
pub fn rasterize_frame<T: Real>(
    obs: &MultiTargetObservation<T>,
    state: &MultiTargetState<T>,
    cfg: &SimConfig<T>,
) -> RawFrame {
    let [w, h] = cfg.grid;
    let mut raw = RawFrame::zeros(w, h);
    for o in &obs.observations {
        let age =
            state.packet(o.source_packet_id).map(|p| p.age(obs.frame_time).max(T::zero())).unwrap_or_else(T::zero);
        let std = cfg.sigma_x * age.sqrt();
        deposit_gaussian(&mut raw, &cfg.window, o.pos, std);
    }
    raw
}

/// Track intensity plus an optional background.
pub fn compose<T: Real>(raw: &RawFrame, background: Option<&Frame<T>>) -> Frame<T> {
    let mut f = raw.to_frame::<T>();
    if let Some(bg) = background {
        for (v, b) in f.data.iter_mut().zip(&bg.data) {
            *v = *v + *b;
        }
    }
    f
}

/// Divides every pixel of every frame by the largest pixel of the video.
pub fn normalize_video<T: Real>(frames: &[Frame<T>]) -> Result<Vec<Frame<T>>, RenderError> {
    if frames.is_empty() {
        return Err(RenderError::EmptyVideo);
    }
    let max = frames.iter().map(Frame::max).fold(T::neg_infinity(), T::max);
    if !(max > T::zero()) {
        return Err(RenderError::AllZeroVideo);
    }
    Ok(frames.iter().map(|f| f.map(|v| v / max)).collect())
}

/// Writes a normalized frame as binary 16-bit PGM (big-endian samples).
pub fn write_pgm<T: Real, W: Write>(frame: &Frame<T>, mut out: W) -> io::Result<()> {
    write!(out, "P5\n{} {}\n65535\n", frame.width, frame.height)?;
    let mut buf = Vec::with_capacity(frame.data.len() * 2);
    for &v in &frame.data {
        let s = (v.as_f64().clamp(0.0, 1.0) * 65535.0).round() as u16;
        buf.extend_from_slice(&s.to_be_bytes());
    }
    out.write_all(&buf)
}

pub fn write_pgm_file<T: Real>(frame: &Frame<T>, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(frame, &mut w)?;
    w.flush()
}

/// Reads a binary PGM (8- or 16-bit) into a frame scaled to `[0, 1]`.
pub fn read_pgm<T: Real, R: Read>(reader: R) -> Result<Frame<T>, RenderError> {
    let mut r = BufReader::new(reader);
    let mut tokens = Vec::new();
    let mut line = String::new();
    while tokens.len() < 4 {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(RenderError::BadPgm("truncated header".into()));
        }
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(str::to_string));
    }
    if tokens[0] != "P5" || tokens.len() != 4 {
        return Err(RenderError::BadPgm(format!("expected `P5 w h maxval` header, got {tokens:?}")));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| RenderError::BadPgm(format!("bad number `{s}`")));
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(RenderError::BadPgm(format!("unsupported dimensions {w}x{h} maxval {maxval}")));
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let mut raw = vec![0u8; w * h * bytes_per];
    r.read_exact(&mut raw)?;
    let scale = maxval as f64;
    let data = if bytes_per == 1 {
        raw.iter().map(|&b| T::lit(b as f64 / scale)).collect()
    } else {
        raw.chunks_exact(2).map(|c| T::lit(u16::from_be_bytes([c[0], c[1]]) as f64 / scale)).collect()
    };
    Ok(Frame::from_vec(w, h, data))
}

pub fn read_pgm_file<T: Real>(path: &Path) -> Result<Frame<T>, RenderError> {
    read_pgm(File::open(path)?)
}

/// Nearest-neighbor resample to `width x height`.
pub fn resample_nearest<T: Real>(src: &Frame<T>, width: usize, height: usize) -> Frame<T> {
    let mut out = Frame::zeros(width, height);
    for row in 0..height {
        let sr = (row * src.height / height).min(src.height - 1);
        for col in 0..width {
            let sc = (col * src.width / width).min(src.width - 1);
            out.set(col, row, src.get(sc, sr));
        }
    }
    out
}

/// Moves a background image one interval along the wind.
///
/// Each output pixel takes the value of the input pixel nearest to the point
/// its center came from, `center - mu(center, t) * dt`; sources outside the
/// window give zero.
pub fn advect_background<T: Real>(
    prev: &Frame<T>,
    wind: &WindField<T>,
    window: &Rect<T>,
    t: T,
    dt: T,
) -> Result<Frame<T>, RenderError> {
    let grid = [prev.width, prev.height];
    let mut out = Frame::zeros(prev.width, prev.height);
    for row in 0..prev.height {
        for col in 0..prev.width {
            let c = pixel_center(window, grid, col, row);
            let src = c - eval_wind(wind, c, t)? * dt;
            if let Some((sc, sr)) = pixel_of(window, grid, src) {
                out.set(col, row, prev.get(sc, sr));
            }
        }
    }
    Ok(out)
}
