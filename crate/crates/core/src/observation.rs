//! Observation process: threshold detection and age-scaled Gaussian jitter.

use thiserror::Error;

use crate::config::SimConfig;
use crate::geom::{Rect, Vec2};
use crate::render::Frame;
use crate::rng::{Mechanism, RngStream, StreamKey};
use crate::types::{MultiTargetObservation, MultiTargetState, Observation, Packet};
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ObservationError {
    #[error("NegativeAge: packet {packet} observed at t={t} before its birth at {birth}")]
    NegativeAge { packet: u64, t: f64, birth: f64 },
}

/// 1 when `iota_low < intensity < iota_high`, else 0.
pub fn detection_probability<T: Real>(intensity: T, cfg: &SimConfig<T>) -> T {
    if cfg.iota_low < intensity && intensity < cfg.iota_high {
        T::one()
    } else {
        T::zero()
    }
}

/// Observation of `packet` at `t_n` if `detected`.
///
/// The observation is the packet position plus `N2(0, sigma_x^2 (t_n - b) I)`
/// noise, `b` being the packet's birth time.
pub fn observe_packet<T: Real>(
    packet: &Packet<T>,
    t_n: T,
    sigma_x: T,
    detected: bool,
    rng: &mut RngStream,
) -> Result<Option<Observation<T>>, ObservationError> {
    let age = packet.age(t_n);
    if age < T::zero() {
        return Err(ObservationError::NegativeAge {
            packet: packet.id,
            t: t_n.as_f64(),
            birth: packet.birth_time.as_f64(),
        });
    }
    if !detected {
        return Ok(None);
    }
    let scale = sigma_x * age.sqrt();
    let z = Vec2::new(T::lit(rng.standard_normal()), T::lit(rng.standard_normal()));
    Ok(Some(Observation { pos: packet.pos + z * scale, source_packet_id: packet.id, frame_time: t_n }))
}

/// Intensity image used to gate detection, in the window's pixel grid.
pub struct DetectionImage<'a, T> {
    pub frame: &'a Frame<T>,
    pub window: &'a Rect<T>,
}

impl<T: Real> DetectionImage<'_, T> {
    /// Intensity of the pixel containing `pos`; zero outside the window.
    pub fn at(&self, pos: Vec2<T>) -> T {
        self.frame.sample(self.window, pos).unwrap_or_else(T::zero)
    }
}

/// Observation set for `state`.
///
/// With open thresholds every packet is detected and `image` is ignored.
/// Otherwise each packet's detection uses the intensity of `image` at its
/// position, or zero intensity when no image is available.
pub fn observe_state<T: Real>(
    state: &MultiTargetState<T>,
    image: Option<&DetectionImage<'_, T>>,
    cfg: &SimConfig<T>,
) -> Result<MultiTargetObservation<T>, ObservationError> {
    let open = cfg.detection_open();
    let mut out = MultiTargetObservation::empty(state.frame, state.frame_time);
    for p in &state.packets {
        let detected = open || {
            let intensity = image.map_or_else(T::zero, |img| img.at(p.pos));
            detection_probability(intensity, cfg) == T::one()
        };
        let mut rng = RngStream::new(cfg.seed, StreamKey::new(state.frame, Mechanism::Observe, p.id));
        if let Some(obs) = observe_packet(p, state.frame_time, cfg.sigma_x, detected, &mut rng)? {
            out.observations.push(obs);
        }
    }
    Ok(out)
}
