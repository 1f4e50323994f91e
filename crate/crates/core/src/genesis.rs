//! New packets: spontaneous births of emission tracks when a boat's lagged
//! emissions first become visible, and Bernoulli spawning from track heads.

use std::collections::BTreeMap;

use log::warn;
use thiserror::Error;

use crate::boats::{entry_time, BoatError, BoatPath, ENTRY_TOLERANCE};
use crate::config::{BirthMode, SimConfig};
use crate::dynamics::{sample_packet_death, sample_track_lifetime, DynamicsError};
use crate::geom::Vec2;
use crate::rng::{Mechanism, RngStream, StreamKey};
use crate::types::{BoatId, Packet, PacketId, Track, TrackId};
use crate::Real;

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error("UnknownBoat: track {track} refers to boat {boat}, which is not in the fleet")]
    UnknownBoat { track: TrackId, boat: BoatId },
    #[error("UnknownTrack: head packet {packet} refers to missing track {track}")]
    UnknownTrack { packet: PacketId, track: TrackId },
    #[error(transparent)]
    Boat(#[from] BoatError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Sequential id source. Ids are handed out in a fixed order so a run is
/// reproducible regardless of how per-packet work is scheduled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdAllocator {
    pub next_packet: PacketId,
    pub next_track: TrackId,
}

impl IdAllocator {
    pub fn packet(&mut self) -> PacketId {
        let id = self.next_packet;
        self.next_packet += 1;
        id
    }

    pub fn track(&mut self) -> TrackId {
        let id = self.next_track;
        self.next_track += 1;
        id
    }
}

/// Boats with their window-entry times and first-emission frames.
#[derive(Debug, Clone)]
pub struct Fleet<T> {
    boats: BTreeMap<BoatId, BoatPath<T>>,
    entries: BTreeMap<BoatId, Option<T>>,
    first_frames: BTreeMap<BoatId, Option<usize>>,
}

impl<T: Real> Fleet<T> {
    pub fn new(boats: Vec<BoatPath<T>>, cfg: &SimConfig<T>) -> Self {
        let horizon = cfg.horizon();
        let mut entries = BTreeMap::new();
        let mut first_frames = BTreeMap::new();
        for b in &boats {
            let entry = entry_time(b, &cfg.window, horizon, cfg.dt);
            // smallest n with n*dt >= entry + eps, allowing for the bisection tolerance
            let frame = entry.and_then(|e| {
                let due = (e + cfg.epsilon_lag).as_f64() - ENTRY_TOLERANCE;
                let n = (due / cfg.dt.as_f64()).ceil().max(0.0);
                (n < cfg.n_frames as f64).then_some(n as usize)
            });
            entries.insert(b.boat_id, entry);
            first_frames.insert(b.boat_id, frame);
        }
        let boats = boats.into_iter().map(|b| (b.boat_id, b)).collect();
        Self { boats, entries, first_frames }
    }

    pub fn boat(&self, id: BoatId) -> Option<&BoatPath<T>> {
        self.boats.get(&id)
    }

    pub fn boats(&self) -> impl Iterator<Item = &BoatPath<T>> {
        self.boats.values()
    }

    pub fn len(&self) -> usize {
        self.boats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boats.is_empty()
    }

    pub fn entry_time(&self, id: BoatId) -> Option<T> {
        self.entries.get(&id).copied().flatten()
    }

    /// Frame at which the boat's first emission becomes visible, if within the run.
    pub fn first_emission_frame(&self, id: BoatId) -> Option<usize> {
        self.first_frames.get(&id).copied().flatten()
    }

    /// Spawning probability for a boat at frame time `t`: 1 while the run has
    /// not reached its horizon and the lagged boat position lies in the
    /// window, else 0.
    pub fn spawn_probability(&self, id: BoatId, t: T, cfg: &SimConfig<T>) -> Result<T, GenesisError> {
        let boat = self.boats.get(&id).ok_or(GenesisError::UnknownBoat { track: 0, boat: id })?;
        let Some(entry) = self.entry_time(id) else {
            return Ok(T::zero());
        };
        let lagged = t - cfg.epsilon_lag;
        let emitting = t <= cfg.horizon()
            && lagged + T::lit(ENTRY_TOLERANCE) >= entry
            && cfg.window.contains(boat.sample(lagged)?.pos);
        Ok(if emitting { T::one() } else { T::zero() })
    }
}

/// Tracks and packets created by spontaneous births at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Births<T> {
    pub tracks: Vec<Track<T>>,
    pub packets: Vec<Packet<T>>,
}

fn gaussian_around<T: Real>(center: Vec2<T>, std: T, rng: &mut RngStream) -> Vec2<T> {
    let z = Vec2::new(T::lit(rng.standard_normal()), T::lit(rng.standard_normal()));
    center + z * std
}

/// Spontaneous births at frame `frame` (time `t_n = frame * dt`).
///
/// Every boat whose first emission is due at this frame opens a new track;
/// the track receives `N_b` head packets placed around the boat's position
/// at `t_n - epsilon` with spread `sigma_b`. Boats are processed in id order.
pub fn spontaneous_births<T: Real>(
    frame: usize,
    fleet: &Fleet<T>,
    cfg: &SimConfig<T>,
    ids: &mut IdAllocator,
) -> Result<Births<T>, GenesisError> {
    let t = cfg.frame_time(frame);
    let mut births = Births { tracks: Vec::new(), packets: Vec::new() };
    for boat in fleet.boats() {
        if fleet.first_emission_frame(boat.boat_id) != Some(frame) {
            continue;
        }
        let mut rng = RngStream::new(cfg.seed, StreamKey::new(frame, Mechanism::Birth, boat.boat_id));
        let mut count = match cfg.birth_mode {
            BirthMode::Single => u64::from(cfg.lambda_gamma > T::zero()),
            BirthMode::Poisson => rng.poisson(cfg.lambda_gamma.as_f64()),
        };
        if count > cfg.max_births {
            warn!("boat {}: birth count {count} capped at {}", boat.boat_id, cfg.max_births);
            count = cfg.max_births;
        }
        if count == 0 {
            continue;
        }

        let mut life_rng = RngStream::new(cfg.seed, StreamKey::new(frame, Mechanism::TrackLifetime, boat.boat_id));
        let track = Track {
            track_id: ids.track(),
            boat_id: boat.boat_id,
            lifetime: sample_track_lifetime(cfg.lambda_t, &mut life_rng)?,
            origin_time: t,
        };
        let center = boat.sample(t - cfg.epsilon_lag)?.pos;
        for _ in 0..count {
            let id = ids.packet();
            let mut death_rng = RngStream::new(cfg.seed, StreamKey::new(frame, Mechanism::Death, id));
            births.packets.push(Packet {
                id,
                track_id: track.track_id,
                pos: gaussian_around(center, cfg.sigma_b, &mut rng),
                birth_time: t,
                death_time: sample_packet_death(t, track.lifetime, cfg.sigma_pd, &mut death_rng)?,
                is_head: true,
            });
        }
        births.tracks.push(track);
    }
    Ok(births)
}

/// Bernoulli spawn from `head` at frame `frame`.
///
/// Only heads spawn. With probability `p_beta` a single packet is placed
/// around the boat's position at `t_n - epsilon` with covariance
/// `epsilon * sigma_beta^2 I`, and receives id `new_id`.
pub fn spawn<T: Real>(
    head: &Packet<T>,
    track: &Track<T>,
    fleet: &Fleet<T>,
    frame: usize,
    cfg: &SimConfig<T>,
    new_id: PacketId,
) -> Result<Option<Packet<T>>, GenesisError> {
    if !head.is_head {
        return Ok(None);
    }
    let boat =
        fleet.boat(track.boat_id).ok_or(GenesisError::UnknownBoat { track: track.track_id, boat: track.boat_id })?;
    let t = cfg.frame_time(frame);
    let p_beta = fleet.spawn_probability(track.boat_id, t, cfg)?;
    let mut rng = RngStream::new(cfg.seed, StreamKey::new(frame, Mechanism::Spawn, head.id));
    let fires = if p_beta >= T::one() {
        true
    } else if p_beta <= T::zero() {
        false
    } else {
        T::lit(rng.uniform_open01()) < p_beta
    };
    if !fires {
        return Ok(None);
    }
    let center = boat.sample(t - cfg.epsilon_lag)?.pos;
    let std = cfg.sigma_beta * cfg.epsilon_lag.sqrt();
    let mut death_rng = RngStream::new(cfg.seed, StreamKey::new(frame, Mechanism::Death, new_id));
    Ok(Some(Packet {
        id: new_id,
        track_id: track.track_id,
        pos: gaussian_around(center, std, &mut rng),
        birth_time: t,
        death_time: sample_packet_death(t, track.lifetime, cfg.sigma_pd, &mut death_rng)?,
        is_head: true,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boats::AnalyticPath;
    use crate::geom::Rect;

    fn straight_cfg() -> SimConfig<f64> {
        let mut cfg = SimConfig::paper_table1();
        cfg.window = Rect::new(-100.0, -100.0, 100.0, 100.0);
        cfg
    }

    fn straight_boat(id: BoatId) -> BoatPath<f64> {
        BoatPath::analytic(id, AnalyticPath::Linear { origin: Vec2::new(0.0, 0.0), velocity: Vec2::new(1.0, 0.0) })
    }

    fn head(id: PacketId, is_head: bool) -> (Packet<f64>, Track<f64>) {
        let track = Track { track_id: 0, boat_id: 0, lifetime: 80.0, origin_time: 5.0 };
        let p = Packet { id, track_id: 0, pos: Vec2::zero(), birth_time: 5.0, death_time: 85.0, is_head };
        (p, track)
    }

    #[test]
    fn first_emission_frame_is_entry_plus_lag() {
        let cfg = straight_cfg();
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        assert_eq!(fleet.entry_time(0), Some(0.0));
        assert_eq!(fleet.first_emission_frame(0), Some(25));
    }

    #[test]
    fn zero_intensity_never_births() {
        let mut cfg = straight_cfg();
        cfg.lambda_gamma = 0.0;
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        for mode in [BirthMode::Single, BirthMode::Poisson] {
            cfg.birth_mode = mode;
            let mut ids = IdAllocator::default();
            let b = spontaneous_births(25, &fleet, &cfg, &mut ids).unwrap();
            assert!(b.packets.is_empty() && b.tracks.is_empty());
        }
    }

    #[test]
    fn single_mode_opens_one_track_with_one_head() {
        let cfg = straight_cfg();
        let fleet = Fleet::new(vec![straight_boat(0), straight_boat(4)], &cfg);
        let mut ids = IdAllocator::default();
        assert!(spontaneous_births(24, &fleet, &cfg, &mut ids).unwrap().packets.is_empty());
        let b = spontaneous_births(25, &fleet, &cfg, &mut ids).unwrap();
        assert_eq!(b.tracks.len(), 2);
        assert_eq!(b.packets.len(), 2);
        assert!(b.packets.iter().all(|p| p.is_head && p.birth_time == 5.0 && p.death_time > 5.0));
        assert_eq!(ids, IdAllocator { next_packet: 2, next_track: 2 });
        assert!(spontaneous_births(26, &fleet, &cfg, &mut ids).unwrap().packets.is_empty());
    }

    #[test]
    fn births_are_placed_at_lagged_boat_position() {
        let mut cfg = straight_cfg();
        cfg.sigma_b = 0.0;
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        let b = spontaneous_births(25, &fleet, &cfg, &mut IdAllocator::default()).unwrap();
        // boat at x = t, lagged by 5 h from t = 5
        assert_eq!(b.packets[0].pos, Vec2::new(0.0, 0.0));
    }

    #[test]
    fn poisson_births_are_capped() {
        let mut cfg = straight_cfg();
        cfg.birth_mode = BirthMode::Poisson;
        cfg.lambda_gamma = 50.0;
        cfg.max_births = 3;
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        let b = spontaneous_births(25, &fleet, &cfg, &mut IdAllocator::default()).unwrap();
        assert_eq!(b.packets.len(), 3);
        assert!(b.packets.iter().all(|p| p.track_id == b.tracks[0].track_id));
    }

    #[test]
    fn non_head_never_spawns() {
        let cfg = straight_cfg();
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        let (p, track) = head(0, false);
        assert_eq!(spawn(&p, &track, &fleet, 30, &cfg, 1).unwrap(), None);
    }

    #[test]
    fn eligible_head_always_spawns_while_emitting() {
        let cfg = straight_cfg();
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        let (p, track) = head(0, true);
        for frame in 26..100 {
            let child = spawn(&p, &track, &fleet, frame, &cfg, 1000 + frame as u64).unwrap().unwrap();
            assert!(child.is_head);
            assert_eq!(child.track_id, track.track_id);
            assert_eq!(child.birth_time, cfg.frame_time(frame));
        }
    }

    #[test]
    fn spawning_stops_outside_window() {
        let mut cfg = straight_cfg();
        cfg.window = Rect::new(-1.0, -1.0, 2.1, 1.0);
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        let (p, track) = head(0, true);
        // lagged position x = t - 5 leaves the window after t = 7.1
        assert!(spawn(&p, &track, &fleet, 35, &cfg, 9).unwrap().is_some());
        assert!(spawn(&p, &track, &fleet, 36, &cfg, 9).unwrap().is_none());
    }

    #[test]
    fn unknown_boat_is_an_error() {
        let cfg = straight_cfg();
        let fleet = Fleet::new(vec![straight_boat(0)], &cfg);
        let (p, mut track) = head(0, true);
        track.boat_id = 9;
        assert!(matches!(spawn(&p, &track, &fleet, 30, &cfg, 1), Err(GenesisError::UnknownBoat { .. })));
    }
}
