//! Latent packets, tracks and the per-frame state and observation sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::Real;

pub type PacketId = u64;
pub type TrackId = u64;
pub type BoatId = u64;

/// One aerosol emission burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Packet<T> {
    pub id: PacketId,
    pub track_id: TrackId,
    pub pos: Vec2<T>,
    pub birth_time: T,
    /// Sampled once at creation.
    pub death_time: T,
    /// Born during the most recent frame interval, hence allowed to spawn.
    pub is_head: bool,
}

impl<T: Real> Packet<T> {
    pub fn age(&self, t: T) -> T {
        t - self.birth_time
    }
}

/// An emission track, one per boat entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Track<T> {
    pub track_id: TrackId,
    pub boat_id: BoatId,
    /// Average packet lifetime drawn for this track.
    pub lifetime: T,
    pub origin_time: T,
}

/// The live packet set at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MultiTargetState<T> {
    pub frame: usize,
    pub frame_time: T,
    /// Sorted by packet id.
    pub packets: Vec<Packet<T>>,
    pub tracks: BTreeMap<TrackId, Track<T>>,
}

impl<T: Real> MultiTargetState<T> {
    pub fn empty(frame: usize, frame_time: T) -> Self {
        Self { frame, frame_time, packets: Vec::new(), tracks: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn packet(&self, id: PacketId) -> Option<&Packet<T>> {
        self.packets.binary_search_by_key(&id, |p| p.id).ok().map(|i| &self.packets[i])
    }

    /// Live packet count per track. Tracks with no live packets are listed with 0.
    pub fn track_counts(&self) -> BTreeMap<TrackId, usize> {
        let mut counts: BTreeMap<TrackId, usize> = self.tracks.keys().map(|&k| (k, 0)).collect();
        for p in &self.packets {
            *counts.entry(p.track_id).or_default() += 1;
        }
        counts
    }

    pub fn heads(&self) -> impl Iterator<Item = &Packet<T>> {
        self.packets.iter().filter(|p| p.is_head)
    }

    /// Checks the structural invariants of a state; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for w in self.packets.windows(2) {
            if w[0].id >= w[1].id {
                return Err(format!("packets not strictly sorted at id {}", w[1].id));
            }
        }
        for p in &self.packets {
            if !p.pos.is_finite() {
                return Err(format!("packet {} has non-finite position", p.id));
            }
            if !self.tracks.contains_key(&p.track_id) {
                return Err(format!("packet {} references unknown track {}", p.id, p.track_id));
            }
            if !(p.birth_time <= self.frame_time && self.frame_time < p.death_time) {
                return Err(format!(
                    "packet {} not alive at t={}: born {}, dies {}",
                    p.id, self.frame_time, p.birth_time, p.death_time
                ));
            }
        }
        Ok(())
    }
}

/// A sensor-side point generated from one detected packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Observation<T> {
    pub pos: Vec2<T>,
    /// Validation-only link back to the generating packet.
    pub source_packet_id: PacketId,
    pub frame_time: T,
}

/// The observation set at one frame, sorted by source packet id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MultiTargetObservation<T> {
    pub frame: usize,
    pub frame_time: T,
    pub observations: Vec<Observation<T>>,
}

impl<T: Real> MultiTargetObservation<T> {
    pub fn empty(frame: usize, frame_time: T) -> Self {
        Self { frame, frame_time, observations: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(id: u64, track: u64, birth: f64, death: f64) -> Packet<f64> {
        Packet { id, track_id: track, pos: Vec2::new(0.0, 0.0), birth_time: birth, death_time: death, is_head: false }
    }

    fn state() -> MultiTargetState<f64> {
        let mut s = MultiTargetState::empty(3, 0.6);
        s.tracks.insert(0, Track { track_id: 0, boat_id: 0, lifetime: 80.0, origin_time: 0.0 });
        s.tracks.insert(1, Track { track_id: 1, boat_id: 1, lifetime: 80.0, origin_time: 0.4 });
        s.packets = vec![packet(1, 0, 0.0, 9.0), packet(2, 0, 0.2, 9.0), packet(5, 1, 0.4, 9.0)];
        s
    }

    #[test]
    fn counts_sum_to_cardinality() {
        let s = state();
        let counts = s.track_counts();
        assert_eq!(counts[&0], 2);
        assert_eq!(counts[&1], 1);
        assert_eq!(counts.values().sum::<usize>(), s.len());
        assert!(s.check_invariants().is_ok());
        assert_eq!(s.packet(5).unwrap().track_id, 1);
        assert!(s.packet(3).is_none());
    }

    #[test]
    fn dead_packet_is_an_invariant_violation() {
        let mut s = state();
        s.packets[0].death_time = 0.6;
        assert!(s.check_invariants().is_err());
    }

    #[test]
    fn orphan_packet_is_an_invariant_violation() {
        let mut s = state();
        s.packets[2].track_id = 9;
        assert!(s.check_invariants().unwrap_err().contains("unknown track"));
    }
}
