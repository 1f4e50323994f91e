//! Frame loop: survival, motion, spawning, births, observation and rendering.
//!
//! The update from frame `n` to `n + 1` runs in a fixed order:
//!
//! 1. drop packets whose death time is not after `t_{n+1}`;
//! 2. move the survivors with the one-step Gaussian transition;
//! 3. let the heads of frame `n` spawn;
//! 4. open tracks for boats whose first emission is due;
//! 5. mark exactly the packets born at `t_{n+1}` as heads.
//!
//! Every random draw comes from a substream keyed by frame, mechanism and
//! packet (or boat) id, so the order only affects id assignment.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::boats::{BoatError, BoatPath};
use crate::config::{validate_config, ConfigErrors, SimConfig, ValidatedConfig};
use crate::dynamics::{survives, transition, DynamicsError};
use crate::genesis::{spawn, spontaneous_births, Fleet, GenesisError, IdAllocator};
use crate::geom::Vec2;
use crate::observation::{observe_state, DetectionImage, ObservationError};
use crate::render::{advect_background, compose, rasterize_frame, resample_nearest, Frame, RenderError};
use crate::rng::{Mechanism, RngStream, StreamKey};
use crate::types::{BoatId, MultiTargetObservation, MultiTargetState, Packet, PacketId, TrackId};
use crate::wind::WindField;
use crate::Real;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Boat(#[from] BoatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    Spawn,
    Death,
    Observe,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Event<T> {
    pub t: T,
    pub frame: usize,
    pub event: EventKind,
    pub packet: PacketId,
    pub track: TrackId,
    pub pos: Vec2<T>,
    /// Substream that produced the position.
    pub stream: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boat: Option<BoatId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<PacketId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub birth_time: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub death_time: Option<T>,
    /// Substream that produced the death time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub death_stream: Option<String>,
    /// Set when a waypoint boat was queried outside its time range.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub boat_clamped: bool,
}

/// How `X_{n+1}` decomposes into survived, spawned and newborn packets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepRecord {
    pub frame: usize,
    pub survived: Vec<PacketId>,
    /// `(head, child)` pairs.
    pub spawned: Vec<(PacketId, PacketId)>,
    pub born: Vec<PacketId>,
    pub died: Vec<PacketId>,
}

/// Everything the frame loop needs besides the state.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub cfg: ValidatedConfig<T>,
    pub wind: WindField<T>,
    pub fleet: Fleet<T>,
    /// Background image at frame 0, already on the render grid.
    pub background: Option<Frame<T>>,
}

impl<T: Real> Scene<T> {
    pub fn new(cfg: SimConfig<T>, wind: WindField<T>, boats: Vec<BoatPath<T>>) -> Result<Self, ConfigErrors> {
        let cfg = validate_config(cfg)?;
        let fleet = Fleet::new(boats, &cfg);
        Ok(Self { cfg, wind, fleet, background: None })
    }

    /// Adds a background image, resampled to the render grid.
    pub fn with_background(mut self, image: Frame<T>) -> Self {
        let [w, h] = self.cfg.grid;
        self.background = Some(resample_nearest(&image, w, h));
        self
    }
}

pub struct StepOutput<T> {
    pub state: MultiTargetState<T>,
    pub record: StepRecord,
    pub events: Vec<Event<T>>,
}

fn birth_frame<T: Real>(p: &Packet<T>, dt: T) -> usize {
    (p.birth_time / dt).round().to_usize().unwrap_or(0)
}

fn death_stream<T: Real>(p: &Packet<T>, dt: T) -> String {
    StreamKey::new(birth_frame(p, dt), Mechanism::Death, p.id).to_string()
}

fn creation_event<T: Real>(
    scene: &Scene<T>,
    p: &Packet<T>,
    frame: usize,
    kind: EventKind,
    boat: BoatId,
    parent: Option<PacketId>,
) -> Result<Event<T>, EngineError> {
    let cfg = &scene.cfg;
    let t = cfg.frame_time(frame);
    let stream = match parent {
        Some(head) => StreamKey::new(frame, Mechanism::Spawn, head),
        None => StreamKey::new(frame, Mechanism::Birth, boat),
    };
    let clamped = match scene.fleet.boat(boat) {
        Some(b) => b.sample(t - cfg.epsilon_lag)?.clamped,
        None => false,
    };
    Ok(Event {
        t,
        frame,
        event: kind,
        packet: p.id,
        track: p.track_id,
        pos: p.pos,
        stream: stream.to_string(),
        boat: Some(boat),
        parent,
        birth_time: Some(p.birth_time),
        death_time: Some(p.death_time),
        death_stream: Some(death_stream(p, cfg.dt)),
        boat_clamped: clamped,
    })
}

/// Initial state at frame 0: spontaneous births only.
pub fn initial_state<T: Real>(scene: &Scene<T>, ids: &mut IdAllocator) -> Result<StepOutput<T>, EngineError> {
    let cfg = &scene.cfg;
    let mut state = MultiTargetState::empty(0, cfg.frame_time(0));
    let births = spontaneous_births(0, &scene.fleet, cfg, ids)?;
    let mut events = Vec::new();
    let mut record = StepRecord { frame: 0, ..Default::default() };
    for track in births.tracks {
        state.tracks.insert(track.track_id, track);
    }
    for p in births.packets {
        let boat = state.tracks[&p.track_id].boat_id;
        events.push(creation_event(scene, &p, 0, EventKind::Birth, boat, None)?);
        record.born.push(p.id);
        state.packets.push(p);
    }
    Ok(StepOutput { state, record, events })
}

/// Advances `state` by one frame.
pub fn step<T: Real>(
    state: &MultiTargetState<T>,
    scene: &Scene<T>,
    ids: &mut IdAllocator,
) -> Result<StepOutput<T>, EngineError> {
    let cfg = &scene.cfg;
    let frame = state.frame + 1;
    let t_from = state.frame_time;
    let t_to = cfg.frame_time(frame);
    let mut next = MultiTargetState::empty(frame, t_to);
    next.tracks = state.tracks.clone();
    let mut record = StepRecord { frame, ..Default::default() };
    let mut events = Vec::new();

    // survival, then motion of the survivors
    for p in &state.packets {
        if !survives(p, t_to) {
            record.died.push(p.id);
            events.push(Event {
                t: t_to,
                frame,
                event: EventKind::Death,
                packet: p.id,
                track: p.track_id,
                pos: p.pos,
                stream: death_stream(p, cfg.dt),
                boat: None,
                parent: None,
                birth_time: Some(p.birth_time),
                death_time: Some(p.death_time),
                death_stream: None,
                boat_clamped: false,
            });
            continue;
        }
        let mut rng = RngStream::new(cfg.seed, StreamKey::new(frame, Mechanism::Motion, p.id));
        let pos = transition(p.pos, t_from, t_to, &scene.wind, cfg.sigma_x, &mut rng)?;
        record.survived.push(p.id);
        next.packets.push(Packet { pos, is_head: false, ..p.clone() });
    }

    // spawning from the heads of the previous frame
    for head in state.heads() {
        let track = state
            .tracks
            .get(&head.track_id)
            .ok_or(GenesisError::UnknownTrack { packet: head.id, track: head.track_id })?;
        if let Some(child) = spawn(head, track, &scene.fleet, frame, cfg, ids.next_packet)? {
            ids.packet();
            events.push(creation_event(scene, &child, frame, EventKind::Spawn, track.boat_id, Some(head.id))?);
            record.spawned.push((head.id, child.id));
            next.packets.push(child);
        }
    }

    // new emission tracks
    let births = spontaneous_births(frame, &scene.fleet, cfg, ids)?;
    for track in births.tracks {
        next.tracks.insert(track.track_id, track);
    }
    for p in births.packets {
        let boat = next.tracks[&p.track_id].boat_id;
        events.push(creation_event(scene, &p, frame, EventKind::Birth, boat, None)?);
        record.born.push(p.id);
        next.packets.push(p);
    }

    Ok(StepOutput { state: next, record, events })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep rendered frames. When false and detection is open, rasterization
    /// is skipped entirely.
    pub render: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { render: true }
    }
}

/// States, observations, frames and the event log of one run.
#[derive(Debug, Clone)]
pub struct SimulationResult<T> {
    pub config: ValidatedConfig<T>,
    pub states: Vec<MultiTargetState<T>>,
    pub observations: Vec<MultiTargetObservation<T>>,
    /// Un-normalized intensity (tracks plus background), empty if not rendered.
    pub frames: Vec<Frame<T>>,
    /// Largest pixel over the whole video; zero if nothing was rendered.
    pub max_intensity: T,
    pub records: Vec<StepRecord>,
    pub events: Vec<Event<T>>,
}

impl<T: Real> SimulationResult<T> {
    /// Frame `n` divided by the video maximum.
    pub fn normalized_frame(&self, n: usize) -> Result<Frame<T>, RenderError> {
        if !(self.max_intensity > T::zero()) {
            return Err(RenderError::AllZeroVideo);
        }
        let max = self.max_intensity;
        Ok(self.frames[n].map(|v| v / max))
    }

    /// Every track that was ever opened.
    pub fn track_ids(&self) -> BTreeSet<TrackId> {
        self.states.last().map(|s| s.tracks.keys().copied().collect()).unwrap_or_default()
    }
}

/// Runs all frames and keeps what `opts` asks for.
pub fn simulate<T: Real>(scene: &Scene<T>, opts: RunOptions) -> Result<SimulationResult<T>, EngineError> {
    let cfg = &scene.cfg;
    let [w, h] = cfg.grid;
    let rasterize = opts.render || !cfg.detection_open();

    let mut ids = IdAllocator::default();
    let mut states = Vec::with_capacity(cfg.n_frames);
    let mut observations = Vec::with_capacity(cfg.n_frames);
    let mut frames = Vec::new();
    let mut records = Vec::with_capacity(cfg.n_frames);
    let mut events = Vec::new();
    let mut background = scene.background.clone();
    let mut previous: Option<Frame<T>> = None;
    let mut max_intensity = T::zero();

    for n in 0..cfg.n_frames {
        let StepOutput { state, record, events: mut evs } = if n == 0 {
            initial_state(scene, &mut ids)?
        } else {
            if let Some(bg) = &background {
                background = Some(advect_background(bg, &scene.wind, &cfg.window, cfg.frame_time(n - 1), cfg.dt)?);
            }
            step(&states[n - 1], scene, &mut ids)?
        };
        events.append(&mut evs);

        // detection gate: previous frame scaled by the running maximum, or the
        // background alone at frame 0
        let gate = match &previous {
            Some(prev) if max_intensity > T::zero() => Some(prev.map(|v| v / max_intensity)),
            Some(prev) => Some(prev.clone()),
            None => background.clone(),
        };
        let image = gate.as_ref().map(|frame| DetectionImage { frame, window: &cfg.window });
        let obs = observe_state(&state, image.as_ref(), cfg)?;
        for o in &obs.observations {
            events.push(Event {
                t: obs.frame_time,
                frame: n,
                event: EventKind::Observe,
                packet: o.source_packet_id,
                track: state.packet(o.source_packet_id).map_or(0, |p| p.track_id),
                pos: o.pos,
                stream: StreamKey::new(n, Mechanism::Observe, o.source_packet_id).to_string(),
                boat: None,
                parent: None,
                birth_time: None,
                death_time: None,
                death_stream: None,
                boat_clamped: false,
            });
        }

        if rasterize {
            let raw = rasterize_frame(&obs, &state, cfg);
            let frame = compose(&raw, background.as_ref());
            max_intensity = max_intensity.max(frame.max());
            if opts.render {
                frames.push(frame.clone());
            }
            previous = Some(frame);
        } else if let Some(bg) = &background {
            max_intensity = max_intensity.max(bg.max());
        }
        debug_assert!(frames.is_empty() || frames[0].width() == w && frames[0].height() == h);

        states.push(state);
        observations.push(obs);
        records.push(record);
    }

    Ok(SimulationResult { config: cfg.clone(), states, observations, frames, max_intensity, records, events })
}

/// Validates, simulates with rendering, and fails if the video is blank.
pub fn run<T: Real>(
    cfg: SimConfig<T>,
    wind: WindField<T>,
    boats: Vec<BoatPath<T>>,
) -> Result<SimulationResult<T>, EngineError> {
    let scene = Scene::new(cfg, wind, boats)?;
    let result = simulate(&scene, RunOptions::default())?;
    if !(result.max_intensity > T::zero()) {
        return Err(RenderError::AllZeroVideo.into());
    }
    Ok(result)
}
