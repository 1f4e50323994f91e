//! Seed-reproducible simulation of ship-emitted cloud-aerosol tracks.
//!
//! Ship exhaust is modeled as a multi-target point process. Each boat that
//! enters the observation window opens an emission track; the track's head
//! packet spawns one new packet per frame while the boat keeps emitting.
//! Packets drift with the wind and diffuse, die at log-normal times around
//! their track's exponential mean lifetime, and produce noisy observations
//! that are rasterized into normalized intensity frames.
//!
//! Modules, bottom up:
//!
//! - [`config`], [`types`], [`geom`]: parameters and domain types
//! - [`wind`], [`boats`]: the drift field and boat trajectories
//! - [`dynamics`]: packet motion and lifetimes
//! - [`genesis`]: spontaneous births and spawning
//! - [`observation`], [`render`]: the sensor side
//! - [`engine`]: the frame loop and event log
//! - [`scenario`], [`output`], [`summary`]: config files, presets, run
//!   directories and their metrics
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below name the usual double-precision instantiations.

// `!(a > b)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boats;
pub mod config;
pub mod dynamics;
pub mod engine;
pub mod genesis;
pub mod geom;
pub mod observation;
pub mod output;
pub mod render;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod summary;
pub mod types;
pub mod wind;

pub use config::{validate_config, BirthMode, ConfigErrors, ConfigViolation, SimConfig, ValidatedConfig};
pub use engine::{run, simulate, step, EngineError, Event, EventKind, RunOptions, Scene, SimulationResult};
pub use geom::{Rect, Vec2};
pub use output::{write_run_dir, OutputOptions};
pub use rng::{Mechanism, RngStream, StreamKey};
pub use scalar::Real;
pub use scenario::{Scenario, ScenarioError};
pub use summary::{summarize, Summary};
pub use types::{MultiTargetObservation, MultiTargetState, Observation, Packet, Track};

pub type SimConfigF64 = SimConfig<f64>;
pub type SimConfigF32 = SimConfig<f32>;
pub type Vec2F64 = Vec2<f64>;
pub type Vec2F32 = Vec2<f32>;
pub type PacketF64 = Packet<f64>;
pub type StateF64 = MultiTargetState<f64>;
pub type ObservationSetF64 = MultiTargetObservation<f64>;
pub type WindFieldF64 = wind::WindField<f64>;
pub type WindFieldF32 = wind::WindField<f32>;
pub type BoatPathF64 = boats::BoatPath<f64>;
pub type SceneF64 = Scene<f64>;
pub type SceneF32 = Scene<f32>;
pub type SimulationF64 = SimulationResult<f64>;
pub type SimulationF32 = SimulationResult<f32>;
pub type FrameF64 = render::Frame<f64>;
