//! Discrete kitchen simulator: 0.25 m cells, 90° turns, pick and place.

mod kinds;
mod map;
mod observation;
mod world;

pub use kinds::{ObjectKind, ReceptacleKind};
pub use map::{load_map, Cell, GridMap, ObjectSpawn, Receptacle, Terrain};
pub use observation::{observe, Observation, ObservationWindow, CELL_FEATURES};
pub use world::{
    success_predicate, Action, AgentPose, EnvConfig, Environment, Event, Heading, Location, ObjectInstance,
    RewardFn, StepOutcome, WorldState,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("map line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid map: {entity}: {message}")]
    Validation { entity: String, message: String },
    #[error("task does not fit map: {0}")]
    TaskMapMismatch(String),
    #[error("step called on a finished episode")]
    SteppedAfterTerminal,
    #[error("environment config: {0}")]
    Config(String),
}

/// Step penalty only; handy for driving the simulator without a curriculum.
pub fn flat_penalty(_: &[Event], _: bool) -> f64 {
    -0.05
}
