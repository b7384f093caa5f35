//! Staged training: reward assembly, stage schedule, advancement and the training loop.

mod reward;
mod runner;
mod stage;

pub use reward::{reward_for, stage_goal_reward, RewardVariant, MAX_GOAL_REWARD, STEP_PENALTY};
pub use runner::{
    run_curriculum, run_episode, run_stage, CurriculumReport, EpisodeOutcome, EpisodeSink, Policy, Rollout,
    RunSettings, StageReport,
};
pub use stage::{
    baseline_schedule, curriculum_schedule, enabled_actions, maybe_advance, stage_spec, validate_schedule,
    AdvanceOutcome, CurriculumState, Mastery, StageSpec, TransferDirective,
};

use thiserror::Error;

use crate::agent::AgentError;
use crate::gridworld::GridError;
use crate::instruction::InstructionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Instruction(#[from] InstructionError),
    #[error("{0}")]
    Action(String),
    #[error("episode sink: {0}")]
    Sink(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("stage {stage}, episode {episode}: {source}")]
    Episode {
        stage: usize,
        episode: u64,
        #[source]
        source: EpisodeError,
    },
}
