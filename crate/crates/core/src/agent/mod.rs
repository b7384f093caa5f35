//! Multimodal DQN agent: network assembly, ε-greedy control, replay and updates.

mod checkpoint;
mod dqn;
mod linear;
mod model;
mod replay;
mod schedule;

pub use checkpoint::{read_agent_checkpoint, write_agent_checkpoint, AgentCheckpoint, AgentHeader};
pub use dqn::{argmax, select_action, sync_target, td_targets, train_step, DqnAgent, DqnConfig};
pub use linear::LinearQ;
pub use model::{MdqnInput, MdqnModel, ModelConfig};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instruction::InstructionError;
use crate::neuralnet::{NetError, Parameterized, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Instruction(#[from] InstructionError),
    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    BufferTooSmall { len: usize, batch: usize },
    #[error("checkpoint does not fit: {0}")]
    CheckpointMismatch(String),
    #[error("agent config: {0}")]
    Config(String),
}

/// A trainable action-value function over some input type.
///
/// `forward_train` records whatever `backward` needs; `backward` takes
/// `∂loss/∂Q` with one row per recorded input and accumulates parameter
/// gradients.
pub trait QFunction: Parameterized + Clone {
    type Input: Clone;

    fn action_count(&self) -> usize;

    /// `inputs.len() × action_count` matrix of action values.
    fn q_values_batch(&self, inputs: &[&Self::Input]) -> Result<Tensor, AgentError>;

    fn q_values(&self, input: &Self::Input) -> Result<Vec<f64>, AgentError> {
        Ok(self.q_values_batch(&[input])?.into_data())
    }

    fn forward_train(&mut self, inputs: &[&Self::Input]) -> Result<Tensor, AgentError>;

    fn backward(&mut self, dq: &Tensor) -> Result<(), AgentError>;

    /// Appends output rows; existing rows stay bit-identical.
    fn grow_head(&mut self, new_action_count: usize, rng: &mut ChaCha8Rng) -> Result<(), AgentError>;

    /// Parameter names whose shapes change under [`QFunction::grow_head`].
    fn head_param_names(&self) -> Vec<String>;
}
