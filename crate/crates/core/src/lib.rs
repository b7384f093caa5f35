//! Instruction-following kitchen navigation trained with an incremental
//! curriculum over a multimodal deep Q-network.

pub mod agent;
pub mod curriculum;
pub mod gridworld;
pub mod harness;
pub mod instruction;
pub mod neuralnet;
