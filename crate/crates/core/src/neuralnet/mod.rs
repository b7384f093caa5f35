//! Small reverse-mode network core: dense layers, ReLU, a gated recurrent
//! sequence encoder, a frozen random projection, RMSProp and a versioned
//! parameter checkpoint.
//!
//! Layers tape their own forward inputs; `backward` consumes the tape and
//! accumulates gradients into each trainable [`Param`].

mod checkpoint;
mod dense;
mod init;
pub(crate) mod param;
mod projector;
mod recurrent;
mod rmsprop;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, NamedTensor, CHECKPOINT_MAGIC};
pub use dense::{relu, relu_backward, DenseLayer};
pub use init::{glorot_uniform, seeded_rng};
pub use param::{gradients, Param, Parameterized};
pub use projector::FrozenProjector;
pub use recurrent::{GruTrace, RecurrentEncoder, DEFAULT_HIDDEN_DIM};
pub use rmsprop::{RmsPropConfig, RmsPropState};
pub use tensor::{concat, gemm, Tensor, Trans};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("shape mismatch in {op}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("recurrent encoder received an empty sequence")]
    EmptySequence,
    #[error("backward called without a recorded forward pass")]
    NoRecordedForward,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("cannot shrink head from {from} to {to} outputs")]
    ShrinkNotAllowed { from: usize, to: usize },
}
