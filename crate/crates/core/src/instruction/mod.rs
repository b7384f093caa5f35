//! Instruction templates, stage decomposition and text preprocessing.

mod embedding;
mod template;
mod vocab;

pub use embedding::{embed, EmbeddingTable, DEFAULT_EMBEDDING_DIM};
pub use template::{
    bundled_templates, decompose, parse_templates, render_prefix, sample_task, Clause, InstructionTask,
    InstructionTemplate, Slot, BUNDLED_TEMPLATES,
};
pub use vocab::{
    bundled_stop_words, encode_stage, parse_stop_words, preprocess, render_tokens, tokenize, EncodedInstruction,
    Vocabulary, BUNDLED_STOP_WORDS, OOV_TOKEN,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstructionError {
    #[error("unsatisfiable template: {0}")]
    UnsatisfiableTemplate(String),
    #[error("`{text}` does not instantiate template `{template}`")]
    TemplateMismatch { text: String, template: String },
    #[error("no tokens left after stop-word filtering of `{0}`")]
    EmptyAfterFiltering(String),
    #[error("token index {index} outside embedding table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("template `{id}`: {message}")]
    InvalidTemplate { id: String, message: String },
    #[error("stage {stage} outside 1..={count}")]
    StageOutOfRange { stage: usize, count: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
