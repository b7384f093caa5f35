use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncodedInstruction, InstructionError, Vocabulary};
use crate::neuralnet::Tensor;

pub const DEFAULT_EMBEDDING_DIM: usize = 50;

/// Frozen word-vector table, one row per vocabulary index.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    matrix: Tensor,
}

fn token_seed(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn seeded_row(token: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token));
    (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect()
}

impl EmbeddingTable {
    /// Pseudo-random rows; each row depends only on its token string.
    pub fn seeded(vocab: &Vocabulary) -> Self {
        let dim = vocab.embedding_dim();
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for t in vocab.tokens() {
            data.extend(seeded_row(t, dim));
        }
        EmbeddingTable {
            matrix: Tensor::from_vec(&[vocab.len(), dim], data).expect("rows × dim"),
        }
    }

    /// Reads whitespace-separated `token v1 … vD` lines (the common text format
    /// for pretrained vectors). Vocabulary tokens missing from the file keep
    /// their seeded rows.
    pub fn from_vector_file(vocab: &Vocabulary, text: &str) -> Result<Self, InstructionError> {
        let mut table = Self::seeded(vocab);
        let dim = vocab.embedding_dim();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(tok) = parts.next() else { continue };
            let Some(idx) = vocab.get(tok) else { continue };
            let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let values = values.map_err(|_| InstructionError::Parse {
                line: i + 1,
                message: "non-numeric vector component".into(),
            })?;
            if values.len() != dim {
                return Err(InstructionError::Parse {
                    line: i + 1,
                    message: format!("expected {dim} components, found {}", values.len()),
                });
            }
            table.matrix.row_mut(idx).copy_from_slice(&values);
        }
        Ok(table)
    }

    pub fn from_matrix(matrix: Tensor) -> Self {
        EmbeddingTable { matrix }
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Row lookup for each token of `enc`.
pub fn embed(enc: &EncodedInstruction, table: &EmbeddingTable) -> Result<Vec<Vec<f64>>, InstructionError> {
    enc.token_indices
        .iter()
        .map(|&i| {
            if i < table.rows() {
                Ok(table.matrix.row(i).to_vec())
            } else {
                Err(InstructionError::IndexOutOfRange {
                    index: i,
                    rows: table.rows(),
                })
            }
        })
        .collect()
}
