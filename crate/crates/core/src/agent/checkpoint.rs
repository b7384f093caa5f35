use sha2::{Digest, Sha256};

use super::AgentError;
use crate::neuralnet::{read_checkpoint, write_checkpoint, NamedTensor};

const MAGIC: &[u8; 8] = b"ICLNAGNT";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentHeader {
    pub stage: u32,
    pub action_count: u32,
    /// Episodes elapsed in the current ε schedule.
    pub epsilon_episode: u64,
    pub train_steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentCheckpoint {
    pub header: AgentHeader,
    pub tensors: Vec<NamedTensor>,
}

/// Layout: magic, version, header fields (little endian), parameter blob
/// length + blob, SHA-256 of all preceding bytes.
pub fn write_agent_checkpoint(ck: &AgentCheckpoint) -> Vec<u8> {
    let blob = write_checkpoint(&ck.tensors);
    let mut out = Vec::with_capacity(blob.len() + 72);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&ck.header.stage.to_le_bytes());
    out.extend_from_slice(&ck.header.action_count.to_le_bytes());
    out.extend_from_slice(&ck.header.epsilon_episode.to_le_bytes());
    out.extend_from_slice(&ck.header.train_steps.to_le_bytes());
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&blob);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn read_agent_checkpoint(bytes: &[u8]) -> Result<AgentCheckpoint, AgentError> {
    let bad = |m: &str| AgentError::CheckpointMismatch(m.to_string());
    if bytes.len() < 8 + 4 + 4 + 4 + 8 + 8 + 8 + 32 {
        return Err(bad("file too short"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }
    if &body[..8] != MAGIC {
        return Err(bad("not an agent checkpoint"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(body[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(8) != VERSION {
        return Err(bad("unsupported version"));
    }
    let header = AgentHeader {
        stage: u32_at(12),
        action_count: u32_at(16),
        epsilon_episode: u64_at(20),
        train_steps: u64_at(28),
    };
    let len = u64_at(36) as usize;
    let blob = body.get(44..).filter(|b| b.len() == len).ok_or_else(|| bad("truncated parameter blob"))?;
    let tensors = read_checkpoint(blob)?;
    Ok(AgentCheckpoint { header, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::Tensor;

    fn sample() -> AgentCheckpoint {
        AgentCheckpoint {
            header: AgentHeader {
                stage: 3,
                action_count: 4,
                epsilon_episode: 1234,
                train_steps: 98765,
            },
            tensors: vec![NamedTensor {
                name: "head.bias".into(),
                tensor: Tensor::vector(vec![0.5, -1.0, 2.0, 0.0]),
            }],
        }
    }

    #[test]
    fn roundtrip() {
        let ck = sample();
        assert_eq!(read_agent_checkpoint(&write_agent_checkpoint(&ck)).unwrap(), ck);
    }

    #[test]
    fn header_corruption_detected() {
        let mut bytes = write_agent_checkpoint(&sample());
        bytes[13] ^= 1;
        assert!(read_agent_checkpoint(&bytes).is_err());
        assert!(read_agent_checkpoint(&bytes[..20]).is_err());
    }
}
