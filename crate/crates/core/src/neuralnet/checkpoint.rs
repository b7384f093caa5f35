//! Binary parameter checkpoint.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "ICLNPARM"
//! version      u32      = 1
//! count        u32
//! per tensor:  name_len u32, name (utf-8), ndim u32, dims u64 × ndim, data f64 × prod(dims)
//! checksum     32 bytes SHA-256 over every preceding byte
//! ```

use sha2::{Digest, Sha256};

use super::{NetError, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ICLNPARM";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

pub fn write_checkpoint(tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        let shape = t.tensor.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for x in t.tensor.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_ref());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| NetError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Vec<NamedTensor>, NetError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 8 + DIGEST_LEN {
        return Err(NetError::Checkpoint("file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NetError::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(NetError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NetError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| NetError::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| NetError::Checkpoint("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push(NamedTensor {
            name,
            tensor: Tensor::from_vec(&shape, data)?,
        });
    }
    if r.pos != body.len() {
        return Err(NetError::Checkpoint("trailing bytes before checksum".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in any::<u64>(),
            name in "[a-z_.]{1,12}",
        ) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2))
                .collect();
            let t = NamedTensor { name, tensor: Tensor::from_vec(&[rows, cols], data).unwrap() };
            let bytes = write_checkpoint(std::slice::from_ref(&t));
            let back = read_checkpoint(&bytes).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0].name, &t.name);
            let same = back[0].tensor.data().iter().zip(t.tensor.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let t = NamedTensor {
            name: "w".into(),
            tensor: Tensor::vector(vec![1.0, 2.0]),
        };
        let mut bytes = write_checkpoint(&[t]);
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(read_checkpoint(&bytes), Err(NetError::Checkpoint(_))));
    }
}
