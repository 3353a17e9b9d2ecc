//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "FLOWGNN\0"
//! version    u32
//! meta_len   u32, then meta_len bytes of UTF-8 JSON metadata
//! count      u32
//! per tensor:
//!   name_len u32, then name bytes
//!   ndim     u32, then ndim x u64 dims
//!   data     prod(dims) x f64
//! ```

use std::fs;
use std::path::Path;

use crate::nn::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FLOWGNN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub metadata: String,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        out.extend_from_slice(self.metadata.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let metadata = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| NnError::Checkpoint("metadata is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| NnError::Checkpoint("tensor too large".into()))?)?;
            let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(NnError::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| NnError::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let ck = Checkpoint { metadata: "{}".into(), tensors: vec![NamedTensor { name: "w".into(), shape: vec![1], data: vec![1.5] }] };
        let b = ck.to_bytes();
        assert_eq!(&b[..8], b"FLOWGNN\0");
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[b.len() - 8..], &1.5f64.to_le_bytes());
        assert!(Checkpoint::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[8] = 9;
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(meta in ".{0,20}", tensors in proptest::collection::vec(("[a-z.0-9]{1,12}", 0usize..4, 0usize..5), 0..5)) {
            let ck = Checkpoint {
                metadata: meta,
                tensors: tensors.into_iter().map(|(name, r, c)| NamedTensor {
                    name,
                    shape: vec![r, c],
                    data: (0..r * c).map(|i| i as f64 * -0.25).collect(),
                }).collect(),
            };
            prop_assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
        }
    }
}
