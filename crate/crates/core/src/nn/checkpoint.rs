//! Self-describing binary checkpoint.
//!
//! ```text
//! magic      8 bytes  "MSCKPT01"
//! header     u32 length + UTF-8 JSON {"arch": ArchSpec, "metadata": {..}}
//! count      u32 number of tensors
//! tensor     u32 name length, name, u32 rank, u64 dims…, f64 values
//! ```
//!
//! All integers and floats are little-endian; tensors appear in name order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_policy, ArchSpec, ParamSet};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::seeded;

const MAGIC: &[u8; 8] = b"MSCKPT01";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: ArchSpec,
    pub metadata: BTreeMap<String, String>,
    pub params: ParamSet,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ArchSpec,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header { arch: self.arch.clone(), metadata: self.metadata.clone() })
            .expect("header serializes");
        let mut out = Vec::with_capacity(64 + header.len() + 8 * self.params.n_scalars());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in self.params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&2u32.to_le_bytes());
            for d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint { offset: 0, message: "bad magic".into() });
        }
        let header_len = r.u32()? as usize;
        let header_at = r.pos;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| Error::Checkpoint { offset: header_at, message: format!("header: {e}") })?;
        let count = r.u32()?;
        let mut params = ParamSet::new();
        for _ in 0..count {
            let at = r.pos;
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint { offset: at, message: "tensor name is not UTF-8".into() })?
                .to_string();
            let rank = r.u32()?;
            if rank != 2 {
                return Err(Error::Checkpoint { offset: at, message: format!("unsupported rank {rank}") });
            }
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows.checked_mul(cols).filter(|n| n.checked_mul(8).is_some()).ok_or(Error::Checkpoint {
                offset: at,
                message: "tensor dimensions overflow".into(),
            })?;
            let raw = r.take(n * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let tensor = Tensor::new(rows, cols, data).expect("length checked");
            params
                .insert(name.clone(), tensor)
                .map_err(|_| Error::Checkpoint { offset: at, message: format!("duplicate tensor `{name}`") })?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint { offset: r.pos, message: "trailing bytes".into() });
        }
        Ok(Checkpoint { arch: header.arch, metadata: header.metadata, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads and checks that the file describes `expected` and that its
    /// tensors have exactly the architecture's names and shapes.
    pub fn load_for(path: &Path, expected: &ArchSpec) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if &ckpt.arch != expected {
            return Err(Error::Schema(format!(
                "checkpoint holds a {} network ({:?}), expected {} ({:?})",
                ckpt.arch.kind, ckpt.arch, expected.kind, expected
            )));
        }
        ckpt.check_params()?;
        Ok(ckpt)
    }

    /// Verifies the tensors against a fresh initialization of `arch`.
    pub fn check_params(&self) -> Result<()> {
        let reference = build_policy(&self.arch)?.init_params(&mut seeded(0));
        if !reference.congruent_with(&self.params) {
            return Err(Error::Schema("checkpoint tensors do not match the declared architecture".into()));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Checkpoint {
            offset: self.pos,
            message: format!("truncated: wanted {n} bytes, {} left", self.bytes.len() - self.pos),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ArchKind;

    fn sample(kind: ArchKind) -> Checkpoint {
        let arch = ArchSpec { hidden_size: 8, layer_sizes: vec![8, 4], ..ArchSpec::new(kind, 12, 3, 4) };
        let params = build_policy(&arch).unwrap().init_params(&mut seeded(4));
        Checkpoint { arch, metadata: [("algorithm".into(), "test".into())].into(), params }
    }

    #[test]
    fn bytes_round_trip() {
        for kind in ArchKind::ALL {
            let c = sample(kind);
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            assert_eq!(back, c);
            back.check_params().unwrap();
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = sample(ArchKind::Mlp).to_bytes();
        for cut in [0, 5, 12, bytes.len() / 2, bytes.len() - 1] {
            match Checkpoint::from_bytes(&bytes[..cut]) {
                Err(Error::Checkpoint { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        let mut bytes = sample(ArchKind::Rnn).to_bytes();
        bytes.push(0);
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint { .. })));
    }
}
