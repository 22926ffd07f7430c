//! Flat parameter containers and the gossip message payload.
//!
//! A [`ParamVector`] is one contiguous `f64` buffer split into named,
//! disjoint segments. It is the unit that nodes exchange and aggregate.
//! [`GossipModel`] wraps it with the metadata that travels alongside it.
//!
//! The binary encoding produced by [`GossipModel::encode`] is both the
//! simulated wire payload and the checkpoint file format:
//!
//! ```text
//! magic    b"GRPV"
//! version  u32 = 1
//! age      u64
//! samples  u64
//! owner    u32
//! nseg     u32
//! nseg x { name_len u16, name utf-8, offset u64, length u64 }
//! nvals    u64
//! nvals x f64
//! ```
//!
//! All integers and reals are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type NodeId = u32;

const MAGIC: &[u8; 4] = b"GRPV";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl ParamVector {
    /// Zero-filled vector with the given `(name, length)` segments laid out
    /// back to back.
    pub fn zeros(layout: &[(&str, usize)]) -> Self {
        let mut segments = Vec::with_capacity(layout.len());
        let mut offset = 0;
        for &(name, len) in layout {
            segments.push(Segment {
                name: name.to_string(),
                offset,
                len,
            });
            offset += len;
        }
        ParamVector {
            values: vec![0.0; offset],
            segments,
        }
    }

    /// Builds a vector from raw parts, checking that the segments tile the
    /// buffer exactly.
    pub fn from_parts(values: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        let mut expected = 0;
        for seg in &segments {
            if seg.offset != expected {
                return Err(Error::Wire(format!(
                    "segment {} starts at {} but previous segment ended at {}",
                    seg.name, seg.offset, expected
                )));
            }
            expected += seg.len;
        }
        if expected != values.len() {
            return Err(Error::Wire(format!(
                "segments cover {} values, buffer holds {}",
                expected,
                values.len()
            )));
        }
        Ok(ParamVector { values, segments })
    }

    /// Single anonymous segment covering `values`.
    pub fn from_flat(values: Vec<f64>) -> Self {
        let len = values.len();
        ParamVector {
            values,
            segments: vec![Segment {
                name: "flat".into(),
                offset: 0,
                len,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn find(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.find(name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let (offset, len) = self.find(name).map(|s| (s.offset, s.len))?;
        Some(&mut self.values[offset..offset + len])
    }

    /// Offset of a segment within the flat buffer.
    pub fn offset_of(&self, name: &str) -> Option<usize> {
        self.find(name).map(|s| s.offset)
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.values.len() == other.values.len() && self.segments == other.segments
    }

    pub fn check_layout(&self, other: &ParamVector) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::protocol(format!(
                "parameter layouts differ ({} vs {} values)",
                self.len(),
                other.len()
            )))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Number of local training passes a model has absorbed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelAge(pub u64);

impl ModelAge {
    pub fn bump(&mut self) {
        self.0 += 1;
    }
}

/// Shared parameters plus the metadata that travels with them.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipModel {
    pub params: ParamVector,
    pub age: ModelAge,
    /// Training-set size of the owner, used as the FedAvg weight.
    pub samples: u64,
    pub owner: NodeId,
}

impl GossipModel {
    pub fn new(params: ParamVector, owner: NodeId, samples: u64) -> Self {
        GossipModel {
            params,
            age: ModelAge(0),
            samples,
            owner,
        }
    }

    pub fn encoded_len(&self) -> usize {
        let header = 4 + 4 + 8 + 8 + 4 + 4;
        let table: usize = self
            .params
            .segments
            .iter()
            .map(|s| 2 + s.name.len() + 8 + 8)
            .sum();
        header + table + 8 + 8 * self.params.values.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.age.0.to_le_bytes());
        out.extend_from_slice(&self.samples.to_le_bytes());
        out.extend_from_slice(&self.owner.to_le_bytes());
        out.extend_from_slice(&(self.params.segments.len() as u32).to_le_bytes());
        for seg in &self.params.segments {
            let name = seg.name.as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(seg.offset as u64).to_le_bytes());
            out.extend_from_slice(&(seg.len as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.values.len() as u64).to_le_bytes());
        for v in &self.params.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Wire("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Wire(format!("unsupported version {version}")));
        }
        let age = ModelAge(r.u64()?);
        let samples = r.u64()?;
        let owner = r.u32()?;
        let nseg = r.u32()? as usize;
        let mut segments = Vec::with_capacity(nseg.min(64));
        for _ in 0..nseg {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Wire("segment name is not utf-8".into()))?
                .to_string();
            let offset = r.u64()? as usize;
            let len = r.u64()? as usize;
            segments.push(Segment { name, offset, len });
        }
        let nvals = r.u64()? as usize;
        if bytes.len().saturating_sub(r.pos) != nvals.saturating_mul(8) {
            return Err(Error::Wire(format!(
                "expected {} value bytes, found {}",
                nvals.saturating_mul(8),
                bytes.len() - r.pos
            )));
        }
        let values = r.buf[r.pos..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(GossipModel {
            params: ParamVector::from_parts(values, segments)?,
            age,
            samples,
            owner,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Wire("truncated payload".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
