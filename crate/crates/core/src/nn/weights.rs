//! Binary weight container.
//!
//! Layout (little endian): magic `RCHW`, `u32` version, `u32` header length
//! and JSON header, `u32` block count, then per block a `u16`-prefixed
//! UTF-8 name, `u8` rank, `u64` dims and `f64` values; a CRC-32 of all
//! preceding bytes closes the file.

use std::fs;
use std::path::Path;

use super::{NnError, Param, Tensor};
use crate::scalar::Real;

pub const WEIGHT_MAGIC: [u8; 4] = *b"RCHW";
pub const WEIGHT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl WeightBlock {
    pub fn from_param<T: Real>(p: &Param<T>) -> Self {
        Self {
            name: p.name.clone(),
            shape: p.value.shape.clone(),
            values: p.value.data.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_vec(
            &self.shape,
            self.values.iter().map(|v| T::lit(*v)).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightFile {
    pub header: serde_json::Value,
    pub blocks: Vec<WeightBlock>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.buf.len() - self.pos < n {
            return Err(NnError::CorruptFile(format!(
                "unexpected end of data at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl WeightFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&WEIGHT_MAGIC);
        out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        let header = serde_json::to_vec(&self.header).expect("JSON value serialises");
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.push(b.shape.len() as u8);
            for d in &b.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &b.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, NnError> {
        if buf.len() < 12 {
            return Err(NnError::CorruptFile("file too short".into()));
        }
        if buf[..4] != WEIGHT_MAGIC {
            return Err(NnError::CorruptFile("bad magic".into()));
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != WEIGHT_VERSION {
            return Err(NnError::Version(version));
        }
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(NnError::Checksum);
        }
        let hlen = r.u32()? as usize;
        let header = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| NnError::CorruptFile(format!("header: {e}")))?;
        let count = r.u32()?;
        let mut blocks = Vec::new();
        for _ in 0..count {
            let nlen = r.u16()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|_| NnError::CorruptFile("block name is not UTF-8".into()))?;
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(
                n.checked_mul(8)
                    .ok_or_else(|| NnError::CorruptFile("block size".into()))?,
            )?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blocks.push(WeightBlock {
                name,
                shape,
                values,
            });
        }
        if r.pos != body.len() {
            return Err(NnError::CorruptFile("trailing bytes".into()));
        }
        Ok(Self { header, blocks })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Copies stored values into `params`, matching by position, name and
    /// shape.
    pub fn restore<T: Real>(&self, params: &mut [&mut Param<T>]) -> Result<(), NnError> {
        if params.len() != self.blocks.len() {
            return Err(NnError::CorruptFile(format!(
                "{} parameter blocks stored, {} expected",
                self.blocks.len(),
                params.len()
            )));
        }
        for (p, b) in params.iter_mut().zip(&self.blocks) {
            if p.name != b.name || p.value.shape != b.shape {
                return Err(NnError::CorruptFile(format!(
                    "block `{}` {:?} does not match parameter `{}` {:?}",
                    b.name, b.shape, p.name, p.value.shape
                )));
            }
            p.value = b.to_tensor();
        }
        Ok(())
    }
}
