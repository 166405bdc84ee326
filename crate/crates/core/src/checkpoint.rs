//! `ICK1` checkpoint files: an ordered list of named `f64` tensors.
//!
//! Little-endian layout: magic `ICK1`, `u32` count, then per tensor a `u32`
//! name length, UTF-8 name, `u32` rank, `u32` extents and the `f64` values.

use std::fs;
use std::path::Path;

use crate::data::Reader;
use crate::error::{Error, Result};
use crate::optim::Parameter;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ICK1";

/// Named tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_params<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> Self {
        Self {
            entries: params
                .into_iter()
                .map(|p| (p.name().to_owned(), p.value().clone()))
                .collect(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Overwrites every parameter from the entry of the same name.
    pub fn restore<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>) -> Result<()> {
        for p in params {
            let value = self
                .get(p.name())
                .ok_or_else(|| Error::Validation(format!("checkpoint has no tensor {:?}", p.name())))?;
            p.set_value(value.clone())?;
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let u32_of = |v: usize| {
            u32::try_from(v).map_err(|_| Error::Validation(format!("{v} exceeds u32")))
        };
        out.extend_from_slice(&u32_of(self.entries.len())?.to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&u32_of(name.len())?.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&u32_of(t.shape().len())?.to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&u32_of(d)?.to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(CHECKPOINT_MAGIC)?;
        let count = r.u32()?;
        let mut ck = Self::new();
        for _ in 0..count {
            let at = r.offset();
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format {
                    offset: at,
                    message: "tensor name is not UTF-8".into(),
                })?
                .to_owned();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let at = r.offset();
            let size: usize = shape.iter().product();
            if rank == 0 || size == 0 {
                return Err(Error::Format {
                    offset: at,
                    message: format!("tensor {name:?} has an empty shape"),
                });
            }
            let mut data = Vec::with_capacity(size);
            for _ in 0..size {
                data.push(r.f64()?);
            }
            ck.entries.push((name, Tensor::new(shape, data)?));
        }
        r.finish()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.encode()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}
