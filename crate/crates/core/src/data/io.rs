//! `ICG1` dataset files.
//!
//! Little-endian layout: magic `ICG1`, then `u32` N, C, H, W, K, then
//! `N·C·H·W` `f32` pixels row-major, then N `u32` labels.

use std::fs;
use std::path::Path;

use super::ImageDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"ICG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset(),
            message: message.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated: need {n} bytes, {} remain",
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.buf.len() < 4 || &self.buf[..4] != magic {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic".into(),
            });
        }
        self.pos = 4;
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn header(r: &mut Reader<'_>) -> Result<DatasetHeader> {
    r.magic(DATASET_MAGIC)?;
    let mut dims = [0usize; 5];
    for (i, d) in dims.iter_mut().enumerate() {
        let at = r.offset();
        *d = r.u32()? as usize;
        if *d == 0 {
            let name = ["N", "C", "H", "W", "K"][i];
            return Err(Error::Format {
                offset: at,
                message: format!("{name} must be positive"),
            });
        }
    }
    let [n, c, h, w, k] = dims;
    Ok(DatasetHeader { n, c, h, w, k })
}

pub fn encode_dataset(dataset: &ImageDataset) -> Result<Vec<u8>> {
    let s = dataset.images().shape();
    let dims = [s[0], s[1], s[2], s[3], dataset.num_clusters()];
    let mut out = Vec::with_capacity(24 + 4 * dataset.images().len() + 4 * dataset.len());
    out.extend_from_slice(DATASET_MAGIC);
    for d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Validation(format!("extent {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in dataset.images().data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for &l in dataset.labels() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<ImageDataset> {
    let mut r = Reader::new(bytes);
    let DatasetHeader { n, c, h, w, k } = header(&mut r)?;
    let len = n * c * h * w;
    let mut pixels = Vec::with_capacity(len);
    for _ in 0..len {
        let at = r.offset();
        let v = r.f32()? as f64;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Format {
                offset: at,
                message: format!("pixel {v} out of range [0,1]"),
            });
        }
        pixels.push(v);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset();
        let l = r.u32()? as usize;
        if l >= k {
            return Err(Error::Format {
                offset: at,
                message: format!("label out of range: {l} >= K = {k}"),
            });
        }
        labels.push(l);
    }
    r.finish()?;
    ImageDataset::new(Tensor::new(vec![n, c, h, w], pixels)?, labels, k)
}

pub fn write_dataset(dataset: &ImageDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(dataset)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<ImageDataset> {
    decode_dataset(&fs::read(path)?)
}

/// Reads only the header, checking the file is long enough for the payload.
pub fn read_dataset_header(path: impl AsRef<Path>) -> Result<DatasetHeader> {
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    let hdr = header(&mut r)?;
    let payload = 4 * (hdr.n * hdr.c * hdr.h * hdr.w + hdr.n);
    r.take(payload)?;
    r.finish()?;
    Ok(hdr)
}
