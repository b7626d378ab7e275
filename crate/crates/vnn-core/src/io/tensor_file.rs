//! `VNNT` tensor files.
//!
//! ```text
//! magic   4 bytes  "VNNT"
//! version u16 LE   = 1
//! rank    u8       >= 1
//! dims    rank x u32 LE
//! payload product(dims) x f32 LE, row-major, last axis fastest
//! ```
//!
//! Values are widened f32 -> f64 on load, so a round trip reproduces the
//! stored values exactly at f32 precision. Format errors report the byte
//! offset of the problem.

use std::path::Path;

use crate::error::{Result, VnnError};
use crate::tensor::Tensor;

pub(crate) const TENSOR_MAGIC: &[u8; 4] = b"VNNT";
pub(crate) const FORMAT_VERSION: u16 = 1;

/// Byte reader that remembers its offset for error reporting.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset as u64
    }

    pub fn error(&self, message: impl Into<String>) -> VnnError {
        VnnError::Format {
            offset: self.offset(),
            message: message.into(),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(self.error(format!(
                "unexpected end of file: need {n} more bytes, have {}",
                self.bytes.len() - self.offset
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16_le(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32_le(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64_le(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn finish(&self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(self.error(format!(
                "{} trailing bytes after the payload",
                self.bytes.len() - self.offset
            )));
        }
        Ok(())
    }
}

/// Serialize a tensor into the `VNNT` byte layout.
pub fn encode_tensor(tensor: &Tensor) -> Result<Vec<u8>> {
    let shape = tensor.shape();
    if shape.len() > u8::MAX as usize {
        return Err(VnnError::Shape(format!(
            "rank {} exceeds the format's limit of 255",
            shape.len()
        )));
    }
    let mut bytes = Vec::with_capacity(7 + 4 * shape.len() + 4 * tensor.len());
    bytes.extend_from_slice(TENSOR_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.push(shape.len() as u8);
    for &dim in shape {
        let dim = u32::try_from(dim).map_err(|_| {
            VnnError::Shape(format!("extent {dim} exceeds the format's u32 range"))
        })?;
        bytes.extend_from_slice(&dim.to_le_bytes());
    }
    for &value in tensor.data() {
        bytes.extend_from_slice(&(value as f32).to_le_bytes());
    }
    Ok(bytes)
}

/// Parse a `VNNT` byte buffer.
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut reader = Reader::new(bytes);
    let magic = reader.take(4)?;
    if magic != TENSOR_MAGIC {
        return Err(VnnError::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {TENSOR_MAGIC:?}"),
        });
    }
    let version = reader.u16_le()?;
    if version != FORMAT_VERSION {
        return Err(VnnError::Format {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let rank = reader.u8()?;
    if rank == 0 {
        return Err(VnnError::Format {
            offset: 6,
            message: "rank must be at least 1".into(),
        });
    }
    let mut shape = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let dim = reader.u32_le()?;
        if dim == 0 {
            return Err(reader.error("zero extent"));
        }
        shape.push(dim as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(reader.f32_le()? as f64);
    }
    reader.finish()?;
    Tensor::from_vec(&shape, data)
}

pub fn save_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    Ok(std::fs::write(path, encode_tensor(tensor)?)?)
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&std::fs::read(path)?)
}
