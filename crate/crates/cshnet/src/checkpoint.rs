//! Binary tensor container used by all checkpoint files.
//!
//! Layout (little endian throughout):
//!
//! ```text
//! magic          8 bytes, b"CSHKPT01"
//! meta_len       u32
//! meta           JSON, UTF-8
//! tensor_count   u32
//! per tensor, sorted by name:
//!   name_len     u16
//!   name         UTF-8
//!   dtype        u8, 1 = f32, 2 = f64
//!   ndim         u8
//!   dims         u32 each
//!   payload      dtype-sized values, row major
//! ```
//!
//! Tensors that survive an f32 round trip losslessly are stored as f32;
//! anything else falls back to f64. Parameters and optimizer moments are
//! quantized to f32 after every update, so trained state always takes the
//! compact path while loads stay bit exact either way.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::ArrayD;

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CSHKPT01";

const DTYPE_F32: u8 = 1;
const DTYPE_F64: u8 = 2;

fn fits_f32(t: &ArrayD<f64>) -> bool {
    t.iter().all(|&v| (v as f32) as f64 == v)
}

/// Serialize a metadata document plus named tensors to `path`.
///
/// Output bytes are a pure function of the inputs: map iteration is sorted
/// and the JSON value serializes with sorted keys, so save/load/save
/// round-trips are byte identical.
pub fn write_container(
    path: &Path,
    meta: &serde_json::Value,
    tensors: &BTreeMap<String, ArrayD<f64>>,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let meta_bytes = serde_json::to_vec(meta)
        .map_err(|e| Error::Checkpoint(format!("metadata serialization failed: {e}")))?;
    buf.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta_bytes);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        assert!(name.len() <= u16::MAX as usize, "tensor name too long");
        assert!(t.ndim() <= u8::MAX as usize);
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        let dtype = if fits_f32(t) { DTYPE_F32 } else { DTYPE_F64 };
        buf.push(dtype);
        buf.push(t.ndim() as u8);
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match dtype {
            DTYPE_F32 => {
                for &v in t.iter() {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            _ => {
                for &v in t.iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Read back a container written by [`write_container`].
pub fn read_container(path: &Path) -> Result<(serde_json::Value, BTreeMap<String, ArrayD<f64>>)> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a checkpoint file (bad magic)",
            path.display()
        )));
    }
    let meta_len = r.u32()? as usize;
    let meta: serde_json::Value = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| Error::Checkpoint(format!("corrupt metadata: {e}")))?;
    let count = r.u32()? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let dtype = r.u8()?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match dtype {
            DTYPE_F32 => r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            DTYPE_F64 => r
                .take(8 * n)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            other => {
                return Err(Error::Checkpoint(format!(
                    "tensor {name}: unknown dtype tag {other}"
                )))
            }
        };
        let t = ArrayD::from_shape_vec(shape, data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
        tensors.insert(name, t);
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok((meta, tensors))
}

/// Check that `got` provides exactly the tensors in `want` with matching
/// shapes. Reports the first offender in name order.
pub fn validate_tensor_set(
    want: &BTreeMap<String, ArrayD<f64>>,
    got: &BTreeMap<String, ArrayD<f64>>,
) -> Result<()> {
    for (name, t) in want {
        match got.get(name) {
            None => {
                return Err(Error::Checkpoint(format!("missing tensor {name}")));
            }
            Some(g) if g.shape() != t.shape() => {
                return Err(Error::Checkpoint(format!(
                    "tensor {name}: shape {:?} does not match expected {:?}",
                    g.shape(),
                    t.shape()
                )));
            }
            Some(_) => {}
        }
    }
    for name in got.keys() {
        if !want.contains_key(name) {
            return Err(Error::Checkpoint(format!("unexpected tensor {name}")));
        }
    }
    Ok(())
}
