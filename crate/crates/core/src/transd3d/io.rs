//! Weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TD3D"  u32 version
//! u32 n, k, s_A, s_B
//! u32 d_model, heads, d_mlp
//! u32 tensor count
//! per tensor: u16 name length, ASCII name, u32 rows, u32 cols,
//!             rows·cols f64 (row-major)
//! ```
//!
//! Tensors appear in the order of [`tensor_layout`].

use std::fs;
use std::path::Path;

use super::params::{tensor_layout, NetDims, NetworkParams};
use crate::constellation::SystemConfig;
use crate::ndiff::Tensor2D;
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"TD3D";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn write_params(params: &NetworkParams) -> Vec<u8> {
    let dims = &params.dims;
    let sys = &dims.system;
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    for v in [
        WEIGHTS_VERSION,
        sys.n as u32,
        sys.k as u32,
        sys.s_a as u32,
        sys.s_b as u32,
        dims.d_model as u32,
        dims.heads as u32,
        dims.d_mlp as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let layout = tensor_layout(dims);
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for ((name, _, _), t) in layout.iter().zip(params.tensors()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() < len {
            return Err(Error::Truncated(what.to_string()));
        }
        let (head, tail) = self.buf.split_at(len);
        self.buf = tail;
        Ok(head)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_params(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader { buf: bytes };
    if r.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::BadMagic("weights file"));
    }
    let version = r.u32("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: WEIGHTS_VERSION,
        });
    }
    let mut ints = [0usize; 7];
    for (i, v) in ints.iter_mut().enumerate() {
        *v = r.u32(if i < 4 {
            "system config"
        } else {
            "network dims"
        })? as usize;
    }
    let [n, k, s_a, s_b, d_model, heads, d_mlp] = ints;
    let system = SystemConfig::new(n, k, s_a, s_b)?;
    let dims = NetDims::new(system, d_model, heads, d_mlp)?;
    let layout = tensor_layout(&dims);

    let count = r.u32("tensor count")? as usize;
    if count != layout.len() {
        return Err(Error::TensorHeader {
            name: "<header>".into(),
            detail: format!("{count} tensors, dims imply {}", layout.len()),
        });
    }
    let mut tensors = Vec::with_capacity(count);
    for (expected, rows, cols) in &layout {
        let len = r.u16("tensor name length")? as usize;
        let name = String::from_utf8_lossy(r.take(len, "tensor name")?).into_owned();
        if name != *expected {
            return Err(Error::TensorHeader {
                name,
                detail: format!("expected tensor {expected}"),
            });
        }
        let (fr, fc) = (r.u32(&name)? as usize, r.u32(&name)? as usize);
        if (fr, fc) != (*rows, *cols) {
            return Err(Error::TensorHeader {
                name,
                detail: format!("stored as {fr}x{fc}, dims imply {rows}x{cols}"),
            });
        }
        let payload = r.take(rows * cols * 8, &name)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor2D::from_vec(*rows, *cols, data)?);
    }
    if !r.buf.is_empty() {
        return Err(Error::TensorHeader {
            name: "<end>".into(),
            detail: format!("{} trailing bytes", r.buf.len()),
        });
    }
    NetworkParams::from_tensors(dims, tensors)
}

pub fn save_params(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_params(params)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_params(&bytes)
}
