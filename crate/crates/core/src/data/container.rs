//! The `ZSLD` tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "ZSLD"
//! version  u32      = 1
//! count    u32      number of tensors
//! per tensor:
//!   name_len u16, name (UTF-8)
//!   dtype    u8     1 = f32, 3 = i32
//!   ndim     u8
//!   dims     ndim × u32
//!   payload  row-major, 4 bytes per element
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ZSLD";
pub const VERSION: u32 = 1;

const DTYPE_F32: u8 = 1;
const DTYPE_I32: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A named n-dimensional tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: TensorData,
}

impl Tensor {
    pub fn f32(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            dims,
            data: TensorData::F32(data),
        }
    }

    pub fn i32(name: impl Into<String>, dims: Vec<u32>, data: Vec<i32>) -> Self {
        Self {
            name: name.into(),
            dims,
            data: TensorData::I32(data),
        }
    }

    /// 1-D i32 tensor.
    pub fn i32_vec(name: impl Into<String>, data: Vec<i32>) -> Self {
        let n = data.len() as u32;
        Self::i32(name, vec![n], data)
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

/// Ordered collection of tensors. Order is preserved through a round-trip.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub tensors: Vec<Tensor>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Tensor) {
        self.tensors.push(t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            if t.element_count() != t.data.len() {
                return Err(Error::Malformed(format!(
                    "tensor {:?}: dims {:?} imply {} elements, payload has {}",
                    t.name,
                    t.dims,
                    t.element_count(),
                    t.data.len()
                )));
            }
            let name = t.name.as_bytes();
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Malformed(format!("tensor name too long: {}", t.name)))?;
            let ndim = u8::try_from(t.dims.len())
                .map_err(|_| Error::Malformed(format!("too many dims on {}", t.name)))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            match &t.data {
                TensorData::F32(_) => out.push(DTYPE_F32),
                TensorData::I32(_) => out.push(DTYPE_I32),
            }
            out.push(ndim);
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            match &t.data {
                TensorData::F32(v) => v
                    .iter()
                    .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::I32(v) => v
                    .iter()
                    .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for i in 0..count {
            let name_len = r.u16(&format!("name length of tensor {i}"))? as usize;
            let name = std::str::from_utf8(r.take(name_len, &format!("name of tensor {i}"))?)
                .map_err(|_| Error::Malformed(format!("tensor {i} name is not UTF-8")))?
                .to_string();
            let dtype = r.u8(&format!("dtype of {name}"))?;
            let ndim = r.u8(&format!("ndim of {name}"))? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32(&format!("dims of {name}"))?);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
                .ok_or_else(|| Error::Malformed(format!("dims of {name} overflow")))?;
            let payload = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::Malformed(format!("dims of {name} overflow")))?,
                &format!("payload of {name}"),
            )?;
            let words = payload.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
            let data = match dtype {
                DTYPE_F32 => TensorData::F32(words.map(f32::from_le_bytes).collect()),
                DTYPE_I32 => TensorData::I32(words.map(i32::from_le_bytes).collect()),
                other => {
                    return Err(Error::Malformed(format!(
                        "tensor {name}: unknown dtype {other}"
                    )))
                }
            };
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                what: what.to_string(),
            }),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
