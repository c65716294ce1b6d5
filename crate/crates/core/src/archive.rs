//! Named-tensor archive: a small little-endian container for volumes and
//! network parameters.
//!
//! ```text
//! "ATSR" | version u32 | entry count u32
//! per entry: name length u32 | UTF-8 name | dtype u8 | rank u32 | dims u64 * rank | values
//! ```
//!
//! Real values are `f64`; complex values are interleaved `(re, im)` pairs.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::diffengine::{DType, Data, Tensor};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const MAGIC: &[u8; 4] = b"ATSR";
pub const VERSION: u32 = 1;

/// Ordered list of uniquely named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    entries: Vec<(String, Tensor)>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Archive(format!("duplicate entry {name:?}")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Like [`Archive::get`] but a missing entry is an error.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Archive(format!("missing entry {name:?}")))
    }

    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        let pos = self
            .entries
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Archive(format!("missing entry {name:?}")))?;
        Ok(self.entries.remove(pos).1)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32_len(self.entries.len(), "entry count")?.to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&u32_len(name.len(), "name length")?.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.dtype().code());
            out.extend_from_slice(&u32_len(t.shape().len(), "rank")?.to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match t.data() {
                Data::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                Data::Complex(v) => v.iter().for_each(|z| {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Archive("bad magic, not a tensor archive".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Archive(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut archive = Archive::new();
        let mut seen = HashSet::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|e| Error::Archive(format!("entry name is not UTF-8: {e}")))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(Error::Archive(format!("duplicate entry {name:?}")));
            }
            let code = r.take(1)?[0];
            let dtype = DType::from_code(code)
                .ok_or_else(|| Error::Archive(format!("{name}: unknown dtype code {code}")))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                let d = usize::try_from(r.u64()?)
                    .map_err(|_| Error::Archive(format!("{name}: dimension overflows")))?;
                shape.push(d);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Archive(format!("{name}: size overflows")))?;
            let width = match dtype {
                DType::Real64 => 8,
                DType::Complex128 => 16,
            };
            let nbytes = numel
                .checked_mul(width)
                .ok_or_else(|| Error::Archive(format!("{name}: size overflows")))?;
            let payload = r.take(nbytes).map_err(|_| {
                Error::Archive(format!(
                    "{name}: declared {nbytes} payload bytes, {} remain",
                    r.remaining()
                ))
            })?;
            let values = payload.chunks_exact(8).map(le_f64);
            let tensor = match dtype {
                DType::Real64 => Tensor::real(shape, values.collect())?,
                DType::Complex128 => {
                    let flat: Vec<f64> = values.collect();
                    let z = flat.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
                    Tensor::complex(shape, z)?
                }
            };
            archive.entries.push((name, tensor));
        }
        if r.remaining() != 0 {
            return Err(Error::Archive(format!(
                "{} trailing bytes after the last entry",
                r.remaining()
            )));
        }
        Ok(archive)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Archive(msg) => Error::Archive(format!("{}: {msg}", path.display())),
            e => e,
        })
    }
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Archive(format!("{what} {n} does not fit in 32 bits")))
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8-byte chunk"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Archive(format!(
                "truncated: needed {n} bytes at offset {}, {} remain",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
