//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic      b"HVNN"
//! version    u32 (= 1)
//! n_meta     u32, then n_meta x { key: str, value: str }
//! n_params   u32, then n_params x { name: str, rank: u32, dims: rank x u64, data: prod(dims) x f64 }
//! str        u32 byte length followed by UTF-8 bytes
//! ```
//!
//! Tensors are stored with rank 2. Trailing bytes are rejected.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HVNN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named parameter blocks plus string metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub params: Vec<(String, Tensor)>,
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> NnError {
    let context = context.into();
    move |source| NnError::Io { context, source }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            NnError::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| NnError::Checkpoint(format!("invalid UTF-8: {e}")))
    }
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore) -> Self {
        Self {
            metadata: BTreeMap::new(),
            params: store.iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Copy values into a store built with the same architecture.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        store.load_named(self.params.iter().map(|(n, t)| (n.as_str(), t)))
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| NnError::Checkpoint(format!("missing metadata key {key:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in &self.params {
            put_str(&mut out, name);
            out.extend_from_slice(&2u32.to_le_bytes());
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf, pos: 0 };
        if c.take(4)? != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = c.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut metadata = BTreeMap::new();
        for _ in 0..c.u32()? {
            let k = c.string()?;
            let v = c.string()?;
            metadata.insert(k, v);
        }
        let n = c.u32()?;
        let mut params = Vec::with_capacity(n.min(4096) as usize);
        for _ in 0..n {
            let name = c.string()?;
            let rank = c.u32()?;
            let dims = (0..rank).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
            let (rows, cols) = match dims.as_slice() {
                [] => (1, 1),
                [n] => (1, *n as usize),
                [r, cc] => (*r as usize, *cc as usize),
                _ => return Err(NnError::Checkpoint(format!("{name}: rank {rank} unsupported"))),
            };
            let count = rows.checked_mul(cols).ok_or_else(|| {
                NnError::Checkpoint(format!("{name}: shape overflow"))
            })?;
            if count.saturating_mul(8) > buf.len() - c.pos {
                return Err(NnError::Checkpoint(format!("{name}: truncated data")));
            }
            let data = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            params.push((name, Tensor::new(rows, cols, data)?));
        }
        if c.pos != buf.len() {
            return Err(NnError::Checkpoint(format!("{} trailing bytes", buf.len() - c.pos)));
        }
        Ok(Self { metadata, params })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes()).map_err(io_err("writing checkpoint"))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(io_err("reading checkpoint"))?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(format!("writing {}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(io_err(format!("reading {}", path.display())))?;
        Self::from_bytes(&buf)
    }
}
