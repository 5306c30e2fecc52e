//! Versioned binary container shared by recordings, SVM models and network
//! checkpoints.
//!
//! Layout:
//!
//! ```text
//! magic      4 bytes  "PGC1"
//! header_len u64 LE   byte length of the JSON header
//! header     UTF-8 JSON {"format_version":1,"kind":..,"meta":..,"blocks":[{"name","dtype","len"}..]}
//! blocks     each block's samples, little-endian f32 or f64, in header order
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PGC1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum BlockData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl BlockData {
    fn dtype(&self) -> &'static str {
        match self {
            BlockData::F32(_) => "f32",
            BlockData::F64(_) => "f64",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockData::F32(v) => v.len(),
            BlockData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            BlockData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            BlockData::F64(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub data: BlockData,
}

impl Block {
    pub fn f64(name: impl Into<String>, data: Vec<f64>) -> Self {
        Self { name: name.into(), data: BlockData::F64(data) }
    }

    pub fn f32(name: impl Into<String>, data: Vec<f32>) -> Self {
        Self { name: name.into(), data: BlockData::F32(data) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    dtype: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
    meta: serde_json::Value,
    blocks: Vec<BlockHeader>,
}

impl Container {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self { kind: kind.into(), meta, blocks: Vec::new() }
    }

    pub fn push(&mut self, block: Block) {
        self.blocks.push(block);
    }

    pub fn block(&self, name: &str) -> Result<&BlockData> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| &b.data)
            .ok_or_else(|| Error::Container(format!("missing block {name:?}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockHeader { name: b.name.clone(), dtype: b.data.dtype().into(), len: b.data.len() })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = self.blocks.iter().map(|b| b.data.len() * 8).sum();
        let mut out = Vec::with_capacity(12 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for b in &self.blocks {
            match &b.data {
                BlockData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                BlockData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(12..12 + header_len)
            .ok_or_else(|| Error::Container("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Container(format!("unsupported format_version {}", header.format_version)));
        }
        let mut pos = 12 + header_len;
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for bh in header.blocks {
            let width = match bh.dtype.as_str() {
                "f32" => 4,
                "f64" => 8,
                other => return Err(Error::Container(format!("unknown dtype {other:?}"))),
            };
            let raw = bytes
                .get(pos..pos + bh.len * width)
                .ok_or_else(|| Error::Container(format!("truncated block {:?}", bh.name)))?;
            pos += bh.len * width;
            let data = if width == 4 {
                BlockData::F32(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
            } else {
                BlockData::F64(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
            };
            blocks.push(Block { name: bh.name, data });
        }
        if pos != bytes.len() {
            return Err(Error::Container("trailing bytes after last block".into()));
        }
        Ok(Self { kind: header.kind, meta: header.meta, blocks })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Read and check the `kind` tag.
    pub fn read_kind(path: &Path, kind: &str) -> Result<Self> {
        let c = Self::read(path)?;
        if c.kind != kind {
            return Err(Error::Container(format!("expected a {kind:?} container, found {:?}", c.kind)));
        }
        Ok(c)
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory and
/// an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
