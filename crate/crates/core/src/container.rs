//! The "ACGK" checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "ACGK"
//! version      u16      currently 1
//! kind         u8       0 = AC-GAN training state, 1 = surrogate classifier
//! iteration    u64
//! entry count  u32
//! manifest     per entry: u16 name length, UTF-8 name, u8 dtype
//!              (0 = f32, 1 = u64), u8 rank, rank × u32 dims
//! payloads     per entry, in manifest order: product(dims) values of dtype
//! rng          u8 present flag, then 56 bytes (32-byte key, u64 stream,
//!              u128 word position) when present
//! metadata     u32 length, UTF-8 `key = value` lines
//! crc32        u32 over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::RngState;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ACGK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ContainerKind {
    AcGan = 0,
    Classifier = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    U64(Vec<u64>),
}

impl Payload {
    fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::U64(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ContainerKind,
    pub iteration: u64,
    pub entries: Vec<Entry>,
    pub rng: Option<RngState>,
    pub meta: String,
}

impl Container {
    pub fn new(kind: ContainerKind, iteration: u64) -> Self {
        Self {
            kind,
            iteration,
            entries: Vec::new(),
            rng: None,
            meta: String::new(),
        }
    }

    pub fn push_f32(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push(Entry {
            name: name.into(),
            shape: shape.to_vec(),
            payload: Payload::F32(data),
        });
    }

    pub fn push_u64(&mut self, name: impl Into<String>, data: Vec<u64>) {
        self.entries.push(Entry {
            name: name.into(),
            shape: vec![data.len()],
            payload: Payload::U64(data),
        });
    }

    pub fn entry(&self, name: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no entry {name}")))
    }

    pub fn f32s(&self, name: &str) -> Result<(&[usize], &[f32])> {
        let e = self.entry(name)?;
        match &e.payload {
            Payload::F32(v) => Ok((&e.shape, v)),
            Payload::U64(_) => Err(Error::Format(format!("entry {name} is not f32"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match &self.entry(name)?.payload {
            Payload::U64(v) => Ok(v),
            Payload::F32(_) => Err(Error::Format(format!("entry {name} is not u64"))),
        }
    }

    pub fn entries_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Entry> {
        self.entries.iter().filter(move |e| e.name.starts_with(prefix))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.push(match e.payload {
                Payload::F32(_) => 0,
                Payload::U64(_) => 1,
            });
            out.push(e.shape.len() as u8);
            for &d in &e.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
        }
        for e in &self.entries {
            match &e.payload {
                Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                Payload::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        match &self.rng {
            Some(st) => {
                out.push(1);
                out.extend_from_slice(&st.to_bytes());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.as_bytes());
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 2 + 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not an ACGK checkpoint (bad magic)".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version > CHECKPOINT_VERSION || version == 0 {
            return Err(Error::Version {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader::new(&body[6..]);
        let kind = match r.u8()? {
            0 => ContainerKind::AcGan,
            1 => ContainerKind::Classifier,
            k => return Err(Error::Format(format!("unknown container kind {k}"))),
        };
        let iteration = r.u64()?;
        let count = r.u32()? as usize;
        let mut manifest = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("entry name is not UTF-8".into()))?;
            let dtype = r.u8()?;
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            manifest.push((name, dtype, shape));
        }
        let mut entries = Vec::with_capacity(manifest.len());
        for (name, dtype, shape) in manifest {
            let n: usize = shape.iter().product();
            let payload = match dtype {
                0 => Payload::F32(
                    r.take(n.checked_mul(4).ok_or_else(|| Error::Format("entry too large".into()))?)?
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                1 => Payload::U64(
                    r.take(n.checked_mul(8).ok_or_else(|| Error::Format("entry too large".into()))?)?
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                d => return Err(Error::Format(format!("entry {name}: unknown dtype {d}"))),
            };
            debug_assert_eq!(payload.len(), n);
            entries.push(Entry {
                name,
                shape,
                payload,
            });
        }
        let rng = match r.u8()? {
            0 => None,
            1 => Some(RngState::from_bytes(
                r.take(RngState::BYTES)?.try_into().unwrap(),
            )),
            f => return Err(Error::Format(format!("bad rng flag {f}"))),
        };
        let meta_len = r.u32()? as usize;
        let meta = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after metadata".into()));
        }
        Ok(Self {
            kind,
            iteration,
            entries,
            rng,
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated: wanted {n} bytes, {} left",
                self.bytes.len()
            )));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}
