//! The "ACGD" dataset container.
//!
//! ```text
//! magic    4 bytes "ACGD"
//! version  u16 (1)
//! N        u32   image count
//! H, W     u16, u16
//! C        u16   channels
//! K        u16   class count
//! pixels   N·C·H·W u8, image-major, then channel, row, column
//! labels   N × u16
//! crc32    u32 over every preceding byte
//! ```
//!
//! All integers are little-endian. Class names are not stored; loaded
//! datasets name their classes `class_<id>`.

use std::fs;
use std::path::Path;

use crate::container::{write_atomic, Reader};
use crate::data::{LabeledImageDataset, SplitTag};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"ACGD";
pub const DATASET_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 4 + 2 * 4;

pub fn dataset_to_bytes(ds: &LabeledImageDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let narrow = |v: usize, what: &str| -> Result<u16> {
        u16::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} exceeds u16")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + ds.pixels.len() + 2 * ds.len() + 4);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(
        &u32::try_from(ds.len())
            .map_err(|_| Error::invalid("too many images"))?
            .to_le_bytes(),
    );
    out.extend_from_slice(&narrow(ds.height, "height")?.to_le_bytes());
    out.extend_from_slice(&narrow(ds.width, "width")?.to_le_bytes());
    out.extend_from_slice(&narrow(ds.channels, "channels")?.to_le_bytes());
    out.extend_from_slice(&narrow(ds.num_classes(), "class count")?.to_le_bytes());
    out.extend_from_slice(&ds.pixels);
    for &l in &ds.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn dataset_from_bytes(bytes: &[u8], split: SplitTag) -> Result<LabeledImageDataset> {
    if bytes.len() < HEADER_LEN + 4 || &bytes[..4] != DATASET_MAGIC {
        return Err(Error::Format("not an ACGD dataset (bad magic or too short)".into()));
    }
    let mut r = Reader::new(&bytes[4..HEADER_LEN]);
    let version = r.u16()?;
    if version == 0 || version > DATASET_VERSION {
        return Err(Error::Version {
            found: version,
            supported: DATASET_VERSION,
        });
    }
    let n = r.u32()? as usize;
    let h = r.u16()? as usize;
    let w = r.u16()? as usize;
    let c = r.u16()? as usize;
    let k = r.u16()? as usize;
    let expected = HEADER_LEN + n * c * h * w + 2 * n + 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "header describes {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let px_end = HEADER_LEN + n * c * h * w;
    let pixels = body[HEADER_LEN..px_end].to_vec();
    let labels = body[px_end..]
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    LabeledImageDataset::new(
        (c, h, w),
        pixels,
        labels,
        (0..k).map(|i| format!("class_{i}")).collect(),
        split,
    )
}

pub fn save_dataset(ds: &LabeledImageDataset, path: &Path) -> Result<()> {
    write_atomic(path, &dataset_to_bytes(ds)?)
}

pub fn load_dataset(path: &Path, split: SplitTag) -> Result<LabeledImageDataset> {
    dataset_from_bytes(&fs::read(path)?, split)
}
