//! Packed little-endian containers shared by every on-disk artifact.
//!
//! Layout: 4 magic bytes, then four `u32` fields `[count, width, height,
//! n_classes]`, then `count` `u16` class labels when `n_classes > 0`, then
//! `count * width * height` payload elements (row-major per record).
//! Float containers carry `f32` payload; mask containers carry `u8`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CORPUS_MAGIC: [u8; 4] = *b"SLC1";
pub const MASK_MAGIC: [u8; 4] = *b"SLM1";
pub const FEATURE_MAGIC: [u8; 4] = *b"SLF1";
pub const SIMILARITY_MAGIC: [u8; 4] = *b"SLS1";

/// Optional trailer holding newline-joined class names.
pub(crate) const NAMES_MAGIC: [u8; 4] = *b"NAMS";

const HEADER_LEN: u64 = 4 + 4 * 4;

/// Header shared by all packed containers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub magic: [u8; 4],
    pub count: u32,
    pub width: u32,
    pub height: u32,
    pub n_classes: u32,
}

impl Header {
    pub fn record_len(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// Payload element type of a container.
pub trait Element: Copy {
    const SIZE: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const SIZE: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Element for u8 {
    const SIZE: usize = 1;
    fn put(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn get(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

/// A fully decoded container.
#[derive(Debug, Clone, PartialEq)]
pub struct Container<T> {
    pub header: Header,
    pub labels: Option<Vec<u16>>,
    pub payload: Vec<T>,
    pub trailer: Vec<u8>,
}

pub fn encode<T: Element>(
    header: &Header,
    labels: Option<&[u16]>,
    payload: &[T],
    trailer: &[u8],
) -> Result<Vec<u8>> {
    let expected = header.count as u64 * header.record_len();
    if payload.len() as u64 != expected {
        return Err(Error::Shape(format!(
            "payload has {} elements, header declares {}",
            payload.len(),
            expected
        )));
    }
    match (header.n_classes, labels) {
        (0, None) => {}
        (0, Some(_)) => {
            return Err(Error::InvalidArgument(
                "labels supplied but n_classes is 0".into(),
            ))
        }
        (_, None) => {
            return Err(Error::InvalidArgument(
                "n_classes > 0 requires a label per record".into(),
            ))
        }
        (_, Some(l)) if l.len() != header.count as usize => {
            return Err(Error::Shape(format!(
                "{} labels for {} records",
                l.len(),
                header.count
            )))
        }
        _ => {}
    }
    let mut out =
        Vec::with_capacity(HEADER_LEN as usize + payload.len() * T::SIZE + trailer.len());
    out.extend_from_slice(&header.magic);
    for v in [header.count, header.width, header.height, header.n_classes] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = labels {
        for &l in labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    for &v in payload {
        v.put(&mut out);
    }
    out.extend_from_slice(trailer);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: u64) -> Result<&'a [u8]> {
        let available = (self.bytes.len() - self.pos) as u64;
        if n > available {
            return Err(Error::Truncated {
                offset: self.pos as u64,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n as usize];
        self.pos += n as usize;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode<T: Element>(bytes: &[u8], magic: [u8; 4]) -> Result<Container<T>> {
    let mut r = Reader { bytes, pos: 0 };
    let found = r.take(4)?;
    if found != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(&magic)
            ),
        });
    }
    let header = Header {
        magic,
        count: r.u32()?,
        width: r.u32()?,
        height: r.u32()?,
        n_classes: r.u32()?,
    };
    let labels = if header.n_classes > 0 {
        let start = r.pos as u64;
        let raw = r.take(header.count as u64 * 2)?;
        let labels: Vec<u16> = raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        if let Some(i) = labels
            .iter()
            .position(|&l| l == 0 || l as u32 > header.n_classes)
        {
            return Err(Error::Format {
                offset: start + 2 * i as u64,
                message: format!(
                    "class label {} outside 1..={}",
                    labels[i], header.n_classes
                ),
            });
        }
        Some(labels)
    } else {
        None
    };
    let n = header.count as u64 * header.record_len();
    let raw = r.take(n.saturating_mul(T::SIZE as u64))?;
    let payload = raw.chunks_exact(T::SIZE).map(T::get).collect();
    let trailer = bytes[r.pos..].to_vec();
    Ok(Container {
        header,
        labels,
        payload,
        trailer,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes a float container of `count` records of `width * height` values.
pub fn write_floats(
    path: &Path,
    magic: [u8; 4],
    dims: (usize, usize, usize),
    data: &[f32],
) -> Result<()> {
    let (count, width, height) = dims;
    let header = Header {
        magic,
        count: to_u32(count, "count")?,
        width: to_u32(width, "width")?,
        height: to_u32(height, "height")?,
        n_classes: 0,
    };
    write_file(path, &encode(&header, None, data, &[])?)
}

pub fn read_floats(path: &Path, magic: [u8; 4]) -> Result<Container<f32>> {
    decode(&read_file(path)?, magic)
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u32")))
}
