//! The `.nqcd` patch dataset format.
//!
//! Little-endian throughout. A 24-byte header
//!
//! ```text
//! "NQCD" | u32 version = 1 | u32 patch_dim = 32 | u32 channels = 2 | u64 record count
//! ```
//!
//! is followed by fixed-stride records
//!
//! ```text
//! u64 neuron_id | u64 reconstruction_id | u64 point_id | u8 label | u8 group | 6 pad bytes
//! 2 * 32^3 f32 payload (channel-major, then z, y, x) | u32 CRC-32 of the payload bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::{Patch, CHANNELS, PATCH_SIZE};

pub const MAGIC: &[u8; 4] = b"NQCD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
const META_LEN: usize = 32;
pub const PAYLOAD_LEN: usize = CHANNELS * PATCH_SIZE * PATCH_SIZE * PATCH_SIZE * 4;
pub const RECORD_LEN: usize = META_LEN + PAYLOAD_LEN + 4;
const PAYLOAD_VALUES: usize = PAYLOAD_LEN / 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Group {
    Poi = 0,
    MatchControl = 1,
    RandomControl = 2,
}

impl Group {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Group::Poi),
            1 => Some(Group::MatchControl),
            2 => Some(Group::RandomControl),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        (self == Group::Poi) as u8
    }
}

/// One labeled patch. `label` is 1 exactly for [`Group::Poi`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub neuron_id: u64,
    pub reconstruction_id: u64,
    pub point_id: u64,
    pub label: u8,
    pub group: Group,
    pub data: Vec<f32>,
}

impl SampleRecord {
    pub fn from_patch(neuron_id: u64, reconstruction_id: u64, group: Group, patch: Patch) -> Result<Self> {
        if patch.size != PATCH_SIZE || patch.data.len() != PAYLOAD_VALUES {
            return Err(Error::Format(format!(
                "records hold {PATCH_SIZE}^3 x {CHANNELS} patches, got size {}",
                patch.size
            )));
        }
        Ok(SampleRecord {
            neuron_id,
            reconstruction_id,
            point_id: patch.center_id,
            label: group.label(),
            group,
            data: patch.data,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.data.len() != PAYLOAD_VALUES {
            return Err(Error::Format(format!(
                "payload has {} values, expected {PAYLOAD_VALUES}",
                self.data.len()
            )));
        }
        if self.label != self.group.label() {
            return Err(Error::Format(format!(
                "label {} inconsistent with group {:?}",
                self.label, self.group
            )));
        }
        Ok(())
    }

    fn encode(&self, buf: &mut Vec<u8>) {
        buf.clear();
        buf.extend_from_slice(&self.neuron_id.to_le_bytes());
        buf.extend_from_slice(&self.reconstruction_id.to_le_bytes());
        buf.extend_from_slice(&self.point_id.to_le_bytes());
        buf.push(self.label);
        buf.push(self.group as u8);
        buf.extend_from_slice(&[0u8; 6]);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf[META_LEN..]);
        buf.extend_from_slice(&crc.to_le_bytes());
    }

    fn decode(index: u64, buf: &[u8]) -> Result<Self> {
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        let payload = &buf[META_LEN..META_LEN + PAYLOAD_LEN];
        let stored = u32::from_le_bytes(buf[META_LEN + PAYLOAD_LEN..].try_into().unwrap());
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::Checksum {
                record: index,
                stored,
                computed,
            });
        }
        let group = Group::from_u8(buf[25])
            .ok_or_else(|| Error::Format(format!("record {index}: unknown group {}", buf[25])))?;
        let record = SampleRecord {
            neuron_id: u64_at(0),
            reconstruction_id: u64_at(8),
            point_id: u64_at(16),
            label: buf[24],
            group,
            data: payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        record.validate().map_err(|e| Error::Format(format!("record {index}: {e}")))?;
        Ok(record)
    }
}

fn header(count: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&(PATCH_SIZE as u32).to_le_bytes());
    h[12..16].copy_from_slice(&(CHANNELS as u32).to_le_bytes());
    h[16..24].copy_from_slice(&count.to_le_bytes());
    h
}

/// Appending writer; the record count is patched in by [`finish`](Self::finish).
pub struct NqcdWriter<W: Write + Seek> {
    inner: W,
    count: u64,
    buf: Vec<u8>,
}

impl NqcdWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        NqcdWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write + Seek> NqcdWriter<W> {
    pub fn new(mut inner: W) -> Result<Self> {
        inner.write_all(&header(0))?;
        Ok(NqcdWriter {
            inner,
            count: 0,
            buf: Vec::with_capacity(RECORD_LEN),
        })
    }

    pub fn push(&mut self, record: &SampleRecord) -> Result<()> {
        record.validate()?;
        record.encode(&mut self.buf);
        self.inner.write_all(&self.buf)?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.seek(SeekFrom::Start(0))?;
        self.inner.write_all(&header(self.count))?;
        self.inner.seek(SeekFrom::End(0))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Random-access reader; each record read is checksum-verified.
pub struct NqcdReader<R: Read + Seek> {
    inner: R,
    count: u64,
    buf: Vec<u8>,
}

impl NqcdReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        NqcdReader::new(BufReader::new(file), len)
    }
}

impl<R: Read + Seek> NqcdReader<R> {
    /// `len` is the total byte length of the underlying stream.
    pub fn new(mut inner: R, len: u64) -> Result<Self> {
        if len < HEADER_LEN as u64 {
            return Err(Error::Format("truncated header".into()));
        }
        let mut h = [0u8; HEADER_LEN];
        inner.read_exact(&mut h)?;
        if &h[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let field = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
        if field(4) != VERSION {
            return Err(Error::Format(format!("unsupported version {}", field(4))));
        }
        if field(8) != PATCH_SIZE as u32 || field(12) != CHANNELS as u32 {
            return Err(Error::Format(format!(
                "unsupported patch shape {}^3 x {}",
                field(8),
                field(12)
            )));
        }
        let count = u64::from_le_bytes(h[16..24].try_into().unwrap());
        let body = len - HEADER_LEN as u64;
        let expected = count
            .checked_mul(RECORD_LEN as u64)
            .ok_or_else(|| Error::Format("record count overflows".into()))?;
        if body < expected {
            return Err(Error::Format(format!(
                "truncated file: header declares {count} records, body holds {} bytes",
                body
            )));
        }
        if body > expected {
            return Err(Error::Format(format!(
                "record count mismatch: header declares {count} records but {} extra bytes follow",
                body - expected
            )));
        }
        Ok(NqcdReader {
            inner,
            count,
            buf: vec![0; RECORD_LEN],
        })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn read(&mut self, index: u64) -> Result<SampleRecord> {
        if index >= self.count {
            return Err(Error::InvalidArgument(format!(
                "record {index} out of range ({} records)",
                self.count
            )));
        }
        self.inner
            .seek(SeekFrom::Start(HEADER_LEN as u64 + index * RECORD_LEN as u64))?;
        self.inner.read_exact(&mut self.buf)?;
        SampleRecord::decode(index, &self.buf)
    }

    pub fn read_all(&mut self) -> Result<Vec<SampleRecord>> {
        (0..self.count).map(|i| self.read(i)).collect()
    }
}

pub fn export_dataset(records: &[SampleRecord], path: &Path) -> Result<()> {
    let mut w = NqcdWriter::create(path)?;
    for r in records {
        w.push(r)?;
    }
    w.finish()?;
    Ok(())
}

pub fn import_dataset(path: &Path) -> Result<Vec<SampleRecord>> {
    NqcdReader::open(path)?.read_all()
}
