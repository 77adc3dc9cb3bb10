//! Bit-exact training-record container ("PREC").
//!
//! Layout, little-endian:
//!   magic "PREC" | u32 version=1 | u32 count, channels, patch_size |
//!   per record: u64 point id, u8 split tag,
//!               f32 features (C*S*S), f32 labels (5*S*S).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stratify::CLASS_COUNT;

pub const MAGIC: [u8; 4] = *b"PREC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SplitTag {
    Train = 0,
    Val = 1,
    Test = 2,
    Unassigned = 3,
}

impl SplitTag {
    pub fn from_u8(v: u8) -> Result<SplitTag> {
        match v {
            0 => Ok(SplitTag::Train),
            1 => Ok(SplitTag::Val),
            2 => Ok(SplitTag::Test),
            3 => Ok(SplitTag::Unassigned),
            other => Err(Error::Truncated(format!("invalid split tag {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

/// One training example: a feature patch and a one-hot label patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub point_id: u64,
    pub split: SplitTag,
    /// C x S x S, channel-major.
    pub features: Vec<f32>,
    /// 5 x S x S one-hot, class-major.
    pub labels: Vec<f32>,
}

impl SampleRecord {
    /// Class of the patch center pixel (argmax of the one-hot stack).
    pub fn center_class(&self, size: usize) -> u8 {
        let center = (size / 2) * size + size / 2;
        let plane = size * size;
        let mut best = 0u8;
        let mut best_v = f32::NEG_INFINITY;
        for c in 0..CLASS_COUNT {
            let v = self.labels[c * plane + center];
            if v > best_v {
                best_v = v;
                best = c as u8;
            }
        }
        best
    }
}

/// Uniformly-shaped collection of records.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    pub channels: usize,
    pub patch_size: usize,
    pub records: Vec<SampleRecord>,
}

impl RecordSet {
    pub fn new(channels: usize, patch_size: usize) -> Self {
        RecordSet { channels, patch_size, records: Vec::new() }
    }

    pub fn feature_len(&self) -> usize {
        self.channels * self.patch_size * self.patch_size
    }

    pub fn label_len(&self) -> usize {
        CLASS_COUNT * self.patch_size * self.patch_size
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.features.len() != self.feature_len() || r.labels.len() != self.label_len() {
                return Err(Error::ShapeMismatch(format!(
                    "record {i}: features {} labels {} (expected {} / {})",
                    r.features.len(),
                    r.labels.len(),
                    self.feature_len(),
                    self.label_len()
                )));
            }
        }
        Ok(())
    }
}

pub fn write_records(set: &RecordSet, path: &Path) -> Result<()> {
    set.validate()?;
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.records.len() as u32).to_le_bytes())?;
    w.write_all(&(set.channels as u32).to_le_bytes())?;
    w.write_all(&(set.patch_size as u32).to_le_bytes())?;
    for r in &set.records {
        w.write_all(&r.point_id.to_le_bytes())?;
        w.write_all(&[r.split as u8])?;
        for &v in &r.features {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &r.labels {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<RecordSet> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, found: version });
    }
    let count = read_u32(&mut r, "count")? as usize;
    let channels = read_u32(&mut r, "channels")? as usize;
    let patch_size = read_u32(&mut r, "patch size")? as usize;
    let mut set = RecordSet::new(channels, patch_size);
    let flen = set.feature_len();
    let llen = set.label_len();
    set.records.reserve(count);
    for i in 0..count {
        let mut id = [0u8; 8];
        read_exact(&mut r, &mut id, &format!("record {i} id"))?;
        let mut tag = [0u8; 1];
        read_exact(&mut r, &mut tag, &format!("record {i} split tag"))?;
        let features = read_f32s(&mut r, flen, &format!("record {i} features"))?;
        let labels = read_f32s(&mut r, llen, &format!("record {i} labels"))?;
        set.records.push(SampleRecord {
            point_id: u64::from_le_bytes(id),
            split: SplitTag::from_u8(tag[0])?,
            features,
            labels,
        });
    }
    Ok(set)
}

fn read_f32s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Truncated(what.to_string()))
}
