//! Minimal GeoTIFF codec: strip-based classic TIFF, uncompressed or deflate.
//!
//! Reads single- or multi-band files in chunky or planar layout with uint,
//! int or float samples (8..64 bit), horizontal-differencing predictor, and
//! the GeoTIFF affine tags (ModelPixelScale + ModelTiepoint, or an
//! axis-aligned ModelTransformation). Values are converted to f32 and the
//! GDAL nodata tag is honored. Writes planar f32 with one strip per band.
//!
//! Tiled layouts, rotated geotransforms and exotic compressions are out of
//! scope and rejected with distinct error codes.

use std::io::Read;
use std::path::Path;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression as Flate;
use std::io::Write as _;

use super::{Band, GeoGrid, Raster};
use crate::error::{Error, Result};

// TIFF tags
const T_WIDTH: u16 = 256;
const T_HEIGHT: u16 = 257;
const T_BITS: u16 = 258;
const T_COMPRESSION: u16 = 259;
const T_PHOTOMETRIC: u16 = 262;
const T_STRIP_OFFSETS: u16 = 273;
const T_SAMPLES_PER_PIXEL: u16 = 277;
const T_ROWS_PER_STRIP: u16 = 278;
const T_STRIP_BYTE_COUNTS: u16 = 279;
const T_PLANAR: u16 = 284;
const T_PREDICTOR: u16 = 317;
const T_TILE_WIDTH: u16 = 322;
const T_SAMPLE_FORMAT: u16 = 339;
const T_MODEL_PIXEL_SCALE: u16 = 33550;
const T_MODEL_TIEPOINT: u16 = 33922;
const T_MODEL_TRANSFORM: u16 = 34264;
const T_GEO_KEYS: u16 = 34735;
const T_GEO_ASCII: u16 = 34737;
const T_GDAL_NODATA: u16 = 42113;

const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const KEY_PROJECTED_CS_TYPE: u16 = 3072;
const KEY_CITATION: u16 = 1026;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiffCompression {
    None,
    Deflate,
}

// ---------------------------------------------------------------------------
// Reader
// ---------------------------------------------------------------------------

pub fn read_geotiff(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let data = std::fs::read(path)?;
    parse_geotiff(&data, path)
}

struct Cursor<'a> {
    data: &'a [u8],
    le: bool,
    path: &'a Path,
}

#[derive(Debug, Clone)]
struct IfdEntry {
    tag: u16,
    field_type: u16,
    count: usize,
    raw: [u8; 4],
}

impl<'a> Cursor<'a> {
    fn err(&self, detail: impl Into<String>) -> Error {
        Error::Malformed { path: self.path.to_path_buf(), detail: detail.into() }
    }

    fn bytes(&self, off: usize, len: usize) -> Result<&'a [u8]> {
        self.data.get(off..off + len).ok_or_else(|| self.err(format!("read past end at {off}+{len}")))
    }

    fn u16_at(&self, off: usize) -> Result<u16> {
        let b = self.bytes(off, 2)?;
        Ok(if self.le { u16::from_le_bytes([b[0], b[1]]) } else { u16::from_be_bytes([b[0], b[1]]) })
    }

    fn u32_at(&self, off: usize) -> Result<u32> {
        let b = self.bytes(off, 4)?;
        let a = [b[0], b[1], b[2], b[3]];
        Ok(if self.le { u32::from_le_bytes(a) } else { u32::from_be_bytes(a) })
    }

    fn f64_at(&self, off: usize) -> Result<f64> {
        let b = self.bytes(off, 8)?;
        let a: [u8; 8] = b.try_into().unwrap();
        Ok(if self.le { f64::from_le_bytes(a) } else { f64::from_be_bytes(a) })
    }

    fn type_size(field_type: u16) -> usize {
        match field_type {
            1 | 2 | 6 | 7 => 1,
            3 | 8 => 2,
            4 | 9 | 11 => 4,
            5 | 10 | 12 => 8,
            _ => 0,
        }
    }

    /// Offset of an entry's value block (inline if it fits in 4 bytes).
    fn value_offset(&self, e: &IfdEntry, entry_pos: usize) -> Result<usize> {
        let size = Self::type_size(e.field_type) * e.count;
        if size <= 4 {
            Ok(entry_pos + 8)
        } else {
            let a = [e.raw[0], e.raw[1], e.raw[2], e.raw[3]];
            let off = if self.le { u32::from_le_bytes(a) } else { u32::from_be_bytes(a) };
            Ok(off as usize)
        }
    }
}

struct Ifd {
    entries: Vec<(usize, IfdEntry)>, // (entry position, entry)
}

impl Ifd {
    fn find(&self, tag: u16) -> Option<&(usize, IfdEntry)> {
        self.entries.iter().find(|(_, e)| e.tag == tag)
    }
}

fn read_ifd(c: &Cursor, offset: usize) -> Result<Ifd> {
    let n = c.u16_at(offset)? as usize;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let pos = offset + 2 + i * 12;
        let tag = c.u16_at(pos)?;
        let field_type = c.u16_at(pos + 2)?;
        let count = c.u32_at(pos + 4)? as usize;
        let raw = c.bytes(pos + 8, 4)?;
        entries.push((pos, IfdEntry { tag, field_type, count, raw: raw.try_into().unwrap() }));
    }
    Ok(Ifd { entries })
}

fn values_u64(c: &Cursor, pos: usize, e: &IfdEntry) -> Result<Vec<u64>> {
    let off = c.value_offset(e, pos)?;
    let size = Cursor::type_size(e.field_type);
    let mut out = Vec::with_capacity(e.count);
    for i in 0..e.count {
        let p = off + i * size;
        let v = match e.field_type {
            1 | 7 => c.bytes(p, 1)?[0] as u64,
            3 => c.u16_at(p)? as u64,
            4 => c.u32_at(p)? as u64,
            _ => return Err(c.err(format!("unexpected type {} for tag {}", e.field_type, e.tag))),
        };
        out.push(v);
    }
    Ok(out)
}

fn values_f64(c: &Cursor, pos: usize, e: &IfdEntry) -> Result<Vec<f64>> {
    let off = c.value_offset(e, pos)?;
    let mut out = Vec::with_capacity(e.count);
    for i in 0..e.count {
        match e.field_type {
            12 => out.push(c.f64_at(off + i * 8)?),
            11 => {
                let bits = c.u32_at(off + i * 4)?;
                out.push(f32::from_bits(bits) as f64);
            }
            _ => return Err(c.err(format!("unexpected type {} for tag {}", e.field_type, e.tag))),
        }
    }
    Ok(out)
}

fn value_ascii(c: &Cursor, pos: usize, e: &IfdEntry) -> Result<String> {
    let off = c.value_offset(e, pos)?;
    let raw = c.bytes(off, e.count)?;
    let end = raw.iter().position(|&b| b == 0).unwrap_or(raw.len());
    Ok(String::from_utf8_lossy(&raw[..end]).into_owned())
}

fn parse_geotiff(data: &[u8], path: &Path) -> Result<Raster> {
    if data.len() < 8 {
        return Err(Error::Malformed { path: path.to_path_buf(), detail: "file shorter than tiff header".into() });
    }
    let le = match &data[0..2] {
        b"II" => true,
        b"MM" => false,
        _ => return Err(Error::Malformed { path: path.to_path_buf(), detail: "not a tiff (bad byte order mark)".into() }),
    };
    let c = Cursor { data, le, path };
    if c.u16_at(2)? != 42 {
        return Err(c.err("not a classic tiff (magic != 42)"));
    }
    let ifd_off = c.u32_at(4)? as usize;
    let ifd = read_ifd(&c, ifd_off)?;

    if ifd.find(T_TILE_WIDTH).is_some() {
        return Err(Error::UnsupportedTiff { path: path.to_path_buf(), detail: "tiled layout".into() });
    }

    let get_u64 = |tag: u16| -> Result<Option<Vec<u64>>> {
        match ifd.find(tag) {
            Some((pos, e)) => Ok(Some(values_u64(&c, *pos, e)?)),
            None => Ok(None),
        }
    };
    let one = |tag: u16, default: u64| -> Result<u64> {
        Ok(get_u64(tag)?.and_then(|v| v.first().copied()).unwrap_or(default))
    };

    let width = one(T_WIDTH, 0)? as usize;
    let height = one(T_HEIGHT, 0)? as usize;
    if width == 0 || height == 0 {
        return Err(c.err("missing image dimensions"));
    }
    let spp = one(T_SAMPLES_PER_PIXEL, 1)? as usize;
    let bits_list = get_u64(T_BITS)?.unwrap_or_else(|| vec![1]);
    let bits = bits_list[0] as usize;
    if bits_list.iter().any(|&b| b as usize != bits) {
        return Err(Error::UnsupportedTiff { path: path.to_path_buf(), detail: "mixed bits per sample".into() });
    }
    let compression = one(T_COMPRESSION, 1)? as u16;
    if !matches!(compression, 1 | 8 | 32946) {
        return Err(Error::UnsupportedCompression {
            path: path.to_path_buf(),
            detail: format!("tiff compression code {compression}"),
        });
    }
    let planar = one(T_PLANAR, 1)? as u16;
    let predictor = one(T_PREDICTOR, 1)? as u16;
    let sample_format = get_u64(T_SAMPLE_FORMAT)?.map(|v| v[0] as u16).unwrap_or(1);
    if !matches!(sample_format, 1 | 2 | 3) {
        return Err(Error::UnsupportedTiff { path: path.to_path_buf(), detail: format!("sample format {sample_format}") });
    }
    if predictor == 3 || (predictor == 2 && sample_format == 3) {
        return Err(Error::UnsupportedTiff { path: path.to_path_buf(), detail: "floating point predictor".into() });
    }
    if predictor > 2 {
        return Err(Error::UnsupportedTiff { path: path.to_path_buf(), detail: format!("predictor {predictor}") });
    }
    match (sample_format, bits) {
        (1 | 2, 8 | 16 | 32) | (3, 32) | (3, 64) => {}
        _ => {
            return Err(Error::UnsupportedTiff {
                path: path.to_path_buf(),
                detail: format!("sample format {sample_format} with {bits} bits"),
            })
        }
    }

    let rows_per_strip = one(T_ROWS_PER_STRIP, height as u64)? as usize;
    let offsets = get_u64(T_STRIP_OFFSETS)?.ok_or_else(|| c.err("missing strip offsets"))?;
    let counts = get_u64(T_STRIP_BYTE_COUNTS)?.ok_or_else(|| c.err("missing strip byte counts"))?;
    if offsets.len() != counts.len() {
        return Err(c.err("strip offsets / byte counts length mismatch"));
    }

    // Geotransform.
    let grid = read_geotransform(&c, &ifd, width, height, path)?;

    // Decode strips into a contiguous sample buffer (native layout).
    let bytes_per = bits / 8;
    let strips_per_band = height.div_ceil(rows_per_strip);
    let expected_strips = if planar == 2 { strips_per_band * spp } else { strips_per_band };
    if offsets.len() < expected_strips {
        return Err(c.err(format!("expected {expected_strips} strips, found {}", offsets.len())));
    }

    let mut native = vec![0u8; width * height * spp * bytes_per];
    for s in 0..expected_strips {
        let raw = c.bytes(offsets[s] as usize, counts[s] as usize)?;
        let (band, strip_in_band) = if planar == 2 { (s / strips_per_band, s % strips_per_band) } else { (0, s) };
        let rows_here = rows_per_strip.min(height - strip_in_band * rows_per_strip);
        let row_values = if planar == 2 { width } else { width * spp };
        let expected_len = rows_here * row_values * bytes_per;
        let mut decoded = match compression {
            1 => raw.to_vec(),
            _ => {
                let mut out = Vec::with_capacity(expected_len);
                ZlibDecoder::new(raw)
                    .read_to_end(&mut out)
                    .map_err(|e| c.err(format!("deflate strip {s}: {e}")))?;
                out
            }
        };
        if decoded.len() < expected_len {
            return Err(Error::Truncated(format!("strip {s}: {} of {expected_len} bytes", decoded.len())));
        }
        decoded.truncate(expected_len);
        if predictor == 2 {
            undo_horizontal_predictor(&mut decoded, rows_here, row_values, bytes_per, le, if planar == 2 { 1 } else { spp });
        }
        let dst_off = if planar == 2 {
            (band * width * height + strip_in_band * rows_per_strip * width) * bytes_per
        } else {
            strip_in_band * rows_per_strip * width * spp * bytes_per
        };
        native[dst_off..dst_off + expected_len].copy_from_slice(&decoded);
    }

    // Convert to f32, band-major.
    let pixels = width * height;
    let mut values = vec![0f32; spp * pixels];
    let read_sample = |idx: usize| -> f32 {
        let p = idx * bytes_per;
        let b = &native[p..p + bytes_per];
        sample_to_f32(b, bits, sample_format, le)
    };
    if planar == 2 {
        for (i, v) in values.iter_mut().enumerate() {
            *v = read_sample(i);
        }
    } else {
        for px in 0..pixels {
            for band in 0..spp {
                values[band * pixels + px] = read_sample(px * spp + band);
            }
        }
    }

    let nodata = match ifd.find(T_GDAL_NODATA) {
        Some((pos, e)) => value_ascii(&c, *pos, e)?.trim().parse::<f32>().ok(),
        None => None,
    };
    let bands = (0..spp).map(|i| Band::new(format!("b{}", i + 1), nodata)).collect();
    Raster::new(grid, bands, values)
}

fn sample_to_f32(b: &[u8], bits: usize, format: u16, le: bool) -> f32 {
    macro_rules! num {
        ($t:ty) => {{
            let mut a = [0u8; std::mem::size_of::<$t>()];
            a.copy_from_slice(b);
            if le {
                <$t>::from_le_bytes(a)
            } else {
                <$t>::from_be_bytes(a)
            }
        }};
    }
    match (format, bits) {
        (1, 8) => b[0] as f32,
        (1, 16) => num!(u16) as f32,
        (1, 32) => num!(u32) as f32,
        (2, 8) => b[0] as i8 as f32,
        (2, 16) => num!(i16) as f32,
        (2, 32) => num!(i32) as f32,
        (3, 32) => f32::from_bits(num!(u32)),
        (3, 64) => f64::from_bits(num!(u64)) as f32,
        _ => unreachable!("filtered by caller"),
    }
}

fn undo_horizontal_predictor(buf: &mut [u8], rows: usize, row_values: usize, bytes_per: usize, le: bool, stride: usize) {
    for r in 0..rows {
        let row = &mut buf[r * row_values * bytes_per..(r + 1) * row_values * bytes_per];
        for i in stride..row_values {
            let prev = read_uint(&row[(i - stride) * bytes_per..], bytes_per, le);
            let cur = read_uint(&row[i * bytes_per..], bytes_per, le);
            let sum = cur.wrapping_add(prev);
            write_uint(&mut row[i * bytes_per..], sum, bytes_per, le);
        }
    }
}

fn read_uint(b: &[u8], n: usize, le: bool) -> u32 {
    match n {
        1 => b[0] as u32,
        2 => {
            if le {
                u16::from_le_bytes([b[0], b[1]]) as u32
            } else {
                u16::from_be_bytes([b[0], b[1]]) as u32
            }
        }
        4 => {
            let a = [b[0], b[1], b[2], b[3]];
            if le {
                u32::from_le_bytes(a)
            } else {
                u32::from_be_bytes(a)
            }
        }
        _ => unreachable!(),
    }
}

fn write_uint(b: &mut [u8], v: u32, n: usize, le: bool) {
    match n {
        1 => b[0] = v as u8,
        2 => {
            let a = if le { (v as u16).to_le_bytes() } else { (v as u16).to_be_bytes() };
            b[..2].copy_from_slice(&a);
        }
        4 => {
            let a = if le { v.to_le_bytes() } else { v.to_be_bytes() };
            b[..4].copy_from_slice(&a);
        }
        _ => unreachable!(),
    }
}

fn read_geotransform(c: &Cursor, ifd: &Ifd, width: usize, height: usize, path: &Path) -> Result<GeoGrid> {
    let scale = ifd.find(T_MODEL_PIXEL_SCALE);
    let tie = ifd.find(T_MODEL_TIEPOINT);
    let (origin_x, origin_y, psx, psy) = if let (Some((sp, se)), Some((tp, te))) = (scale, tie) {
        let s = values_f64(c, *sp, se)?;
        let t = values_f64(c, *tp, te)?;
        if s.len() < 2 || t.len() < 6 {
            return Err(c.err("short geotransform tags"));
        }
        let (psx, psy) = (s[0], s[1]);
        let origin_x = t[3] - t[0] * psx;
        let origin_y = t[4] + t[1] * psy;
        (origin_x, origin_y, psx, psy)
    } else if let Some((mp, me)) = ifd.find(T_MODEL_TRANSFORM) {
        let m = values_f64(c, *mp, me)?;
        if m.len() < 16 {
            return Err(c.err("short model transformation"));
        }
        if m[1] != 0.0 || m[4] != 0.0 {
            return Err(Error::UnsupportedTiff { path: path.to_path_buf(), detail: "rotated geotransform".into() });
        }
        (m[3], m[7], m[0], -m[5])
    } else {
        return Err(Error::MissingGeotransform(path.to_path_buf()));
    };

    let crs_tag = read_crs(c, ifd)?;
    GeoGrid::new(origin_x, origin_y, psx, psy, width, height, crs_tag)
}

fn read_crs(c: &Cursor, ifd: &Ifd) -> Result<String> {
    let Some((kp, ke)) = ifd.find(T_GEO_KEYS) else {
        return Ok("unknown".into());
    };
    let keys = values_u64(c, *kp, ke)?;
    let ascii = match ifd.find(T_GEO_ASCII) {
        Some((ap, ae)) => value_ascii(c, *ap, ae)?,
        None => String::new(),
    };
    let mut citation = None;
    for chunk in keys.chunks(4).skip(1) {
        if chunk.len() < 4 {
            break;
        }
        let (key, loc, count, value) = (chunk[0] as u16, chunk[1] as u16, chunk[2] as usize, chunk[3]);
        match key {
            KEY_PROJECTED_CS_TYPE | KEY_GEOGRAPHIC_TYPE if loc == 0 => {
                return Ok(format!("EPSG:{value}"));
            }
            KEY_CITATION if loc == T_GEO_ASCII => {
                let start = value as usize;
                if start + count <= ascii.len() {
                    citation = Some(ascii[start..start + count].trim_end_matches('|').to_string());
                }
            }
            _ => {}
        }
    }
    Ok(citation.unwrap_or_else(|| "unknown".into()))
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

/// Write a raster as planar float32 GeoTIFF, one strip per band.
pub fn write_geotiff(raster: &Raster, path: &Path, compression: TiffCompression) -> Result<()> {
    let g = &raster.grid;
    let (w, h, spp) = (g.width, g.height, raster.band_count());
    let pixels = w * h;

    // Strip payloads, band-major.
    let mut strips: Vec<Vec<u8>> = Vec::with_capacity(spp);
    for b in 0..spp {
        let mut raw = Vec::with_capacity(pixels * 4);
        for &v in raster.band_values(b) {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        strips.push(match compression {
            TiffCompression::None => raw,
            TiffCompression::Deflate => {
                let mut enc = ZlibEncoder::new(Vec::new(), Flate::new(6));
                enc.write_all(&raw)?;
                enc.finish()?
            }
        });
    }

    // EPSG geokeys when the tag parses, otherwise a citation string.
    let epsg: Option<u32> = g
        .crs_tag
        .strip_prefix("EPSG:")
        .and_then(|s| s.parse().ok());
    let citation = if epsg.is_none() && !g.crs_tag.is_empty() {
        let mut s = g.crs_tag.clone();
        s.push('|');
        s.push('\0');
        Some(s)
    } else {
        None
    };
    let geo_keys: Vec<u16> = {
        let mut keys: Vec<[u16; 4]> = vec![[1024, 0, 1, 1], [1025, 0, 1, 1]];
        if let Some(code) = epsg {
            keys.push([KEY_PROJECTED_CS_TYPE, 0, 1, code as u16]);
        }
        if let Some(c) = &citation {
            keys.push([KEY_CITATION, T_GEO_ASCII, c.len() as u16, 0]);
        }
        let mut flat = vec![1, 1, 0, keys.len() as u16];
        for k in keys {
            flat.extend_from_slice(&k);
        }
        flat
    };

    let nodata_ascii: Option<Vec<u8>> = raster.bands[0].nodata.map(|nd| {
        let mut s = format!("{nd}");
        s.push('\0');
        s.into_bytes()
    });

    // File layout: header | strip data | IFD | overflow values.
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(b"II");
    out.extend_from_slice(&42u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // IFD offset patched below

    let mut strip_offsets = Vec::with_capacity(spp);
    let mut strip_counts = Vec::with_capacity(spp);
    for s in &strips {
        if out.len() % 2 == 1 {
            out.push(0);
        }
        strip_offsets.push(out.len() as u32);
        strip_counts.push(s.len() as u32);
        out.extend_from_slice(s);
    }
    if out.len() % 2 == 1 {
        out.push(0);
    }
    let ifd_offset = out.len() as u32;
    out[4..8].copy_from_slice(&ifd_offset.to_le_bytes());

    // Build entries (tag order must be ascending).
    enum Val {
        Shorts(Vec<u16>),
        Longs(Vec<u32>),
        Doubles(Vec<f64>),
        Ascii(Vec<u8>),
    }
    let mut entries: Vec<(u16, Val)> = vec![
        (T_WIDTH, Val::Longs(vec![w as u32])),
        (T_HEIGHT, Val::Longs(vec![h as u32])),
        (T_BITS, Val::Shorts(vec![32; spp])),
        (
            T_COMPRESSION,
            Val::Shorts(vec![match compression {
                TiffCompression::None => 1,
                TiffCompression::Deflate => 8,
            }]),
        ),
        (T_PHOTOMETRIC, Val::Shorts(vec![1])),
        (T_STRIP_OFFSETS, Val::Longs(strip_offsets)),
        (T_SAMPLES_PER_PIXEL, Val::Shorts(vec![spp as u16])),
        (T_ROWS_PER_STRIP, Val::Longs(vec![h as u32])),
        (T_STRIP_BYTE_COUNTS, Val::Longs(strip_counts)),
        (T_PLANAR, Val::Shorts(vec![2])),
        (T_SAMPLE_FORMAT, Val::Shorts(vec![3; spp])),
        (T_MODEL_PIXEL_SCALE, Val::Doubles(vec![g.pixel_size_x, g.pixel_size_y, 0.0])),
        (
            T_MODEL_TIEPOINT,
            Val::Doubles(vec![0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0]),
        ),
        (T_GEO_KEYS, Val::Shorts(geo_keys)),
    ];
    if let Some(c) = citation {
        entries.push((T_GEO_ASCII, Val::Ascii(c.into_bytes())));
    }
    if let Some(nd) = nodata_ascii {
        entries.push((T_GDAL_NODATA, Val::Ascii(nd)));
    }
    entries.sort_by_key(|(tag, _)| *tag);

    let n = entries.len();
    out.extend_from_slice(&(n as u16).to_le_bytes());
    let entries_start = out.len();
    out.resize(out.len() + n * 12, 0);
    out.extend_from_slice(&0u32.to_le_bytes()); // next IFD = none

    // Write each entry, spilling oversized values past the IFD.
    for (i, (tag, val)) in entries.iter().enumerate() {
        let pos = entries_start + i * 12;
        let (ftype, count, bytes): (u16, u32, Vec<u8>) = match val {
            Val::Shorts(v) => (3, v.len() as u32, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Val::Longs(v) => (4, v.len() as u32, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Val::Doubles(v) => (12, v.len() as u32, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Val::Ascii(v) => (2, v.len() as u32, v.clone()),
        };
        out[pos..pos + 2].copy_from_slice(&tag.to_le_bytes());
        out[pos + 2..pos + 4].copy_from_slice(&ftype.to_le_bytes());
        out[pos + 4..pos + 8].copy_from_slice(&count.to_le_bytes());
        if bytes.len() <= 4 {
            out[pos + 8..pos + 8 + bytes.len()].copy_from_slice(&bytes);
        } else {
            if out.len() % 2 == 1 {
                out.push(0);
            }
            let off = out.len() as u32;
            out[pos + 8..pos + 12].copy_from_slice(&off.to_le_bytes());
            out.extend_from_slice(&bytes);
        }
    }

    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::NODATA;

    fn sample_raster() -> Raster {
        let grid = GeoGrid::new(500_000.0, 3_060_000.0, 10.0, 10.0, 7, 5, "EPSG:32645").unwrap();
        let mut values = Vec::new();
        for b in 0..3 {
            for i in 0..35 {
                values.push((b * 100 + i) as f32 * 0.5 - 3.0);
            }
        }
        Raster::new(
            grid,
            vec![
                Band::new("b1", Some(NODATA)),
                Band::new("b2", Some(NODATA)),
                Band::new("b3", Some(NODATA)),
            ],
            values,
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_uncompressed_and_deflate() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_raster();
        for (name, comp) in [("u.tif", TiffCompression::None), ("d.tif", TiffCompression::Deflate)] {
            let path = dir.path().join(name);
            write_geotiff(&r, &path, comp).unwrap();
            let back = read_geotiff(&path).unwrap();
            assert_eq!(back.grid, r.grid);
            assert_eq!(back.values(), r.values());
            assert_eq!(back.bands[0].nodata, Some(NODATA));
            assert_eq!(back.band_count(), 3);
        }
    }

    #[test]
    fn constant_single_band() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(0.0, 20.0, 10.0, 10.0, 2, 2, "EPSG:32645").unwrap();
        let r = Raster::new(grid, vec![Band::new("b1", None)], vec![5.0; 4]).unwrap();
        let path = dir.path().join("c.tif");
        write_geotiff(&r, &path, TiffCompression::None).unwrap();
        let back = read_geotiff(&path).unwrap();
        assert!(back.values().iter().all(|&v| v == 5.0));
        assert_eq!(back.grid.crs_tag, "EPSG:32645");
    }

    #[test]
    fn nodata_flagging_from_tag() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(0.0, 20.0, 10.0, 10.0, 2, 2, "EPSG:32645").unwrap();
        let r = Raster::new(grid, vec![Band::new("b1", Some(0.0))], vec![1.0, 0.0, 2.0, 3.0]).unwrap();
        let path = dir.path().join("nd.tif");
        write_geotiff(&r, &path, TiffCompression::None).unwrap();
        let back = read_geotiff(&path).unwrap();
        assert_eq!(back.bands[0].nodata, Some(0.0));
        assert!(back.is_nodata(0, 1, 0));
        assert!(!back.is_nodata(0, 0, 0));
    }

    #[test]
    fn missing_file_is_distinct_error() {
        let err = read_geotiff(Path::new("/nonexistent/x.tif")).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn missing_geotransform_is_distinct_error() {
        // Hand-build a minimal valid tiff without geo tags.
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(0.0, 10.0, 10.0, 10.0, 1, 1, "EPSG:32645").unwrap();
        let r = Raster::new(grid, vec![Band::new("b1", None)], vec![1.0]).unwrap();
        let path = dir.path().join("geo.tif");
        write_geotiff(&r, &path, TiffCompression::None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Blank out the ModelPixelScale and ModelTiepoint tags in place.
        let c = Cursor { data: &bytes, le: true, path: &path };
        let ifd_off = c.u32_at(4).unwrap() as usize;
        let ifd = read_ifd(&c, ifd_off).unwrap();
        let mut patches = Vec::new();
        for (pos, e) in &ifd.entries {
            if e.tag == T_MODEL_PIXEL_SCALE || e.tag == T_MODEL_TIEPOINT {
                patches.push(*pos);
            }
        }
        for pos in patches {
            bytes[pos..pos + 2].copy_from_slice(&60000u16.to_le_bytes());
        }
        let stripped = dir.path().join("nogeo.tif");
        std::fs::write(&stripped, &bytes).unwrap();
        let err = read_geotiff(&stripped).unwrap_err();
        assert!(matches!(err, Error::MissingGeotransform(_)));
    }

    #[test]
    fn unsupported_compression_is_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(0.0, 10.0, 10.0, 10.0, 1, 1, "EPSG:32645").unwrap();
        let r = Raster::new(grid, vec![Band::new("b1", None)], vec![1.0]).unwrap();
        let path = dir.path().join("lzw.tif");
        write_geotiff(&r, &path, TiffCompression::None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let c = Cursor { data: &bytes, le: true, path: &path };
        let ifd_off = c.u32_at(4).unwrap() as usize;
        let ifd = read_ifd(&c, ifd_off).unwrap();
        let (pos, _) = ifd.find(T_COMPRESSION).unwrap();
        // compression value lives at entry+8 (inline SHORT)
        bytes[pos + 8..pos + 10].copy_from_slice(&5u16.to_le_bytes());
        let lzw = dir.path().join("lzw2.tif");
        std::fs::write(&lzw, &bytes).unwrap();
        let err = read_geotiff(&lzw).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCompression { .. }));
    }

    #[test]
    fn constant_image_reads_back_value() {
        // 1-band 2x2 constant 5.0 written then read: all values 5.0.
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(100.0, 200.0, 4.77, 4.77, 2, 2, "EPSG:32645").unwrap();
        let r = Raster::new(grid, vec![Band::new("b1", None)], vec![5.0; 4]).unwrap();
        let path = dir.path().join("five.tif");
        write_geotiff(&r, &path, TiffCompression::Deflate).unwrap();
        let back = read_geotiff(&path).unwrap();
        assert_eq!(back.values(), &[5.0, 5.0, 5.0, 5.0]);
        assert!((back.grid.pixel_size_x - 4.77).abs() < 1e-12);
    }
}
