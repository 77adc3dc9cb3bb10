//! Bit-exact internal raster container ("PSCP").
//!
//! Layout, little-endian throughout:
//!   magic "PSCP" | u32 version=1 | u32 width, height, band_count |
//!   f64 origin_x, origin_y, pixel_size_x, pixel_size_y |
//!   crs_tag (u16 length + UTF-8) |
//!   per band: name (u16 length + UTF-8), nodata flag u8 + f64 |
//!   band-major f32 payload.
//!
//! read(write(r)) is the identity on every field and payload byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Band, GeoGrid, Raster};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PSCP";
pub const VERSION: u32 = 1;

pub fn write_fixture(raster: &Raster, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_to(raster, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_to<W: Write>(raster: &Raster, w: &mut W) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let g = &raster.grid;
    w.write_all(&(g.width as u32).to_le_bytes())?;
    w.write_all(&(g.height as u32).to_le_bytes())?;
    w.write_all(&(raster.band_count() as u32).to_le_bytes())?;
    for v in [g.origin_x, g.origin_y, g.pixel_size_x, g.pixel_size_y] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_string(w, &g.crs_tag)?;
    for b in &raster.bands {
        if b.name.is_empty() {
            return Err(Error::EmptyBandName);
        }
        write_string(w, &b.name)?;
        match b.nodata {
            Some(nd) => {
                w.write_all(&[1u8])?;
                w.write_all(&(nd as f64).to_le_bytes())?;
            }
            None => {
                w.write_all(&[0u8])?;
                w.write_all(&0f64.to_le_bytes())?;
            }
        }
    }
    for &v in raster.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_fixture(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path)?;
    read_from(&mut BufReader::new(file))
}

pub fn read_from<R: Read>(r: &mut R) -> Result<Raster> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, found: version });
    }
    let width = read_u32(r, "width")? as usize;
    let height = read_u32(r, "height")? as usize;
    let band_count = read_u32(r, "band count")? as usize;
    let origin_x = read_f64(r, "origin_x")?;
    let origin_y = read_f64(r, "origin_y")?;
    let pixel_size_x = read_f64(r, "pixel_size_x")?;
    let pixel_size_y = read_f64(r, "pixel_size_y")?;
    let crs_tag = read_string(r, "crs tag")?;
    let mut bands = Vec::with_capacity(band_count);
    for _ in 0..band_count {
        let name = read_string(r, "band name")?;
        if name.is_empty() {
            return Err(Error::EmptyBandName);
        }
        let mut flag = [0u8; 1];
        read_exact(r, &mut flag, "nodata flag")?;
        let nd = read_f64(r, "nodata value")?;
        bands.push(Band::new(name, if flag[0] != 0 { Some(nd as f32) } else { None }));
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(band_count))
        .ok_or_else(|| Error::Truncated("implausible dimensions".into()))?;
    let mut values = vec![0f32; n];
    let mut buf = [0u8; 4];
    for v in values.iter_mut() {
        read_exact(r, &mut buf, "payload")?;
        *v = f32::from_le_bytes(buf);
    }
    let grid = GeoGrid::new(origin_x, origin_y, pixel_size_x, pixel_size_y, width, height, crs_tag)?;
    Raster::new(grid, bands, values)
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(Error::Other(format!("string too long: {} bytes", bytes.len())));
    }
    w.write_all(&(bytes.len() as u16).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let mut len = [0u8; 2];
    read_exact(r, &mut len, what)?;
    let mut buf = vec![0u8; u16::from_le_bytes(len) as usize];
    read_exact(r, &mut buf, what)?;
    String::from_utf8(buf).map_err(|_| Error::Truncated(format!("{what}: invalid utf-8")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, what)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Truncated(what.to_string()))
}
