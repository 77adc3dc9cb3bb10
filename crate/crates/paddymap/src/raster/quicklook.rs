//! 8-bit paletted PNG quicklooks for class maps, binary maps and agreement
//! maps.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::Raster;
use crate::error::{Error, Result};

/// Fixed 5-entry class palette: rice, cropland, forest, built-up, other.
pub const CLASS_PALETTE: [[u8; 3]; 5] = [
    [215, 25, 28],   // rice: red
    [253, 174, 97],  // cropland: orange
    [26, 150, 65],   // forest: green
    [128, 128, 128], // built-up: gray
    [43, 131, 186],  // other: blue
];

/// Plasma-like ramp for 0..N scalar maps (binary, agreement).
pub const RAMP_PALETTE: [[u8; 3]; 5] = [
    [13, 8, 135],
    [126, 3, 168],
    [204, 71, 120],
    [248, 149, 64],
    [240, 249, 33],
];

const NODATA_COLOR: [u8; 3] = [0, 0, 0];

/// Write band 0 as an indexed PNG using the 5-class palette; values are
/// class ids 0..4, anything else renders as the nodata color.
pub fn write_class_quicklook(raster: &Raster, path: &Path) -> Result<()> {
    write_indexed(raster, path, &CLASS_PALETTE)
}

/// Write band 0 as an indexed PNG on the scalar ramp. `max` picks how many
/// ramp entries are used (1 for binary maps, 4 for agreement maps).
pub fn write_ramp_quicklook(raster: &Raster, path: &Path, max: usize) -> Result<()> {
    let max = max.clamp(1, RAMP_PALETTE.len() - 1);
    let mut palette: Vec<[u8; 3]> = Vec::with_capacity(max + 1);
    for i in 0..=max {
        // sample the ramp endpoints evenly
        let t = i as f32 / max as f32 * (RAMP_PALETTE.len() - 1) as f32;
        palette.push(RAMP_PALETTE[t.round() as usize]);
    }
    write_indexed(raster, path, &palette)
}

fn write_indexed(raster: &Raster, path: &Path, palette: &[[u8; 3]]) -> Result<()> {
    let (w, h) = (raster.grid.width, raster.grid.height);
    let nodata = raster.bands[0].nodata;
    let values = raster.band_values(0);
    let nodata_index = palette.len() as u8;
    let indices: Vec<u8> = values
        .iter()
        .map(|&v| {
            if super::is_nodata_value(v, nodata) || !v.is_finite() {
                return nodata_index;
            }
            let i = v.round();
            if i < 0.0 || i >= palette.len() as f32 {
                nodata_index
            } else {
                i as u8
            }
        })
        .collect();

    let mut plte: Vec<u8> = palette.iter().flatten().copied().collect();
    plte.extend_from_slice(&NODATA_COLOR);

    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(plte);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&indices).map_err(png_err)?;
    Ok(())
}

fn png_err(e: png::EncodingError) -> Error {
    Error::Other(format!("png encoding: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Band, GeoGrid, NODATA};

    #[test]
    fn writes_indexed_png_with_palette() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(0.0, 30.0, 10.0, 10.0, 3, 3, "EPSG:32645").unwrap();
        let values = vec![0.0, 1.0, 2.0, 3.0, 4.0, NODATA, 0.0, 1.0, 2.0];
        let r = Raster::new(grid, vec![Band::new("class", Some(NODATA))], values).unwrap();
        let path = dir.path().join("classes.png");
        write_class_quicklook(&r, &path).unwrap();

        let decoder = png::Decoder::new(std::io::BufReader::new(File::open(&path).unwrap()));
        let mut reader = decoder.read_info().unwrap();
        let palette = reader.info().palette.clone().unwrap();
        assert_eq!(palette.len(), 6 * 3); // 5 classes + nodata
        assert_eq!(&palette[0..3], &CLASS_PALETTE[0]);
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!(info.width, 3);
        assert_eq!(buf[5], 5); // nodata index
        assert_eq!(buf[0], 0);
    }

    #[test]
    fn binary_and_agreement_ramps() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GeoGrid::new(0.0, 20.0, 10.0, 10.0, 2, 2, "EPSG:32645").unwrap();
        let r = Raster::new(grid, vec![Band::new("rice", None)], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        write_ramp_quicklook(&r, &dir.path().join("binary.png"), 1).unwrap();
        let a = Raster::new(r.grid.clone(), vec![Band::new("agree", None)], vec![0.0, 2.0, 3.0, 4.0]).unwrap();
        write_ramp_quicklook(&a, &dir.path().join("agree.png"), 4).unwrap();
    }
}
