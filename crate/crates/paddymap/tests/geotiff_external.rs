//! Reader checks against GeoTIFFs produced by an independent writer (Pillow).

use std::path::Path;

use paddymap::raster::geotiff::read_geotiff;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn reads_foreign_float32_uncompressed() {
    let r = read_geotiff(&data("pillow_f32.tif")).unwrap();
    assert_eq!((r.grid.width, r.grid.height), (3, 2));
    assert_eq!(r.values(), &[0.0, 2.5, 5.0, 7.5, 10.0, 12.5]);
    assert_eq!(r.grid.pixel_size_x, 5.0);
    assert_eq!((r.grid.origin_x, r.grid.origin_y), (100.0, 200.0));
    assert_eq!(r.bands[0].nodata, Some(-1.0));
}

#[test]
fn reads_foreign_float32_deflate() {
    let r = read_geotiff(&data("pillow_f32_deflate.tif")).unwrap();
    assert_eq!(r.values(), &[0.0, 2.5, 5.0, 7.5, 10.0, 12.5]);
}

#[test]
fn reads_foreign_uint16_converted_to_f32() {
    let r = read_geotiff(&data("pillow_u16.tif")).unwrap();
    assert_eq!((r.grid.width, r.grid.height), (4, 3));
    assert_eq!(&r.values()[..4], &[0.0, 3.0, 6.0, 9.0]);
}
