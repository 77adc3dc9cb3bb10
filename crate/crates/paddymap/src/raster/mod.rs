//! Georeferenced raster data model and the spatial operations built on it.
//!
//! Everything here assumes a projected CRS with pixel sizes in meters;
//! geographic inputs must be projected upstream. Rasters are immutable once
//! constructed and all operations are pure functions, so they are safe to
//! call from parallel tile maps.

pub mod fixture;
pub mod geotiff;
pub mod quicklook;

use crate::error::{Error, Result};
use crate::par;

/// Canonical nodata sentinel for rasters produced by this crate. Inputs may
/// declare any other sentinel (including NaN); comparisons are bit-aware.
pub const NODATA: f32 = -9999.0;

/// CRS tags treated as geographic (degrees); area math refuses these.
const GEOGRAPHIC_TAGS: [&str; 3] = ["EPSG:4326", "EPSG:4269", "CRS:84"];

// ---------------------------------------------------------------------------
// GeoGrid
// ---------------------------------------------------------------------------

/// Pixel grid georeferencing: top-left corner in map coordinates, square-ish
/// pixels in meters, rows increasing southward.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
    pub width: usize,
    pub height: usize,
    pub crs_tag: String,
}

impl GeoGrid {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_size_x: f64,
        pixel_size_y: f64,
        width: usize,
        height: usize,
        crs_tag: impl Into<String>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!("zero dimension: {width}x{height}")));
        }
        if pixel_size_x <= 0.0 || pixel_size_y <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "pixel sizes must be positive: {pixel_size_x} x {pixel_size_y}"
            )));
        }
        Ok(GeoGrid {
            origin_x,
            origin_y,
            pixel_size_x,
            pixel_size_y,
            width,
            height,
            crs_tag: crs_tag.into(),
        })
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Map coordinates of the center of pixel (col, row).
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size_x,
            self.origin_y - (row as f64 + 0.5) * self.pixel_size_y,
        )
    }

    /// Fractional pixel-center coordinates of a map point: (0, 0) is the
    /// center of the top-left pixel.
    pub fn fractional(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.pixel_size_x - 0.5,
            (self.origin_y - y) / self.pixel_size_y - 0.5,
        )
    }

    /// Pixel containing a map point, if inside the grid.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = (x - self.origin_x) / self.pixel_size_x;
        let row = (self.origin_y - y) / self.pixel_size_y;
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (col, row) = (col as usize, row as usize);
        if col < self.width && row < self.height {
            Some((col, row))
        } else {
            None
        }
    }

    /// Two grids are alignable iff CRS and pixel sizes match and their
    /// origins differ by whole pixel multiples.
    pub fn alignable_with(&self, other: &GeoGrid) -> bool {
        if self.crs_tag != other.crs_tag
            || self.pixel_size_x != other.pixel_size_x
            || self.pixel_size_y != other.pixel_size_y
        {
            return false;
        }
        let dx = (self.origin_x - other.origin_x) / self.pixel_size_x;
        let dy = (self.origin_y - other.origin_y) / self.pixel_size_y;
        (dx - dx.round()).abs() < 1e-6 && (dy - dy.round()).abs() < 1e-6
    }

    /// Sub-grid for a window at (col, row) of size w x h.
    pub fn window(&self, col: usize, row: usize, w: usize, h: usize) -> Result<GeoGrid> {
        if col + w > self.width || row + h > self.height || w == 0 || h == 0 {
            return Err(Error::WindowOutOfBounds {
                col,
                row,
                w,
                h,
                width: self.width,
                height: self.height,
            });
        }
        GeoGrid::new(
            self.origin_x + col as f64 * self.pixel_size_x,
            self.origin_y - row as f64 * self.pixel_size_y,
            self.pixel_size_x,
            self.pixel_size_y,
            w,
            h,
            self.crs_tag.clone(),
        )
    }

    /// Map-coordinate extent as (min_x, min_y, max_x, max_y).
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y - self.height as f64 * self.pixel_size_y,
            self.origin_x + self.width as f64 * self.pixel_size_x,
            self.origin_y,
        )
    }

    pub fn is_geographic(&self) -> bool {
        let tag = self.crs_tag.to_ascii_uppercase();
        GEOGRAPHIC_TAGS.iter().any(|g| tag == *g)
    }
}

// ---------------------------------------------------------------------------
// Raster
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub nodata: Option<f32>,
}

impl Band {
    pub fn new(name: impl Into<String>, nodata: Option<f32>) -> Self {
        Band { name: name.into(), nodata }
    }
}

/// Multi-band 32-bit float raster, band-major and row-major within band.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: GeoGrid,
    pub bands: Vec<Band>,
    values: Vec<f32>,
}

/// Bit-aware nodata comparison so NaN sentinels work.
#[inline]
pub fn is_nodata_value(v: f32, nodata: Option<f32>) -> bool {
    match nodata {
        Some(nd) => v.to_bits() == nd.to_bits() || (v.is_nan() && nd.is_nan()),
        None => false,
    }
}

impl Raster {
    pub fn new(grid: GeoGrid, bands: Vec<Band>, values: Vec<f32>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidRaster("no bands".into()));
        }
        if values.len() != bands.len() * grid.pixels() {
            return Err(Error::InvalidRaster(format!(
                "value count {} != bands {} x pixels {}",
                values.len(),
                bands.len(),
                grid.pixels()
            )));
        }
        for (i, b) in bands.iter().enumerate() {
            if b.name.is_empty() {
                return Err(Error::EmptyBandName);
            }
            if bands[..i].iter().any(|p| p.name == b.name) {
                return Err(Error::DuplicateBandName(b.name.clone()));
            }
        }
        Ok(Raster { grid, bands, values })
    }

    pub fn filled(grid: GeoGrid, bands: Vec<Band>, value: f32) -> Result<Self> {
        let n = bands.len() * grid.pixels();
        Raster::new(grid, bands, vec![value; n])
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn band_values(&self, band: usize) -> &[f32] {
        let n = self.grid.pixels();
        &self.values[band * n..(band + 1) * n]
    }

    pub fn band_values_mut(&mut self, band: usize) -> &mut [f32] {
        let n = self.grid.pixels();
        &mut self.values[band * n..(band + 1) * n]
    }

    #[inline]
    pub fn value(&self, band: usize, col: usize, row: usize) -> f32 {
        self.values[band * self.grid.pixels() + row * self.grid.width + col]
    }

    #[inline]
    pub fn is_nodata(&self, band: usize, col: usize, row: usize) -> bool {
        is_nodata_value(self.value(band, col, row), self.bands[band].nodata)
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.name == name)
    }

    pub fn require_band(&self, name: &str) -> Result<usize> {
        self.band_index(name).ok_or_else(|| Error::MissingBand(name.to_string()))
    }

    /// Consume into the raw band-major value buffer.
    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

// ---------------------------------------------------------------------------
// Polygons
// ---------------------------------------------------------------------------

/// One closed ring with a class id. First vertex equals the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub class_id: u32,
    pub vertices: Vec<(f64, f64)>,
}

impl Ring {
    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 4 {
            return Err(Error::DegenerateRing { class_id: self.class_id, count: self.vertices.len() });
        }
        let first = self.vertices.first().unwrap();
        let last = self.vertices.last().unwrap();
        if first != last {
            return Err(Error::UnclosedRing { class_id: self.class_id });
        }
        Ok(())
    }

    /// Even-odd containment test for a point.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for pair in self.vertices.windows(2) {
            let (x1, y1) = pair[0];
            let (x2, y2) = pair[1];
            if (y1 > y) != (y2 > y) {
                let t = (y - y1) / (y2 - y1);
                let xi = x1 + t * (x2 - x1);
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Axis-aligned rectangle ring helper.
    pub fn rect(class_id: u32, min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Ring {
        Ring {
            class_id,
            vertices: vec![
                (min_x, min_y),
                (max_x, min_y),
                (max_x, max_y),
                (min_x, max_y),
                (min_x, min_y),
            ],
        }
    }
}

/// Class-labeled polygon rings in map coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolygonSet {
    pub rings: Vec<Ring>,
}

impl PolygonSet {
    pub fn validate(&self) -> Result<()> {
        for r in &self.rings {
            r.validate()?;
        }
        Ok(())
    }

    /// A point is inside the set if it is inside any ring (even-odd per ring).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rings.iter().any(|r| r.contains(x, y))
    }

    /// Plain text format: one ring per line, "class_id x1 y1 x2 y2 ...".
    pub fn parse(text: &str) -> Result<PolygonSet> {
        let mut rings = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |detail: String| Error::BadRow { row: lineno + 1, detail };
            if fields.len() < 3 || fields.len() % 2 == 0 {
                return Err(parse_err(format!("expected 'class_id x1 y1 x2 y2 ...', got {} fields", fields.len())));
            }
            let class_id: u32 = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad class id {:?}", fields[0])))?;
            let mut vertices = Vec::with_capacity((fields.len() - 1) / 2);
            for pair in fields[1..].chunks(2) {
                let x: f64 = pair[0].parse().map_err(|_| parse_err(format!("bad coordinate {:?}", pair[0])))?;
                let y: f64 = pair[1].parse().map_err(|_| parse_err(format!("bad coordinate {:?}", pair[1])))?;
                vertices.push((x, y));
            }
            let ring = Ring { class_id, vertices };
            ring.validate()?;
            rings.push(ring);
        }
        Ok(PolygonSet { rings })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rings {
            out.push_str(&r.class_id.to_string());
            for (x, y) in &r.vertices {
                out.push_str(&format!(" {x} {y}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: &std::path::Path) -> Result<PolygonSet> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        PolygonSet::parse(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMethod {
    Nearest,
    Bilinear,
}

/// Resample onto a target grid. Target pixels whose sampling footprint falls
/// outside the source become nodata. Bilinear drops nodata neighbors and
/// renormalizes the remaining weights.
pub fn resample(src: &Raster, target: &GeoGrid, method: ResampleMethod) -> Result<Raster> {
    if src.grid.crs_tag != target.crs_tag {
        return Err(Error::CrsMismatch {
            left: src.grid.crs_tag.clone(),
            right: target.crs_tag.clone(),
        });
    }
    let (sx0, sy0, sx1, sy1) = src.grid.extent();
    let (tx0, ty0, tx1, ty1) = target.extent();
    if tx0.max(sx0) >= tx1.min(sx1) || ty0.max(sy0) >= ty1.min(sy1) {
        return Err(Error::ZeroOverlap);
    }

    let bands: Vec<Band> = src
        .bands
        .iter()
        .map(|b| Band::new(b.name.clone(), Some(b.nodata.unwrap_or(NODATA))))
        .collect();
    let (tw, th) = (target.width, target.height);
    let (sw, sh) = (src.grid.width, src.grid.height);
    let mut out = vec![0f32; bands.len() * tw * th];

    // Precompute fractional source coordinates of target pixel centers.
    let fx: Vec<f64> = (0..tw)
        .map(|c| {
            let (x, _) = target.pixel_center(c, 0);
            (x - src.grid.origin_x) / src.grid.pixel_size_x - 0.5
        })
        .collect();
    let fy: Vec<f64> = (0..th)
        .map(|r| {
            let (_, y) = target.pixel_center(0, r);
            (src.grid.origin_y - y) / src.grid.pixel_size_y - 0.5
        })
        .collect();

    for (bi, band) in src.bands.iter().enumerate() {
        let sv = src.band_values(bi);
        let nd_in = band.nodata;
        let nd_out = bands[bi].nodata.unwrap();
        let plane = &mut out[bi * tw * th..(bi + 1) * tw * th];
        par::for_each_chunk_mut(plane, tw, |row, line| {
            let y = fy[row];
            for (col, dst) in line.iter_mut().enumerate() {
                let x = fx[col];
                *dst = match method {
                    ResampleMethod::Nearest => {
                        // round-half-up keeps the footprint inside the cell
                        let cx = (x + 0.5).floor();
                        let cy = (y + 0.5).floor();
                        if cx < 0.0 || cy < 0.0 || cx >= sw as f64 || cy >= sh as f64 {
                            nd_out
                        } else {
                            let v = sv[cy as usize * sw + cx as usize];
                            if is_nodata_value(v, nd_in) {
                                nd_out
                            } else {
                                v
                            }
                        }
                    }
                    ResampleMethod::Bilinear => {
                        bilinear_at(sv, sw, sh, x, y, nd_in).unwrap_or(nd_out)
                    }
                };
            }
        });
    }
    Raster::new(target.clone(), bands, out)
}

/// Bilinear sample at fractional pixel-center coordinates. Neighbors with
/// zero weight are ignored; a positive-weight neighbor outside the grid means
/// the footprint leaves the source (None); nodata neighbors are dropped and
/// the remaining weights renormalized.
fn bilinear_at(values: &[f32], w: usize, h: usize, fx: f64, fy: f64, nodata: Option<f32>) -> Option<f32> {
    let x0 = fx.floor();
    let y0 = fy.floor();
    let dx = fx - x0;
    let dy = fy - y0;
    let mut acc = 0.0f64;
    let mut wsum = 0.0f64;
    for (iy, wy) in [(y0, 1.0 - dy), (y0 + 1.0, dy)] {
        if wy == 0.0 {
            continue;
        }
        for (ix, wx) in [(x0, 1.0 - dx), (x0 + 1.0, dx)] {
            if wx == 0.0 {
                continue;
            }
            if ix < 0.0 || iy < 0.0 || ix >= w as f64 || iy >= h as f64 {
                return None;
            }
            let v = values[iy as usize * w + ix as usize];
            if is_nodata_value(v, nodata) {
                continue;
            }
            acc += (wx * wy) * v as f64;
            wsum += wx * wy;
        }
    }
    if wsum == 0.0 {
        None
    } else {
        Some((acc / wsum) as f32)
    }
}

/// Burn polygons into a 1-band raster: pixel value is the class id of the
/// last-listed ring whose interior (even-odd rule) contains the pixel center;
/// uncovered pixels are nodata.
pub fn rasterize(polygons: &PolygonSet, grid: &GeoGrid) -> Result<Raster> {
    polygons.validate()?;
    let mut out = Raster::filled(
        grid.clone(),
        vec![Band::new("class", Some(NODATA))],
        NODATA,
    )?;
    let width = grid.width;
    // Later rings override earlier ones, so iterate in listed order.
    for ring in &polygons.rings {
        let (min_x, min_y, max_x, max_y) = ring_bbox(ring);
        let (c0, r0) = clamp_cell(grid, min_x, max_y);
        let (c1, r1) = clamp_cell(grid, max_x, min_y);
        let values = out.band_values_mut(0);
        for row in r0..=r1.min(grid.height - 1) {
            for col in c0..=c1.min(width - 1) {
                let (x, y) = grid_center(grid, col, row);
                if ring.contains(x, y) {
                    values[row * width + col] = ring.class_id as f32;
                }
            }
        }
    }
    Ok(out)
}

fn grid_center(grid: &GeoGrid, col: usize, row: usize) -> (f64, f64) {
    grid.pixel_center(col, row)
}

fn ring_bbox(ring: &Ring) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for &(x, y) in &ring.vertices {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    (min_x, min_y, max_x, max_y)
}

fn clamp_cell(grid: &GeoGrid, x: f64, y: f64) -> (usize, usize) {
    let col = ((x - grid.origin_x) / grid.pixel_size_x).floor().max(0.0) as usize;
    let row = ((grid.origin_y - y) / grid.pixel_size_y).floor().max(0.0) as usize;
    (col.min(grid.width.saturating_sub(1)), row.min(grid.height.saturating_sub(1)))
}

/// Concatenate bands of co-gridded rasters in argument order.
pub fn stack(rasters: &[&Raster]) -> Result<Raster> {
    let first = rasters.first().ok_or_else(|| Error::EmptyInput("stack".into()))?;
    for r in &rasters[1..] {
        if r.grid != first.grid {
            return Err(Error::GridMismatch(format!(
                "stack input grids differ: {:?} vs {:?}",
                first.grid, r.grid
            )));
        }
    }
    let mut bands = Vec::new();
    let mut values = Vec::with_capacity(rasters.iter().map(|r| r.values().len()).sum());
    for r in rasters {
        for b in &r.bands {
            bands.push(b.clone());
        }
        values.extend_from_slice(r.values());
    }
    Raster::new(first.grid.clone(), bands, values)
}

/// Cut a fully-interior window, preserving band order and georeferencing the
/// sub-grid.
pub fn window(r: &Raster, col: usize, row: usize, w: usize, h: usize) -> Result<Raster> {
    let grid = r.grid.window(col, row, w, h)?;
    let mut values = Vec::with_capacity(r.band_count() * w * h);
    for b in 0..r.band_count() {
        let src = r.band_values(b);
        for y in 0..h {
            let off = (row + y) * r.grid.width + col;
            values.extend_from_slice(&src[off..off + w]);
        }
    }
    Raster::new(grid, r.bands.clone(), values)
}
