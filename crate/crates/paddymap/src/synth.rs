//! Seeded synthetic scene generator: a valley landscape with rectangular
//! rice fields, cropland, textured forest and built-up areas, a river, and
//! the full set of pipeline inputs derived from it (monthly mosaics,
//! elevation, SAR composites, a coarse reference land-cover raster, rice
//! polygons, the sampling-region polygon, and CEO-style validation plots).
//!
//! Spectral design: classes are separated by distinct band means with
//! sigma = 0.05 Gaussian noise per month. Forest and built-up additionally
//! carry clumped "camouflage" texture: a fraction of their pixels take the
//! spectral means of cropland (for forest) or water (for built-up), so a
//! purely pixel-based classifier hits an irreducible error floor while a
//! patch-based model can resolve the texture from context.

use rand::Rng;

use crate::error::Result;
use crate::infer::{PlotLabel, ValidationPlot, SQUARE_METERS_PER_ACRE};
use crate::raster::{Band, GeoGrid, PolygonSet, Raster, Ring, NODATA};

pub const MONTHS: [u32; 7] = [3, 4, 5, 6, 7, 8, 9];
pub const NOISE_SIGMA: f32 = 0.05;
pub const CAMO_FRACTION: f64 = 0.45;

/// [pre r,g,b,n] then [growing r,g,b,n] per class, indexed by class id.
const OPTICAL_MEANS: [[f32; 8]; 5] = [
    [0.30, 0.28, 0.24, 0.32, 0.10, 0.22, 0.06, 0.65], // rice: flooded then lush
    [0.32, 0.30, 0.22, 0.38, 0.22, 0.30, 0.12, 0.45], // cropland
    [0.08, 0.16, 0.06, 0.46, 0.07, 0.17, 0.05, 0.50], // forest: evergreen
    [0.46, 0.45, 0.43, 0.36, 0.46, 0.45, 0.43, 0.36], // built-up: gray, stable
    [0.07, 0.11, 0.16, 0.05, 0.06, 0.10, 0.15, 0.04], // other: water
];

/// [pre vv, pre vh, grow vv, grow vh] backscatter means in dB.
const SAR_MEANS: [[f32; 4]; 5] = [
    [-13.0, -20.0, -18.0, -24.0], // rice: flooded during the growing season
    [-11.0, -18.0, -11.0, -17.0],
    [-9.0, -15.0, -9.0, -15.0],
    [-5.0, -12.0, -5.0, -12.0],
    [-20.0, -26.0, -21.0, -27.0],
];

/// Reference land-cover codes for the coarse 4-class product.
pub const REFERENCE_CODES: [(i64, &str); 4] =
    [(10, "cropland"), (20, "forest"), (30, "builtup"), (40, "other")];

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub crs_tag: String,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 1024,
            height: 512,
            pixel_size: 10.0,
            origin_x: 500_000.0,
            origin_y: 3_060_000.0,
            crs_tag: "EPSG:32645".into(),
            seed: 20210601,
        }
    }
}

pub struct Scene {
    pub grid: GeoGrid,
    /// month -> 4-band (r, g, b, n) surface reflectance mosaic.
    pub monthlies: Vec<(u32, Raster)>,
    /// Single-band elevation in meters on a coarser 30 m grid.
    pub elevation: Raster,
    /// 2-band (vv, vh) seasonal backscatter composites in dB.
    pub sar_pre: Raster,
    pub sar_growing: Raster,
    /// Coarse 4-class reference land cover (codes of REFERENCE_CODES) on a
    /// 30 m grid.
    pub reference_landcover: Raster,
    pub rice_polygons: PolygonSet,
    pub region: PolygonSet,
    /// Ground-truth 5-class labels on the product grid.
    pub truth_labels: Raster,
    pub ceo_plots: Vec<ValidationPlot>,
    pub rice_truth_acres: f64,
}

struct Layout {
    towns: Vec<(usize, usize, usize, usize)>, // (row0, row1, col0, col1)
    river_rows: (usize, usize),
    valley_rows: (usize, usize),
    region_rows: (usize, usize),
    region_cols: (usize, usize),
    rice_blocks: Vec<(usize, usize, usize, usize)>,
}

/// Canonical layout constants are expressed for a 1024x512 scene and scale
/// proportionally for other sizes; field blocks keep their 16x24 pixel size.
fn layout(spec: &SceneSpec) -> Layout {
    let sr = |v: usize| v * spec.height / 512;
    let sc = |v: usize| v * spec.width / 1024;
    let towns: Vec<(usize, usize, usize, usize)> = [
        (166, 216, 60, 140),
        (300, 346, 460, 560),
        (220, 246, 360, 420),
        (270, 296, 840, 900),
    ]
    .iter()
    .map(|&(r0, r1, c0, c1)| (sr(r0), sr(r1), sc(c0), sc(c1)))
    .collect();
    let river_rows = (sr(248), sr(264));
    let valley_rows = (sr(160), sr(352));
    // the sampled geometry reaches onto the forested slopes above and below
    // the valley floor
    let region_rows = (sr(128), sr(384));
    let region_cols = (sc(32), sc(640));

    // candidate field blocks: 16x24-pixel rectangles with 1-pixel paths, in
    // two strips bracketing the river; a seeded coin keeps ~55% as rice
    let mut rice_blocks = Vec::new();
    let mut rng = crate::rng::stream(spec.seed, "rice-blocks", &[]);
    for strip in [(sr(180), sr(248)), (sr(266), sr(332))] {
        let mut r0 = strip.0;
        while r0 + 16 <= strip.1 {
            let mut c0 = sc(32);
            while c0 + 24 <= spec.width.min(sc(992)) {
                let keep = rng.gen_bool(0.55);
                let intersects_town = towns.iter().any(|&(tr0, tr1, tc0, tc1)| {
                    r0 < tr1 && r0 + 16 > tr0 && c0 < tc1 && c0 + 24 > tc0
                });
                if keep && !intersects_town {
                    rice_blocks.push((r0, r0 + 16, c0, c0 + 24));
                }
                c0 += 25;
            }
            r0 += 17;
        }
    }
    Layout { towns, river_rows, valley_rows, region_rows, region_cols, rice_blocks }
}

fn paint_truth(spec: &SceneSpec, lay: &Layout, grid: &GeoGrid) -> Raster {
    let (w, h) = (spec.width, spec.height);
    let mut labels = vec![2f32; w * h]; // forest everywhere
    let fill = |labels: &mut Vec<f32>, r0: usize, r1: usize, c0: usize, c1: usize, class: f32| {
        for row in r0..r1.min(h) {
            for col in c0..c1.min(w) {
                labels[row * w + col] = class;
            }
        }
    };
    fill(&mut labels, lay.valley_rows.0, lay.valley_rows.1, 0, w, 1.0); // cropland valley
    for &(r0, r1, c0, c1) in &lay.rice_blocks {
        fill(&mut labels, r0, r1, c0, c1, 0.0);
    }
    for &(r0, r1, c0, c1) in &lay.towns {
        fill(&mut labels, r0, r1, c0, c1, 3.0);
    }
    fill(&mut labels, lay.river_rows.0, lay.river_rows.1, 0, w, 4.0); // river
    Raster::new(grid.clone(), vec![Band::new("class", Some(NODATA))], labels).unwrap()
}

/// Two-octave blocky value noise in [0, 1).
fn camo_noise(seed: u64, tag: &str, col: usize, row: usize) -> f64 {
    let unit = |h: u64| (h >> 11) as f64 / (1u64 << 53) as f64;
    let coarse = unit(crate::rng::derive(seed, tag, &[(col / 6) as u64, (row / 6) as u64]));
    let fine = unit(crate::rng::derive(seed, tag, &[1, (col / 2) as u64, (row / 2) as u64]));
    0.6 * coarse + 0.4 * fine
}

/// Spectral class of a pixel: the truth class, except camouflaged forest
/// pixels take cropland's spectrum and camouflaged built-up pixels take
/// water's.
fn spectral_class(seed: u64, truth: u8, col: usize, row: usize) -> u8 {
    match truth {
        2 if camo_noise(seed, "camo-forest", col, row) < CAMO_FRACTION => 1,
        3 if camo_noise(seed, "camo-builtup", col, row) < CAMO_FRACTION => 4,
        other => other,
    }
}

/// Box-Muller standard normal from two uniform draws.
fn normal(rng: &mut rand_chacha::ChaCha8Rng) -> f32 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

/// Per-month cloud gaps (nodata) at month-specific disjoint spots, away
/// from the valley so composites stay dense where sampling happens.
fn cloud_rect(month: u32) -> Option<(usize, usize, usize, usize)> {
    match month {
        6 => Some((20, 60, 100, 180)),
        7 => Some((400, 440, 600, 680)),
        _ => None,
    }
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    let (w, h) = (spec.width, spec.height);
    let grid = GeoGrid::new(
        spec.origin_x,
        spec.origin_y,
        spec.pixel_size,
        spec.pixel_size,
        w,
        h,
        spec.crs_tag.clone(),
    )?;
    let lay = layout(spec);
    let truth = paint_truth(spec, &lay, &grid);
    let tvals = truth.band_values(0).to_vec();

    // spectral class per pixel (camouflage applied once, shared by months)
    let spectral: Vec<u8> = crate::par::map_range(h, |row| {
        (0..w)
            .map(|col| spectral_class(spec.seed, tvals[row * w + col] as u8, col, row))
            .collect::<Vec<u8>>()
    })
    .into_iter()
    .flatten()
    .collect();

    // monthly optical mosaics
    let mut monthlies = Vec::new();
    for &month in &MONTHS {
        let season = if month <= 5 { 0 } else { 4 };
        let mut jitter_rng = crate::rng::stream(spec.seed, "month-jitter", &[month as u64]);
        let jitter: [f32; 4] = std::array::from_fn(|_| jitter_rng.gen_range(-0.01f32..0.01));
        let cloud = cloud_rect(month);

        let rows: Vec<Vec<f32>> = crate::par::map_range(h, |row| {
            let mut rng = crate::rng::stream(spec.seed, "optical", &[month as u64, row as u64]);
            let mut line = vec![0f32; 4 * w];
            for col in 0..w {
                let clouded = cloud
                    .map(|(r0, r1, c0, c1)| row >= r0 && row < r1 && col >= c0 && col < c1)
                    .unwrap_or(false);
                let means = &OPTICAL_MEANS[spectral[row * w + col] as usize];
                for band in 0..4 {
                    let noise = normal(&mut rng) * NOISE_SIGMA;
                    line[band * w + col] = if clouded {
                        NODATA
                    } else {
                        (means[season + band] + jitter[band] + noise).clamp(0.0, 1.0)
                    };
                }
            }
            line
        });
        let mut values = vec![0f32; 4 * w * h];
        for (row, line) in rows.iter().enumerate() {
            for band in 0..4 {
                values[band * w * h + row * w..band * w * h + (row + 1) * w]
                    .copy_from_slice(&line[band * w..(band + 1) * w]);
            }
        }
        let bands = ["r", "g", "b", "n"]
            .iter()
            .map(|n| Band::new(*n, Some(NODATA)))
            .collect();
        monthlies.push((month, Raster::new(grid.clone(), bands, values)?));
    }

    // elevation on a 30 m grid, one extra pixel beyond every edge so
    // bilinear resampling onto the product grid never leaves the source
    let coarse = 3.0 * spec.pixel_size;
    let ew = w / 3 + 2;
    let eh = h / 3 + 2;
    let egrid = GeoGrid::new(
        spec.origin_x - coarse,
        spec.origin_y + coarse,
        coarse,
        coarse,
        ew,
        eh,
        spec.crs_tag.clone(),
    )?;
    let valley_center = (lay.valley_rows.0 + lay.valley_rows.1) as f64 / 2.0;
    let evalues: Vec<f32> = {
        let mut out = Vec::with_capacity(ew * eh);
        for erow in 0..eh {
            let mut rng = crate::rng::stream(spec.seed, "elevation", &[erow as u64]);
            for _ecol in 0..ew {
                let row10 = (erow as f64 - 1.0) * 3.0 + 1.0; // product-grid rows
                let dist = ((row10 - valley_center).abs() / h as f64 * 2.0).powf(1.2);
                let elev = 2100.0 + 1900.0 * dist + 20.0 * normal(&mut rng) as f64;
                out.push(elev as f32);
            }
        }
        out
    };
    let elevation = Raster::new(egrid.clone(), vec![Band::new("elev", Some(NODATA))], evalues)?;

    // seasonal SAR composites on the product grid
    let make_sar = |season: usize, tag: &str| -> Result<Raster> {
        let rows: Vec<Vec<f32>> = crate::par::map_range(h, |row| {
            let mut rng = crate::rng::stream(spec.seed, tag, &[row as u64]);
            let mut line = vec![0f32; 2 * w];
            for col in 0..w {
                let m = &SAR_MEANS[spectral[row * w + col] as usize];
                line[col] = m[season * 2] + 1.5 * normal(&mut rng);
                line[w + col] = m[season * 2 + 1] + 1.5 * normal(&mut rng);
            }
            line
        });
        let mut values = vec![0f32; 2 * w * h];
        for (row, line) in rows.iter().enumerate() {
            values[row * w..(row + 1) * w].copy_from_slice(&line[..w]);
            values[w * h + row * w..w * h + (row + 1) * w].copy_from_slice(&line[w..]);
        }
        Raster::new(
            grid.clone(),
            vec![Band::new("vv", Some(NODATA)), Band::new("vh", Some(NODATA))],
            values,
        )
    };
    let sar_pre = make_sar(0, "sar-pre")?;
    let sar_growing = make_sar(1, "sar-grow")?;

    // coarse reference land cover: majority of truth over 3x3 blocks,
    // rice counted as cropland (the reference product has no rice class)
    let rw = w / 3;
    let rh = h / 3;
    let rgrid = GeoGrid::new(
        spec.origin_x,
        spec.origin_y,
        coarse,
        coarse,
        rw,
        rh,
        spec.crs_tag.clone(),
    )?;
    let mut rvalues = Vec::with_capacity(rw * rh);
    for brow in 0..rh {
        for bcol in 0..rw {
            let mut counts = [0u32; 4];
            for dy in 0..3 {
                for dx in 0..3 {
                    let t = tvals[(brow * 3 + dy) * w + bcol * 3 + dx] as usize;
                    let four = if t == 0 { 0 } else { t - 1 };
                    counts[four] += 1;
                }
            }
            let mut best = 0usize;
            for c in 1..4 {
                if counts[c] > counts[best] {
                    best = c;
                }
            }
            rvalues.push(REFERENCE_CODES[best].0 as f32);
        }
    }
    let reference_landcover =
        Raster::new(rgrid, vec![Band::new("code", Some(NODATA))], rvalues)?;

    // rice polygons: one ring per field block, class 1 (mask presence)
    let px = spec.pixel_size;
    let rice_rings: Vec<Ring> = lay
        .rice_blocks
        .iter()
        .map(|&(r0, r1, c0, c1)| {
            Ring::rect(
                1,
                spec.origin_x + c0 as f64 * px,
                spec.origin_y - r1 as f64 * px,
                spec.origin_x + c1 as f64 * px,
                spec.origin_y - r0 as f64 * px,
            )
        })
        .collect();
    let rice_polygons = PolygonSet { rings: rice_rings };

    let region = PolygonSet {
        rings: vec![Ring::rect(
            1,
            spec.origin_x + lay.region_cols.0 as f64 * px,
            spec.origin_y - lay.region_rows.1 as f64 * px,
            spec.origin_x + lay.region_cols.1 as f64 * px,
            spec.origin_y - lay.region_rows.0 as f64 * px,
        )],
    };

    // CEO-style plots: 1667 total, exactly 359 inside the sampled region
    let mut plots = Vec::with_capacity(1667);
    let mut inside = 0usize;
    let mut outside = 0usize;
    let mut attempts = 0u64;
    let mut rng = crate::rng::stream(spec.seed, "ceo", &[]);
    let (x0, y0, x1, y1) = grid.extent();
    while inside < 359 || outside < 1308 {
        attempts += 1;
        if attempts > 2_000_000 {
            return Err(crate::error::Error::Other(
                "scene too small to place the validation plot quotas".into(),
            ));
        }
        let x = rng.gen_range(x0 + px..x1 - px);
        let y = rng.gen_range(y0 + px..y1 - px);
        let in_region = region.contains(x, y);
        if in_region && inside >= 359 {
            continue;
        }
        if !in_region && outside >= 1308 {
            continue;
        }
        let (col, row) = grid.locate(x, y).expect("plot inside grid");
        let truth_rice = tvals[row * w + col] == 0.0;
        let roll: f64 = rng.gen();
        let label = if roll < 0.04 {
            PlotLabel::Mixed
        } else if roll < 0.07 {
            if truth_rice {
                PlotLabel::NonRice
            } else {
                PlotLabel::Rice
            }
        } else if truth_rice {
            PlotLabel::Rice
        } else {
            PlotLabel::NonRice
        };
        plots.push(ValidationPlot { plot_id: plots.len() as u64 + 1, x, y, label });
        if in_region {
            inside += 1;
        } else {
            outside += 1;
        }
    }

    let rice_pixels = tvals.iter().filter(|&&v| v == 0.0).count();
    let rice_truth_acres = rice_pixels as f64 * px * px / SQUARE_METERS_PER_ACRE;

    Ok(Scene {
        grid,
        monthlies,
        elevation,
        sar_pre,
        sar_growing,
        reference_landcover,
        rice_polygons,
        region,
        truth_labels: truth,
        ceo_plots: plots,
        rice_truth_acres,
    })
}
