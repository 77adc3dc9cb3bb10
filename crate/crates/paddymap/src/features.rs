//! Seasonal compositing, the eight spectral indices, and feature-stack
//! assembly for the four input variants.
//!
//! Index formulas operate on reflectance already scaled to [0, 1]. Pixels
//! with a near-zero denominator or a negative radicand produce the fill
//! value 0 (keeping patch tensors dense) and are tallied in a diagnostics
//! report instead of going nodata.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{is_nodata_value, stack, Band, Raster, NODATA};

/// Band names expected on optical rasters.
pub const OPTICAL_BANDS: [&str; 4] = ["r", "g", "b", "n"];
/// Band names expected on SAR rasters.
pub const SAR_BANDS: [&str; 2] = ["vv", "vh"];

/// Denominators with magnitude below this are singular.
pub const SINGULARITY_EPS: f64 = 1e-9;
/// SAR backscatter normalization range in dB.
pub const SAR_DB_RANGE: (f32, f32) = (-25.0, 0.0);

// ---------------------------------------------------------------------------
// Seasonal composite
// ---------------------------------------------------------------------------

/// Per-pixel, per-band median of the mosaics whose month is in `window`,
/// ignoring nodata. All-nodata pixels stay nodata.
pub fn seasonal_composite(monthlies: &[(u32, Raster)], window: &[u32]) -> Result<Raster> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut selected = Vec::with_capacity(window.len());
    for &m in window {
        let r = monthlies
            .iter()
            .find(|(month, _)| *month == m)
            .map(|(_, r)| r)
            .ok_or(Error::MissingMonth(m))?;
        selected.push(r);
    }
    let first = selected[0];
    for r in &selected[1..] {
        if r.grid != first.grid {
            return Err(Error::GridMismatch("composite inputs on different grids".into()));
        }
        if r.bands.len() != first.bands.len()
            || r.bands.iter().zip(&first.bands).any(|(a, b)| a.name != b.name)
        {
            return Err(Error::GridMismatch("composite inputs with different band sets".into()));
        }
    }

    let pixels = first.grid.pixels();
    let n_bands = first.band_count();
    let mut out = vec![0f32; n_bands * pixels];
    for b in 0..n_bands {
        let planes: Vec<&[f32]> = selected.iter().map(|r| r.band_values(b)).collect();
        let nodatas: Vec<Option<f32>> = selected.iter().map(|r| r.bands[b].nodata).collect();
        let plane = &mut out[b * pixels..(b + 1) * pixels];
        par::for_each_chunk_mut(plane, first.grid.width, |row, line| {
            let base = row * first.grid.width;
            let mut vals: Vec<f32> = Vec::with_capacity(planes.len());
            for (i, dst) in line.iter_mut().enumerate() {
                vals.clear();
                for (p, nd) in planes.iter().zip(&nodatas) {
                    let v = p[base + i];
                    if !is_nodata_value(v, *nd) {
                        vals.push(v);
                    }
                }
                *dst = if vals.is_empty() { NODATA } else { median(&mut vals) };
            }
        });
    }
    let bands = first
        .bands
        .iter()
        .map(|b| Band::new(b.name.clone(), Some(b.nodata.unwrap_or(NODATA))))
        .collect();
    Raster::new(first.grid.clone(), bands, out)
}

/// Median of a non-empty slice; even counts average the two middle values.
fn median(vals: &mut [f32]) -> f32 {
    vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------------------
// Spectral indices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Ndvi,
    Evi,
    Ndwi,
    Savi,
    Msavi,
    Mtvi,
    Vari,
    Tgi,
}

impl IndexKind {
    pub const ALL: [IndexKind; 8] = [
        IndexKind::Ndvi,
        IndexKind::Evi,
        IndexKind::Ndwi,
        IndexKind::Savi,
        IndexKind::Msavi,
        IndexKind::Mtvi,
        IndexKind::Vari,
        IndexKind::Tgi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IndexKind::Ndvi => "ndvi",
            IndexKind::Evi => "evi",
            IndexKind::Ndwi => "ndwi",
            IndexKind::Savi => "savi",
            IndexKind::Msavi => "msavi",
            IndexKind::Mtvi => "mtvi",
            IndexKind::Vari => "vari",
            IndexKind::Tgi => "tgi",
        }
    }
}

/// Outcome of evaluating one index at one pixel.
enum IndexValue {
    Ok(f32),
    ZeroDenominator,
    NegativeRadicand,
}

/// Scalar index evaluation; f64 internally for a clean singularity test.
fn eval_index(kind: IndexKind, r: f64, g: f64, b: f64, n: f64) -> IndexValue {
    use IndexValue::*;
    let div = |num: f64, den: f64| {
        if den.abs() < SINGULARITY_EPS {
            ZeroDenominator
        } else {
            Ok((num / den) as f32)
        }
    };
    match kind {
        IndexKind::Ndvi => div(n - r, n + r),
        IndexKind::Evi => div(2.5 * (n - r), n + 6.0 * r - 7.5 * b + 1.0),
        IndexKind::Ndwi => div(g - n, g + n),
        IndexKind::Savi => match div(n - r, n + r + 0.5) {
            Ok(v) => Ok(v * 1.5),
            other => other,
        },
        IndexKind::Msavi => {
            let radicand = (2.0 * n + 1.0).powi(2) - 8.0 * (n - r);
            if radicand < 0.0 {
                NegativeRadicand
            } else {
                Ok(((2.0 * n + 1.0 - radicand.sqrt()) / 2.0) as f32)
            }
        }
        IndexKind::Mtvi => {
            if r < 0.0 {
                return NegativeRadicand;
            }
            let radicand = (2.0 * n + 1.0).powi(2) - (6.0 * n - 5.0 * r.sqrt()) - 0.5;
            if radicand < 0.0 {
                NegativeRadicand
            } else {
                let den = radicand.sqrt();
                if den.abs() < SINGULARITY_EPS {
                    ZeroDenominator
                } else {
                    Ok((1.5 * (1.2 * (n - g) - 2.5 * (r - g)) / den) as f32)
                }
            }
        }
        IndexKind::Vari => div(g - r, g + r - b),
        IndexKind::Tgi => Ok((((120.0 * (r - b)) - (190.0 * (r - g))) / 2.0) as f32),
    }
}

/// Singularity tallies for one index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IndexTally {
    pub zero_denominator: u64,
    pub negative_radicand: u64,
}

/// Per-index singularity counts, emitted as a JSON report.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IndexDiagnostics {
    pub ndvi: IndexTally,
    pub evi: IndexTally,
    pub ndwi: IndexTally,
    pub savi: IndexTally,
    pub msavi: IndexTally,
    pub mtvi: IndexTally,
    pub vari: IndexTally,
    pub tgi: IndexTally,
}

impl IndexDiagnostics {
    pub fn tally_mut(&mut self, kind: IndexKind) -> &mut IndexTally {
        match kind {
            IndexKind::Ndvi => &mut self.ndvi,
            IndexKind::Evi => &mut self.evi,
            IndexKind::Ndwi => &mut self.ndwi,
            IndexKind::Savi => &mut self.savi,
            IndexKind::Msavi => &mut self.msavi,
            IndexKind::Mtvi => &mut self.mtvi,
            IndexKind::Vari => &mut self.vari,
            IndexKind::Tgi => &mut self.tgi,
        }
    }

    pub fn tally(&self, kind: IndexKind) -> IndexTally {
        match kind {
            IndexKind::Ndvi => self.ndvi,
            IndexKind::Evi => self.evi,
            IndexKind::Ndwi => self.ndwi,
            IndexKind::Savi => self.savi,
            IndexKind::Msavi => self.msavi,
            IndexKind::Mtvi => self.mtvi,
            IndexKind::Vari => self.vari,
            IndexKind::Tgi => self.tgi,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialize")
    }
}

/// Compute one index over a raster carrying r, g, b, n bands. Nodata in any
/// input band propagates; singular pixels yield 0 and are tallied.
pub fn compute_index(kind: IndexKind, raster: &Raster, diag: &mut IndexDiagnostics) -> Result<Raster> {
    let idx: Vec<usize> = OPTICAL_BANDS
        .iter()
        .map(|name| raster.require_band(name))
        .collect::<Result<_>>()?;
    let planes: Vec<&[f32]> = idx.iter().map(|&i| raster.band_values(i)).collect();
    let nodatas: Vec<Option<f32>> = idx.iter().map(|&i| raster.bands[i].nodata).collect();

    let pixels = raster.grid.pixels();
    let width = raster.grid.width;
    // Collect per-row tallies, then reduce in row order.
    let rows: Vec<(Vec<f32>, IndexTally)> = par::map_range(raster.grid.height, |row| {
        let base = row * width;
        let mut line = vec![0f32; width];
        let mut tally = IndexTally::default();
        for (i, dst) in line.iter_mut().enumerate() {
            let p = base + i;
            let vals = [planes[0][p], planes[1][p], planes[2][p], planes[3][p]];
            if vals.iter().zip(&nodatas).any(|(&v, &nd)| is_nodata_value(v, nd)) {
                *dst = NODATA;
                continue;
            }
            let [r, g, b, n] = vals.map(|v| v as f64);
            *dst = match eval_index(kind, r, g, b, n) {
                IndexValue::Ok(v) => v,
                IndexValue::ZeroDenominator => {
                    tally.zero_denominator += 1;
                    0.0
                }
                IndexValue::NegativeRadicand => {
                    tally.negative_radicand += 1;
                    0.0
                }
            };
        }
        (line, tally)
    });

    let mut values = Vec::with_capacity(pixels);
    let total = diag.tally_mut(kind);
    for (line, tally) in rows {
        values.extend_from_slice(&line);
        total.zero_denominator += tally.zero_denominator;
        total.negative_radicand += tally.negative_radicand;
    }
    Raster::new(
        raster.grid.clone(),
        vec![Band::new(kind.name(), Some(NODATA))],
        values,
    )
}

// ---------------------------------------------------------------------------
// Feature stacks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Rgbn,
    Rgbne,
    Rgbns,
    Rgbnes,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rgbn, Variant::Rgbne, Variant::Rgbns, Variant::Rgbnes];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Rgbn => "rgbn",
            Variant::Rgbne => "rgbne",
            Variant::Rgbns => "rgbns",
            Variant::Rgbnes => "rgbnes",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "rgbn" => Some(Variant::Rgbn),
            "rgbne" => Some(Variant::Rgbne),
            "rgbns" => Some(Variant::Rgbns),
            "rgbnes" => Some(Variant::Rgbnes),
            _ => None,
        }
    }

    pub fn wants_elevation(&self) -> bool {
        matches!(self, Variant::Rgbne | Variant::Rgbnes)
    }

    pub fn wants_sar(&self) -> bool {
        matches!(self, Variant::Rgbns | Variant::Rgbnes)
    }

    /// Channel count without the optional per-season indices.
    pub fn base_channels(&self) -> usize {
        8 + if self.wants_elevation() { 1 } else { 0 } + if self.wants_sar() { 4 } else { 0 }
    }

    pub fn channels(&self, include_indices: bool) -> usize {
        self.base_channels() + if include_indices { 16 } else { 0 }
    }
}

/// Which stack to build: variant, the indices toggle, and the season windows
/// (months). The growing window must be non-empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStackSpec {
    pub variant: Variant,
    pub include_indices: bool,
    pub pre_months: Vec<u32>,
    pub growing_months: Vec<u32>,
}

impl Default for FeatureStackSpec {
    fn default() -> Self {
        // Growing season is June-September; the pre window is a config
        // default covering March-May.
        FeatureStackSpec {
            variant: Variant::Rgbn,
            include_indices: false,
            pre_months: vec![3, 4, 5],
            growing_months: vec![6, 7, 8, 9],
        }
    }
}

impl FeatureStackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.growing_months.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(())
    }
}

/// Co-registered inputs for stack assembly. Optical composites carry r/g/b/n
/// bands in [0, 1]; elevation is raw meters; SAR composites carry vv/vh in dB.
pub struct StackSources {
    pub pre_optical: Raster,
    pub growing_optical: Raster,
    pub elevation: Option<Raster>,
    pub sar_pre: Option<Raster>,
    pub sar_growing: Option<Raster>,
}

/// Assemble the feature stack for a variant. Band order is fixed:
/// pre r,g,b,n; growing r,g,b,n; then elevation; then pre vv,vh, growing
/// vv,vh; then 8 indices per season (pre first). All bands are normalized to
/// [0, 1]: optical is used as-is, elevation is min-max scaled over its valid
/// pixels, SAR dB is clipped to [-25, 0] and mapped affinely.
pub fn build_feature_stack(
    spec: &FeatureStackSpec,
    sources: &StackSources,
    diag: &mut IndexDiagnostics,
) -> Result<Raster> {
    spec.validate()?;
    let missing = |what: &str| Error::MissingSource {
        variant: spec.variant.name().to_string(),
        input: what.to_string(),
    };

    let pre = rename_bands(&sources.pre_optical, "pre")?;
    let grow = rename_bands(&sources.growing_optical, "grow")?;
    let mut parts: Vec<Raster> = vec![pre, grow];

    if spec.variant.wants_elevation() {
        let elev = sources.elevation.as_ref().ok_or_else(|| missing("elevation"))?;
        parts.push(normalize_elevation(elev)?);
    }
    if spec.variant.wants_sar() {
        let sp = sources.sar_pre.as_ref().ok_or_else(|| missing("sar_pre"))?;
        let sg = sources.sar_growing.as_ref().ok_or_else(|| missing("sar_growing"))?;
        parts.push(normalize_sar(sp, "pre")?);
        parts.push(normalize_sar(sg, "grow")?);
    }
    if spec.include_indices {
        for (season, src) in [("pre", &sources.pre_optical), ("grow", &sources.growing_optical)] {
            for kind in IndexKind::ALL {
                let mut idx = compute_index(kind, src, diag)?;
                idx.bands[0].name = format!("{season}_{}", kind.name());
                parts.push(idx);
            }
        }
    }
    let refs: Vec<&Raster> = parts.iter().collect();
    stack(&refs)
}

/// Prefix the four optical band names with a season tag.
fn rename_bands(r: &Raster, season: &str) -> Result<Raster> {
    let mut out = r.clone();
    if out.band_count() != 4 {
        return Err(Error::InvalidRaster(format!(
            "optical composite must have 4 bands, found {}",
            out.band_count()
        )));
    }
    for name in OPTICAL_BANDS {
        r.require_band(name)?;
    }
    for band in out.bands.iter_mut() {
        band.name = format!("{season}_{}", band.name);
    }
    Ok(out)
}

/// Min-max scale elevation over its valid pixels; constant rasters map to 0.
fn normalize_elevation(elev: &Raster) -> Result<Raster> {
    if elev.band_count() != 1 {
        return Err(Error::InvalidRaster("elevation must be single-band".into()));
    }
    let nd = elev.bands[0].nodata;
    let vals = elev.band_values(0);
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for &v in vals {
        if !is_nodata_value(v, nd) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return Err(Error::InvalidRaster("elevation raster is all nodata".into()));
    }
    let span = hi - lo;
    let out: Vec<f32> = vals
        .iter()
        .map(|&v| {
            if is_nodata_value(v, nd) {
                NODATA
            } else if span == 0.0 {
                0.0
            } else {
                (v - lo) / span
            }
        })
        .collect();
    Raster::new(elev.grid.clone(), vec![Band::new("elev", Some(NODATA))], out)
}

/// Clip SAR dB to [-25, 0] and map to [0, 1].
fn normalize_sar(sar: &Raster, season: &str) -> Result<Raster> {
    for name in SAR_BANDS {
        sar.require_band(name)?;
    }
    let (lo, hi) = SAR_DB_RANGE;
    let mut bands = Vec::new();
    let mut values = Vec::with_capacity(2 * sar.grid.pixels());
    for name in SAR_BANDS {
        let bi = sar.require_band(name)?;
        let nd = sar.bands[bi].nodata;
        bands.push(Band::new(format!("{season}_{name}"), Some(NODATA)));
        values.extend(sar.band_values(bi).iter().map(|&v| {
            if is_nodata_value(v, nd) {
                NODATA
            } else {
                (v.clamp(lo, hi) - lo) / (hi - lo)
            }
        }));
    }
    Raster::new(sar.grid.clone(), bands, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoGrid;
    use rand::Rng;

    fn grid(w: usize, h: usize) -> GeoGrid {
        GeoGrid::new(0.0, h as f64 * 10.0, 10.0, 10.0, w, h, "EPSG:32645").unwrap()
    }

    fn optical(values: [Vec<f32>; 4], w: usize, h: usize) -> Raster {
        let bands = OPTICAL_BANDS.iter().map(|n| Band::new(*n, Some(NODATA))).collect();
        let mut flat = Vec::new();
        for v in values {
            flat.extend(v);
        }
        Raster::new(grid(w, h), bands, flat).unwrap()
    }

    /// Straight-line scalar oracle, written directly from the formulas.
    fn oracle(kind: IndexKind, r: f64, g: f64, b: f64, n: f64) -> f64 {
        match kind {
            IndexKind::Ndvi => (n - r) / (n + r),
            IndexKind::Evi => 2.5 * (n - r) / (n + 6.0 * r - 7.5 * b + 1.0),
            IndexKind::Ndwi => (g - n) / (g + n),
            IndexKind::Savi => (n - r) / (n + r + 0.5) * 1.5,
            IndexKind::Msavi => (2.0 * n + 1.0 - ((2.0 * n + 1.0).powi(2) - 8.0 * (n - r)).sqrt()) / 2.0,
            IndexKind::Mtvi => {
                1.5 * (1.2 * (n - g) - 2.5 * (r - g))
                    / ((2.0 * n + 1.0).powi(2) - (6.0 * n - 5.0 * r.sqrt()) - 0.5).sqrt()
            }
            IndexKind::Vari => (g - r) / (g + r - b),
            IndexKind::Tgi => ((120.0 * (r - b)) - (190.0 * (r - g))) / 2.0,
        }
    }

    fn index_at(kind: IndexKind, r: f32, g: f32, b: f32, n: f32) -> f32 {
        let raster = optical([vec![r], vec![g], vec![b], vec![n]], 1, 1);
        let mut diag = IndexDiagnostics::default();
        compute_index(kind, &raster, &mut diag).unwrap().values()[0]
    }

    #[test]
    fn canonical_pixel_matches_oracle() {
        let (r, g, b, n) = (0.25, 0.20, 0.05, 0.50);
        let expected = [
            (IndexKind::Ndvi, 0.333333333),
            (IndexKind::Evi, 0.238095238),
            (IndexKind::Ndwi, -0.428571429),
            (IndexKind::Savi, 0.300000000),
            (IndexKind::Msavi, 0.292893219),
            (IndexKind::Mtvi, 0.203515970),
            (IndexKind::Vari, -0.125000000),
            (IndexKind::Tgi, 7.250000000),
        ];
        for (kind, frozen) in expected {
            let got = index_at(kind, r, g, b, n) as f64;
            let want = oracle(kind, 0.25, 0.20, 0.05, 0.50);
            assert!((want - frozen).abs() < 1e-8, "{kind:?} frozen value drifted: {want}");
            assert!((got - want).abs() < 1e-6, "{kind:?}: got {got}, oracle {want}");
        }
    }

    #[test]
    fn symmetric_zero_cases_exact() {
        // N = R zeroes NDVI, SAVI, MSAVI; G = R additionally zeroes VARI.
        assert_eq!(index_at(IndexKind::Ndvi, 0.3, 0.5, 0.1, 0.3), 0.0);
        assert_eq!(index_at(IndexKind::Savi, 0.3, 0.5, 0.1, 0.3), 0.0);
        assert_eq!(index_at(IndexKind::Msavi, 0.3, 0.5, 0.1, 0.3), 0.0);
        assert_eq!(index_at(IndexKind::Vari, 0.3, 0.3, 0.1, 0.3), 0.0);
    }

    #[test]
    fn oracle_agreement_on_random_pixels() {
        let mut rng = crate::rng::stream(99, "index-oracle", &[]);
        for _ in 0..1000 {
            let (r, g, b, n) = (
                rng.gen_range(0.01f32..1.0),
                rng.gen_range(0.01f32..1.0),
                rng.gen_range(0.01f32..1.0),
                rng.gen_range(0.01f32..1.0),
            );
            for kind in IndexKind::ALL {
                let want = oracle(kind, r as f64, g as f64, b as f64, n as f64);
                // skip pixels the implementation treats as singular
                if !want.is_finite() || want.abs() > 1e6 {
                    continue;
                }
                let got = index_at(kind, r, g, b, n) as f64;
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1.0),
                    "{kind:?} at ({r},{g},{b},{n}): got {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn normalized_difference_bounds_and_scale_invariance() {
        let mut rng = crate::rng::stream(7, "index-props", &[]);
        for _ in 0..200 {
            let (r, g, b, n) = (
                rng.gen_range(0.01f32..1.0),
                rng.gen_range(0.01f32..1.0),
                rng.gen_range(0.01f32..1.0),
                rng.gen_range(0.01f32..1.0),
            );
            let ndvi = index_at(IndexKind::Ndvi, r, g, b, n);
            let ndwi = index_at(IndexKind::Ndwi, r, g, b, n);
            assert!((-1.0..=1.0).contains(&ndvi));
            assert!((-1.0..=1.0).contains(&ndwi));

            // NDVI, NDWI, VARI are invariant under scaling all bands. Stay
            // away from the VARI pole where the quotient is ill-conditioned.
            let lambda = rng.gen_range(0.2f32..1.9);
            for kind in [IndexKind::Ndvi, IndexKind::Ndwi, IndexKind::Vari] {
                if kind == IndexKind::Vari && (g + r - b).abs() < 0.05 {
                    continue;
                }
                let a = index_at(kind, r, g, b, n);
                let s = index_at(kind, r * lambda, g * lambda, b * lambda, n * lambda);
                assert!(
                    (a - s).abs() < 1e-4 * a.abs().max(1.0),
                    "{kind:?}: {a} vs {s} at lambda {lambda}"
                );
            }
        }
    }

    #[test]
    fn ndwi_singularity_fills_zero_and_counts() {
        let raster = optical([vec![0.3], vec![0.0], vec![0.1], vec![0.0]], 1, 1);
        let mut diag = IndexDiagnostics::default();
        let out = compute_index(IndexKind::Ndwi, &raster, &mut diag).unwrap();
        assert_eq!(out.values()[0], 0.0);
        assert_eq!(diag.ndwi.zero_denominator, 1);
        assert_eq!(diag.ndvi.zero_denominator, 0);
    }

    #[test]
    fn nodata_propagates_without_tally() {
        let raster = optical([vec![NODATA], vec![0.2], vec![0.1], vec![0.5]], 1, 1);
        let mut diag = IndexDiagnostics::default();
        let out = compute_index(IndexKind::Ndvi, &raster, &mut diag).unwrap();
        assert_eq!(out.values()[0], NODATA);
        assert_eq!(diag.ndvi, IndexTally::default());
    }

    #[test]
    fn missing_band_rejected() {
        let r = Raster::new(grid(1, 1), vec![Band::new("r", None)], vec![0.5]).unwrap();
        let mut diag = IndexDiagnostics::default();
        assert!(matches!(
            compute_index(IndexKind::Ndvi, &r, &mut diag),
            Err(Error::MissingBand(_))
        ));
    }

    #[test]
    fn composite_identity_and_median() {
        let mk = |v: f32| optical([vec![v; 4], vec![v; 4], vec![v; 4], vec![v; 4]], 2, 2);
        let months = vec![(6u32, mk(1.0)), (7u32, mk(2.0)), (8u32, mk(9.0))];

        let single = seasonal_composite(&months, &[7]).unwrap();
        assert_eq!(single.values(), months[1].1.values());

        let med = seasonal_composite(&months, &[6, 7, 8]).unwrap();
        assert!(med.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn composite_ignores_nodata_and_averages_even_counts() {
        let mut a = optical([vec![NODATA], vec![0.0], vec![0.0], vec![0.0]], 1, 1);
        let b = optical([vec![3.0], vec![0.0], vec![0.0], vec![0.0]], 1, 1);
        let c = optical([vec![5.0], vec![0.0], vec![0.0], vec![0.0]], 1, 1);
        a.bands[0].nodata = Some(NODATA);
        let months = vec![(1u32, a), (2u32, b), (3u32, c)];
        let out = seasonal_composite(&months, &[1, 2, 3]).unwrap();
        assert_eq!(out.values()[0], 4.0); // median of {3, 5}
    }

    #[test]
    fn composite_all_nodata_stays_nodata() {
        let mut a = optical([vec![NODATA], vec![0.1], vec![0.1], vec![0.1]], 1, 1);
        a.bands[0].nodata = Some(NODATA);
        let months = vec![(1u32, a.clone()), (2u32, a)];
        let out = seasonal_composite(&months, &[1, 2]).unwrap();
        assert!(is_nodata_value(out.values()[0], out.bands[0].nodata));
    }

    #[test]
    fn composite_is_permutation_invariant() {
        let mut rng = crate::rng::stream(5, "composite-perm", &[]);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            optical(
                [
                    (0..16).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
                    (0..16).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
                    (0..16).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
                    (0..16).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
                ],
                4,
                4,
            )
        };
        let months: Vec<(u32, Raster)> = (1..=4).map(|m| (m, mk(&mut rng))).collect();
        let fwd = seasonal_composite(&months, &[1, 2, 3, 4]).unwrap();
        let rev = seasonal_composite(&months, &[4, 2, 1, 3]).unwrap();
        assert_eq!(fwd.values(), rev.values());
    }

    #[test]
    fn composite_errors() {
        let a = optical([vec![0.1; 4], vec![0.1; 4], vec![0.1; 4], vec![0.1; 4]], 2, 2);
        let months = vec![(1u32, a)];
        assert!(matches!(seasonal_composite(&months, &[]), Err(Error::EmptyWindow)));
        assert!(matches!(seasonal_composite(&months, &[9]), Err(Error::MissingMonth(9))));
    }

    fn sources(w: usize, h: usize) -> StackSources {
        let mut rng = crate::rng::stream(1, "stack-sources", &[]);
        let mut rand_plane = |n: usize| (0..n).map(|_| rng.gen_range(0.0f32..1.0)).collect::<Vec<_>>();
        let g = grid(w, h);
        let opt = |rng_planes: [Vec<f32>; 4]| optical(rng_planes, w, h);
        let pre = opt([rand_plane(w * h), rand_plane(w * h), rand_plane(w * h), rand_plane(w * h)]);
        let grow = opt([rand_plane(w * h), rand_plane(w * h), rand_plane(w * h), rand_plane(w * h)]);
        let elevation = Raster::new(
            g.clone(),
            vec![Band::new("elev", Some(NODATA))],
            (0..w * h).map(|i| 2000.0 + i as f32).collect(),
        )
        .unwrap();
        let sar = |season_seed: u64| {
            let mut r = crate::rng::stream(season_seed, "sar", &[]);
            Raster::new(
                g.clone(),
                vec![Band::new("vv", Some(NODATA)), Band::new("vh", Some(NODATA))],
                (0..2 * w * h).map(|_| r.gen_range(-30.0f32..5.0)).collect(),
            )
            .unwrap()
        };
        StackSources {
            pre_optical: pre,
            growing_optical: grow,
            elevation: Some(elevation),
            sar_pre: Some(sar(2)),
            sar_growing: Some(sar(3)),
        }
    }

    #[test]
    fn stack_channel_counts_and_order() {
        let src = sources(4, 4);
        let mut diag = IndexDiagnostics::default();
        let cases = [
            (Variant::Rgbn, false, 8),
            (Variant::Rgbne, false, 9),
            (Variant::Rgbns, false, 12),
            (Variant::Rgbnes, false, 13),
            (Variant::Rgbn, true, 24),
            (Variant::Rgbnes, true, 29),
        ];
        for (variant, include_indices, channels) in cases {
            let spec = FeatureStackSpec { variant, include_indices, ..Default::default() };
            let out = build_feature_stack(&spec, &src, &mut diag).unwrap();
            assert_eq!(out.band_count(), channels, "{variant:?} indices={include_indices}");
            assert_eq!(out.bands[0].name, "pre_r");
            assert_eq!(out.bands[7].name, "grow_n");
        }
        let spec = FeatureStackSpec { variant: Variant::Rgbnes, include_indices: true, ..Default::default() };
        let out = build_feature_stack(&spec, &src, &mut diag).unwrap();
        assert_eq!(out.bands[8].name, "elev");
        assert_eq!(out.bands[9].name, "pre_vv");
        assert_eq!(out.bands[12].name, "grow_vh");
        assert_eq!(out.bands[13].name, "pre_ndvi");
        assert_eq!(out.bands[21].name, "grow_ndvi");
        assert_eq!(out.bands[28].name, "grow_tgi");
        // normalized bands stay in [0, 1]
        for b in 8..13 {
            for &v in out.band_values(b) {
                assert!((0.0..=1.0).contains(&v), "band {b} value {v}");
            }
        }
    }

    #[test]
    fn stack_is_deterministic() {
        let src = sources(6, 5);
        let spec = FeatureStackSpec { variant: Variant::Rgbnes, include_indices: true, ..Default::default() };
        let mut d1 = IndexDiagnostics::default();
        let mut d2 = IndexDiagnostics::default();
        let a = build_feature_stack(&spec, &src, &mut d1).unwrap();
        let b = build_feature_stack(&spec, &src, &mut d2).unwrap();
        assert_eq!(a, b);
        assert_eq!(d1, d2);
    }

    #[test]
    fn stack_missing_source_rejected() {
        let mut src = sources(4, 4);
        src.elevation = None;
        let spec = FeatureStackSpec { variant: Variant::Rgbne, ..Default::default() };
        let mut diag = IndexDiagnostics::default();
        assert!(matches!(
            build_feature_stack(&spec, &src, &mut diag),
            Err(Error::MissingSource { .. })
        ));
    }
}
