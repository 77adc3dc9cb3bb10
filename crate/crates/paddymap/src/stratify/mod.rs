//! Weak-label construction, stratified point sampling, patch extraction and
//! the train/val/test split.
//!
//! Labels come from three sources layered together: unsupervised k-means
//! clusters over the optical composite, a coarse reference land-cover raster
//! that names each cluster by majority vote (with a manual override table),
//! and digitized rice polygons burned on top as class 0.

pub mod kmeans;
pub mod records;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{is_nodata_value, PolygonSet, Raster, NODATA};
use records::{RecordSet, SampleRecord, SplitTag};

/// Ordered class scheme: ids are contiguous from 0.
pub const CLASS_NAMES: [&str; 5] = ["rice", "cropland", "forest", "builtup", "other"];
pub const CLASS_COUNT: usize = 5;
pub const RICE_CLASS: u8 = 0;

/// The four non-rice classes produced by cluster remapping, in id order.
pub const FOUR_CLASS_NAMES: [&str; 4] = ["cropland", "forest", "builtup", "other"];

pub fn parse_class_name(name: &str) -> Option<u8> {
    let n = name.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
    CLASS_NAMES.iter().position(|c| *c == n).map(|i| i as u8)
}

/// Parse a four-class name (used by the override table and reference map).
pub fn parse_four_class(name: &str) -> Option<u8> {
    let n = name.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
    FOUR_CLASS_NAMES.iter().position(|c| *c == n).map(|i| i as u8)
}

// ---------------------------------------------------------------------------
// Cluster remapping and rice overlay
// ---------------------------------------------------------------------------

/// Manual override table: "cluster_id class_name" per line.
pub fn parse_override_table(text: &str) -> Result<BTreeMap<u32, u8>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let err = |detail: String| Error::BadRow { row: lineno + 1, detail };
        let cluster: u32 = it
            .next()
            .ok_or_else(|| err("missing cluster id".into()))?
            .parse()
            .map_err(|_| err("bad cluster id".into()))?;
        let name = it.next().ok_or_else(|| err("missing class name".into()))?;
        let class = parse_four_class(name).ok_or_else(|| err(format!("unknown class {name:?}")))?;
        out.insert(cluster, class);
    }
    Ok(out)
}

/// Name each cluster by the majority reference class over its pixels;
/// explicit overrides win. Returns a 4-class map (ids 0..3 in
/// [`FOUR_CLASS_NAMES`] order). `reference_mapping` translates raw reference
/// raster codes into 4-class ids.
pub fn remap_clusters(
    clusters: &Raster,
    reference: &Raster,
    reference_mapping: &BTreeMap<i64, u8>,
    overrides: &BTreeMap<u32, u8>,
) -> Result<Raster> {
    if clusters.grid != reference.grid {
        return Err(Error::GridMismatch("cluster and reference grids differ".into()));
    }
    let cvals = clusters.band_values(0);
    let cnd = clusters.bands[0].nodata;
    let rvals = reference.band_values(0);
    let rnd = reference.bands[0].nodata;

    // Majority vote per cluster id.
    let mut counts: BTreeMap<u32, [u64; 4]> = BTreeMap::new();
    for (&cv, &rv) in cvals.iter().zip(rvals) {
        if is_nodata_value(cv, cnd) {
            continue;
        }
        let cluster = cv as u32;
        let tally = counts.entry(cluster).or_default();
        if is_nodata_value(rv, rnd) {
            continue;
        }
        let code = rv as i64;
        let class = *reference_mapping
            .get(&code)
            .ok_or_else(|| Error::Other(format!("reference class {code} has no 4-class mapping")))?;
        tally[class as usize] += 1;
    }

    let mut cluster_class: BTreeMap<u32, u8> = BTreeMap::new();
    for (&cluster, tally) in &counts {
        if let Some(&class) = overrides.get(&cluster) {
            cluster_class.insert(cluster, class);
            continue;
        }
        let total: u64 = tally.iter().sum();
        if total == 0 {
            return Err(Error::EmptyCluster(cluster));
        }
        // ties go to the lowest class id
        let mut best = 0usize;
        for c in 1..4 {
            if tally[c] > tally[best] {
                best = c;
            }
        }
        cluster_class.insert(cluster, best as u8);
    }
    for (&cluster, &class) in overrides {
        cluster_class.entry(cluster).or_insert(class);
    }

    let values: Vec<f32> = cvals
        .iter()
        .map(|&cv| {
            if is_nodata_value(cv, cnd) {
                NODATA
            } else {
                cluster_class[&(cv as u32)] as f32
            }
        })
        .collect();
    Raster::new(
        clusters.grid.clone(),
        vec![crate::raster::Band::new("class4", Some(NODATA))],
        values,
    )
}

/// Overlay the rice mask on a 4-class map, producing the 5-class scheme:
/// masked pixels become rice (0), everything else shifts up by one.
/// A mask pixel counts as rice when it is valid and non-zero.
pub fn merge_rice(four_class: &Raster, rice_mask: &Raster) -> Result<Raster> {
    if four_class.grid != rice_mask.grid {
        return Err(Error::GridMismatch("class map and rice mask grids differ".into()));
    }
    let cvals = four_class.band_values(0);
    let cnd = four_class.bands[0].nodata;
    let mvals = rice_mask.band_values(0);
    let mnd = rice_mask.bands[0].nodata;
    let values: Vec<f32> = cvals
        .iter()
        .zip(mvals)
        .map(|(&cv, &mv)| {
            let masked = !is_nodata_value(mv, mnd) && mv != 0.0;
            if masked {
                RICE_CLASS as f32
            } else if is_nodata_value(cv, cnd) {
                NODATA
            } else {
                cv + 1.0
            }
        })
        .collect();
    Raster::new(
        four_class.grid.clone(),
        vec![crate::raster::Band::new("class", Some(NODATA))],
        values,
    )
}

// ---------------------------------------------------------------------------
// Stratified sampling
// ---------------------------------------------------------------------------

/// One georeferenced class-labeled point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub class_id: u8,
    pub source: String,
}

pub type LabeledPointSet = Vec<LabeledPoint>;

/// Uniform, seeded, without-replacement sampling of pixel centers per class
/// stratum inside the region polygon.
pub fn stratified_sample(
    labels: &Raster,
    counts: &[usize; CLASS_COUNT],
    region: &PolygonSet,
    seed: u64,
) -> Result<LabeledPointSet> {
    region.validate()?;
    let vals = labels.band_values(0);
    let nd = labels.bands[0].nodata;
    let grid = &labels.grid;

    // Candidate pixel indices per class, in row-major order.
    let mut candidates: Vec<Vec<u32>> = vec![Vec::new(); CLASS_COUNT];
    for row in 0..grid.height {
        for col in 0..grid.width {
            let v = vals[row * grid.width + col];
            if is_nodata_value(v, nd) {
                continue;
            }
            let class = v as i64;
            if !(0..CLASS_COUNT as i64).contains(&class) {
                continue;
            }
            let (x, y) = grid.pixel_center(col, row);
            if region.contains(x, y) {
                candidates[class as usize].push((row * grid.width + col) as u32);
            }
        }
    }

    let mut points = Vec::with_capacity(counts.iter().sum());
    let mut next_id = 0u64;
    for class in 0..CLASS_COUNT {
        let want = counts[class];
        let pool = &mut candidates[class];
        if want > pool.len() {
            return Err(Error::InsufficientStratum {
                class_id: class as u32,
                available: pool.len(),
                requested: want,
            });
        }
        // partial Fisher-Yates: the first `want` entries are the sample
        let mut rng = crate::rng::stream(seed, "stratum", &[class as u64]);
        for i in 0..want {
            let j = i + rand::Rng::gen_range(&mut rng, 0..pool.len() - i);
            pool.swap(i, j);
        }
        for &pix in pool[..want].iter() {
            let (col, row) = (pix as usize % grid.width, pix as usize / grid.width);
            let (x, y) = grid.pixel_center(col, row);
            points.push(LabeledPoint {
                id: next_id,
                x,
                y,
                class_id: class as u8,
                source: "stratified".into(),
            });
            next_id += 1;
        }
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// Patch extraction
// ---------------------------------------------------------------------------

/// Per-class accounting for the sampling report.
#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct ClassExtract {
    pub requested: usize,
    pub obtained: usize,
    pub dropped_edge: usize,
    pub dropped_invalid: usize,
}

#[derive(Debug, Clone, Default, Serialize, PartialEq, Eq)]
pub struct SamplingReport {
    pub patch_size: usize,
    pub per_class: BTreeMap<String, ClassExtract>,
}

impl SamplingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialize")
    }
}

/// Cut feature/label patches centered on each point. The point's pixel lands
/// at patch index (S/2, S/2); points whose patch would leave the raster are
/// dropped and reported, as are patches touching nodata.
pub fn extract_patches(
    features: &Raster,
    labels: &Raster,
    points: &LabeledPointSet,
    size: usize,
) -> Result<(RecordSet, SamplingReport)> {
    if size != 1 && size != 256 {
        return Err(Error::InvalidSpec(format!("patch size must be 1 or 256, got {size}")));
    }
    if features.grid != labels.grid {
        return Err(Error::GridMismatch("feature and label grids differ".into()));
    }
    let grid = &features.grid;
    let channels = features.band_count();
    let mut set = RecordSet::new(channels, size);
    let mut report = SamplingReport { patch_size: size, ..Default::default() };
    for name in CLASS_NAMES {
        report.per_class.insert(name.to_string(), ClassExtract::default());
    }

    let lvals = labels.band_values(0);
    let lnd = labels.bands[0].nodata;
    let half = size / 2;

    for point in points {
        let entry = report
            .per_class
            .get_mut(CLASS_NAMES[point.class_id as usize])
            .expect("class entry");
        entry.requested += 1;

        let Some((pc, pr)) = grid.locate(point.x, point.y) else {
            entry.dropped_edge += 1;
            continue;
        };
        if pc < half || pr < half || pc - half + size > grid.width || pr - half + size > grid.height {
            entry.dropped_edge += 1;
            continue;
        }
        let (c0, r0) = (pc - half, pr - half);

        // label patch: one-hot, any invalid class drops the patch
        let mut label_patch = vec![0f32; CLASS_COUNT * size * size];
        let mut valid = true;
        'rows: for dy in 0..size {
            let base = (r0 + dy) * grid.width + c0;
            for dx in 0..size {
                let v = lvals[base + dx];
                if is_nodata_value(v, lnd) || v < 0.0 || v >= CLASS_COUNT as f32 || v.fract() != 0.0 {
                    valid = false;
                    break 'rows;
                }
                label_patch[(v as usize) * size * size + dy * size + dx] = 1.0;
            }
        }
        if !valid {
            entry.dropped_invalid += 1;
            continue;
        }

        // feature patch, channel-major
        let mut feat_patch = vec![0f32; channels * size * size];
        'bands: for b in 0..channels {
            let plane = features.band_values(b);
            let bnd = features.bands[b].nodata;
            for dy in 0..size {
                let base = (r0 + dy) * grid.width + c0;
                let dst = b * size * size + dy * size;
                for dx in 0..size {
                    let v = plane[base + dx];
                    if is_nodata_value(v, bnd) {
                        valid = false;
                        break 'bands;
                    }
                    feat_patch[dst + dx] = v;
                }
            }
        }
        if !valid {
            entry.dropped_invalid += 1;
            continue;
        }

        entry.obtained += 1;
        set.records.push(SampleRecord {
            point_id: point.id,
            split: SplitTag::Unassigned,
            features: feat_patch,
            labels: label_patch,
        });
    }
    Ok((set, report))
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

/// Class-stratified shuffle split. Sizes per stratum are
/// floor(fraction * n) with the remainder assigned to train.
pub fn split(
    set: RecordSet,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(RecordSet, RecordSet, RecordSet)> {
    let (ft, fv, fs) = fractions;
    let sum = ft + fv + fs;
    if (sum - 1.0).abs() > 1e-9 || ft < 0.0 || fv < 0.0 || fs < 0.0 {
        return Err(Error::BadFractions(sum));
    }
    if set.records.is_empty() {
        return Err(Error::EmptyInput("split".into()));
    }
    let size = set.patch_size;
    let channels = set.channels;

    // stratify by center-pixel class, preserving input order per stratum
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); CLASS_COUNT];
    for (i, r) in set.records.iter().enumerate() {
        strata[r.center_class(size) as usize].push(i);
    }

    let mut assignment = vec![SplitTag::Unassigned; set.records.len()];
    for (class, mut idxs) in strata.into_iter().enumerate() {
        let n = idxs.len();
        if n == 0 {
            continue;
        }
        let mut rng = crate::rng::stream(seed, "split", &[class as u64]);
        for i in 0..n.saturating_sub(1) {
            let j = i + rand::Rng::gen_range(&mut rng, 0..n - i);
            idxs.swap(i, j);
        }
        let t = (ft * n as f64 + 1e-9).floor() as usize;
        let v = (fv * n as f64 + 1e-9).floor() as usize;
        let s = (fs * n as f64 + 1e-9).floor() as usize;
        let train_n = t + (n - t - v - s); // remainder to train
        for (pos, &i) in idxs.iter().enumerate() {
            assignment[i] = if pos < train_n {
                SplitTag::Train
            } else if pos < train_n + v {
                SplitTag::Val
            } else {
                SplitTag::Test
            };
        }
    }

    let mut train = RecordSet::new(channels, size);
    let mut val = RecordSet::new(channels, size);
    let mut test = RecordSet::new(channels, size);
    for (record, tag) in set.records.into_iter().zip(assignment) {
        let mut record = record;
        record.split = tag;
        match tag {
            SplitTag::Train => train.records.push(record),
            SplitTag::Val => val.records.push(record),
            SplitTag::Test => test.records.push(record),
            SplitTag::Unassigned => unreachable!("every record gets a split"),
        }
    }
    Ok((train, val, test))
}

/// One-hot encode a class id.
pub fn one_hot(class: u8) -> [f32; CLASS_COUNT] {
    let mut out = [0f32; CLASS_COUNT];
    out[class as usize] = 1.0;
    out
}

/// Argmax decode of a one-hot vector.
pub fn one_hot_decode(v: &[f32]) -> u8 {
    let mut best = 0u8;
    let mut best_v = f32::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        if x > best_v {
            best_v = x;
            best = i as u8;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Band, GeoGrid, Ring};

    fn grid(w: usize, h: usize) -> GeoGrid {
        GeoGrid::new(0.0, h as f64 * 10.0, 10.0, 10.0, w, h, "EPSG:32645").unwrap()
    }

    fn class_raster(values: Vec<f32>, w: usize, h: usize) -> Raster {
        Raster::new(grid(w, h), vec![Band::new("class", Some(NODATA))], values).unwrap()
    }

    fn whole_region(w: usize, h: usize) -> PolygonSet {
        PolygonSet { rings: vec![Ring::rect(1, -1.0, -1.0, w as f64 * 10.0 + 1.0, h as f64 * 10.0 + 1.0)] }
    }

    #[test]
    fn remap_unanimous_majority() {
        let clusters = class_raster(vec![0.0; 9], 3, 3);
        let reference = class_raster(vec![20.0; 9], 3, 3); // code 20 = forest
        let mapping = BTreeMap::from([(20i64, 1u8)]);
        let out = remap_clusters(&clusters, &reference, &mapping, &BTreeMap::new()).unwrap();
        assert!(out.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn remap_counted_majority_60_40() {
        // one cluster of 10 pixels: 6 built-up, 4 other
        let clusters = class_raster(vec![0.0; 10], 5, 2);
        let mut ref_vals = vec![30.0; 6];
        ref_vals.extend(vec![40.0; 4]);
        let reference = class_raster(ref_vals, 5, 2);
        let mapping = BTreeMap::from([(30i64, 2u8), (40i64, 3u8)]);
        let out = remap_clusters(&clusters, &reference, &mapping, &BTreeMap::new()).unwrap();
        assert!(out.values().iter().all(|&v| v == 2.0)); // builtup
    }

    #[test]
    fn remap_override_beats_majority() {
        let clusters = class_raster(vec![3.0; 4], 2, 2);
        let reference = class_raster(vec![20.0; 4], 2, 2);
        let mapping = BTreeMap::from([(20i64, 1u8)]);
        let overrides = BTreeMap::from([(3u32, 0u8)]); // cropland
        let out = remap_clusters(&clusters, &reference, &mapping, &overrides).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn remap_empty_cluster_requires_override() {
        // cluster 1 exists in the map but all its reference pixels are nodata
        let clusters = class_raster(vec![0.0, 0.0, 1.0, 1.0], 2, 2);
        let reference = class_raster(vec![20.0, 20.0, NODATA, NODATA], 2, 2);
        let mapping = BTreeMap::from([(20i64, 1u8)]);
        let err = remap_clusters(&clusters, &reference, &mapping, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::EmptyCluster(1)));
        let overrides = BTreeMap::from([(1u32, 3u8)]);
        let out = remap_clusters(&clusters, &reference, &mapping, &overrides).unwrap();
        assert_eq!(out.values(), &[1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn merge_rice_empty_mask_shifts_ids() {
        let four = class_raster(vec![0.0, 1.0, 2.0, 3.0], 2, 2);
        let mask = class_raster(vec![NODATA; 4], 2, 2);
        let out = merge_rice(&four, &mask).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn merge_rice_mask_overrides_forest() {
        let four = class_raster(vec![1.0, 1.0, 1.0, 1.0], 2, 2); // all forest
        let mask = class_raster(vec![1.0, NODATA, 1.0, NODATA], 2, 2);
        let out = merge_rice(&four, &mask).unwrap();
        assert_eq!(out.values(), &[0.0, 2.0, 0.0, 2.0]);
    }

    #[test]
    fn merge_rice_histogram_accounting() {
        let four = class_raster(vec![0.0; 16], 4, 4);
        let mut mask_vals = vec![NODATA; 16];
        for i in [1, 5, 6, 11] {
            mask_vals[i] = 1.0;
        }
        let mask = class_raster(mask_vals, 4, 4);
        let out = merge_rice(&four, &mask).unwrap();
        let rice = out.values().iter().filter(|&&v| v == 0.0).count();
        let cropland = out.values().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(rice, 4);
        assert_eq!(cropland, 12);
    }

    #[test]
    fn override_table_parsing() {
        let table = parse_override_table("3 cropland\n5 built-up\n# comment\n0 other\n").unwrap();
        assert_eq!(table, BTreeMap::from([(3u32, 0u8), (5u32, 2u8), (0u32, 3u8)]));
        assert!(parse_override_table("1 water").is_err());
    }

    #[test]
    fn sample_respects_strata_exactly() {
        // 20x20 raster: rows 0..8 rice, 8..12 cropland, 12..16 forest,
        // 16..18 builtup, 18..20 other
        let mut vals = Vec::new();
        for row in 0..20 {
            let class = match row {
                0..=7 => 0.0,
                8..=11 => 1.0,
                12..=15 => 2.0,
                16..=17 => 3.0,
                _ => 4.0,
            };
            vals.extend(std::iter::repeat(class).take(20));
        }
        let labels = class_raster(vals, 20, 20);
        let counts = [50, 30, 20, 10, 0];
        let points = stratified_sample(&labels, &counts, &whole_region(20, 20), 77).unwrap();
        assert_eq!(points.len(), 110);
        for class in 0..5u8 {
            let got = points.iter().filter(|p| p.class_id == class).count();
            assert_eq!(got, counts[class as usize], "class {class}");
        }
        // every point's label-raster lookup matches its stratum
        for p in &points {
            let (col, row) = labels.grid.locate(p.x, p.y).unwrap();
            assert_eq!(labels.value(0, col, row) as u8, p.class_id);
        }
        // deterministic under seed
        let again = stratified_sample(&labels, &counts, &whole_region(20, 20), 77).unwrap();
        assert_eq!(again, points);
        let other = stratified_sample(&labels, &counts, &whole_region(20, 20), 78).unwrap();
        assert_ne!(other, points);
    }

    #[test]
    fn sample_insufficient_stratum() {
        let labels = class_raster(vec![0.0; 4], 2, 2);
        let err = stratified_sample(&labels, &[5, 0, 0, 0, 0], &whole_region(2, 2), 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientStratum { class_id: 0, available: 4, requested: 5 }));
    }

    #[test]
    fn sample_region_filter_applies() {
        let labels = class_raster(vec![0.0; 16], 4, 4);
        // region covers only the left half: centers at x = 5, 15
        let region = PolygonSet { rings: vec![Ring::rect(1, 0.0, 0.0, 20.0, 40.0)] };
        let points = stratified_sample(&labels, &[8, 0, 0, 0, 0], &region, 3).unwrap();
        assert_eq!(points.len(), 8);
        assert!(points.iter().all(|p| p.x < 20.0));
        assert!(matches!(
            stratified_sample(&labels, &[9, 0, 0, 0, 0], &region, 3),
            Err(Error::InsufficientStratum { .. })
        ));
    }

    fn feature_raster(channels: usize, w: usize, h: usize) -> Raster {
        let bands = (0..channels).map(|i| Band::new(format!("f{i}"), Some(NODATA))).collect();
        let values: Vec<f32> = (0..channels * w * h).map(|i| i as f32 * 0.001).collect();
        Raster::new(grid(w, h), bands, values).unwrap()
    }

    #[test]
    fn extract_single_pixel_patches() {
        let features = feature_raster(3, 8, 8);
        let labels = class_raster((0..64).map(|i| (i % 5) as f32).collect(), 8, 8);
        let points = stratified_sample(&labels, &[3, 3, 3, 3, 3], &whole_region(8, 8), 5).unwrap();
        let (set, report) = extract_patches(&features, &labels, &points, 1).unwrap();
        assert_eq!(set.records.len(), 15);
        for r in &set.records {
            assert_eq!(r.features.len(), 3);
            assert_eq!(r.labels.len(), 5);
            let sum: f32 = r.labels.iter().sum();
            assert_eq!(sum, 1.0);
            let point = points.iter().find(|p| p.id == r.point_id).unwrap();
            assert_eq!(one_hot_decode(&r.labels), point.class_id);
        }
        for entry in report.per_class.values() {
            assert_eq!(entry.requested, entry.obtained);
        }
    }

    #[test]
    fn extract_drops_edge_points_and_reports() {
        // 300x300 raster: a 256 patch fits only for centers in [128, 172)
        let g = grid(300, 300);
        let features =
            Raster::new(g.clone(), vec![Band::new("f0", Some(NODATA))], vec![0.5; 300 * 300]).unwrap();
        let labels = class_raster(vec![0.0; 300 * 300], 300, 300);
        let inside = g.pixel_center(150, 150);
        let near_edge = g.pixel_center(10, 150); // 10 px from the left edge
        let points = vec![
            LabeledPoint { id: 0, x: inside.0, y: inside.1, class_id: 0, source: "t".into() },
            LabeledPoint { id: 1, x: near_edge.0, y: near_edge.1, class_id: 0, source: "t".into() },
        ];
        let (set, report) = extract_patches(&features, &labels, &points, 256).unwrap();
        assert_eq!(set.records.len(), 1);
        assert_eq!(set.records[0].point_id, 0);
        let rice = &report.per_class["rice"];
        assert_eq!(rice.requested, 2);
        assert_eq!(rice.obtained, 1);
        assert_eq!(rice.dropped_edge, 1);
        // center pixel of the patch carries the point's class
        assert_eq!(set.records[0].center_class(256), 0);
    }

    #[test]
    fn extract_patch_center_indexing() {
        // distinct labels let us verify the center pixel lands at (S/2, S/2)
        let g = grid(300, 300);
        let features =
            Raster::new(g.clone(), vec![Band::new("f0", Some(NODATA))], (0..90000).map(|i| i as f32).collect())
                .unwrap();
        let mut lvals = vec![1.0f32; 300 * 300];
        lvals[150 * 300 + 151] = 0.0; // the sample point's pixel is rice
        let labels = class_raster(lvals, 300, 300);
        let (x, y) = g.pixel_center(151, 150);
        let points = vec![LabeledPoint { id: 9, x, y, class_id: 0, source: "t".into() }];
        let (set, _) = extract_patches(&features, &labels, &points, 256).unwrap();
        let rec = &set.records[0];
        // feature at patch center equals the raster value at the point pixel
        let center_idx = 128 * 256 + 128;
        assert_eq!(rec.features[center_idx], features.value(0, 151, 150));
        assert_eq!(rec.center_class(256), 0);
        // one-hot everywhere
        for p in 0..256 * 256 {
            let s: f32 = (0..5).map(|c| rec.labels[c * 65536 + p]).sum();
            assert_eq!(s, 1.0);
        }
    }

    fn toy_set(per_class: &[usize; 5]) -> RecordSet {
        let mut set = RecordSet::new(2, 1);
        let mut id = 0;
        for (class, &n) in per_class.iter().enumerate() {
            for _ in 0..n {
                set.records.push(SampleRecord {
                    point_id: id,
                    split: SplitTag::Unassigned,
                    features: vec![0.0, 0.0],
                    labels: one_hot(class as u8).to_vec(),
                });
                id += 1;
            }
        }
        set
    }

    #[test]
    fn split_floor_rule_single_stratum() {
        let set = toy_set(&[10, 0, 0, 0, 0]);
        let (train, val, test) = split(set, (0.7, 0.2, 0.1), 1).unwrap();
        assert_eq!((train.records.len(), val.records.len(), test.records.len()), (7, 2, 1));
    }

    #[test]
    fn split_paper_scale_totals() {
        // remainder-to-train, per stratum: floors are 8509/2431/1215 for a
        // single 12157-point stratum; the 2 leftovers go to train.
        let set = toy_set(&[12157, 0, 0, 0, 0]);
        let (train, val, test) = split(set, (0.7, 0.2, 0.1), 5).unwrap();
        assert_eq!(
            (train.records.len(), val.records.len(), test.records.len()),
            (8511, 2431, 1215)
        );

        // with the published per-class counts the same rule gives 8512/2430/1215
        let set = toy_set(&[4332, 1030, 2230, 2682, 1883]);
        let (train, val, test) = split(set, (0.7, 0.2, 0.1), 5).unwrap();
        let total = train.records.len() + val.records.len() + test.records.len();
        assert_eq!(total, 12157);
        assert_eq!(
            (train.records.len(), val.records.len(), test.records.len()),
            (8512, 2430, 1215)
        );
    }

    #[test]
    fn split_preserves_membership_and_is_deterministic() {
        let set = toy_set(&[23, 17, 11, 7, 3]);
        let ids: std::collections::BTreeSet<u64> = set.records.iter().map(|r| r.point_id).collect();
        let (t1, v1, s1) = split(set.clone(), (0.7, 0.2, 0.1), 42).unwrap();
        let mut union = std::collections::BTreeSet::new();
        for r in t1.records.iter().chain(&v1.records).chain(&s1.records) {
            assert!(union.insert(r.point_id), "duplicate {}", r.point_id);
        }
        assert_eq!(union, ids);

        let (t2, v2, s2) = split(set, (0.7, 0.2, 0.1), 42).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn split_validation() {
        assert!(matches!(
            split(toy_set(&[1, 0, 0, 0, 0]), (0.5, 0.2, 0.1), 0),
            Err(Error::BadFractions(_))
        ));
        assert!(matches!(
            split(RecordSet::new(1, 1), (0.7, 0.2, 0.1), 0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn one_hot_roundtrip() {
        for class in 0..CLASS_COUNT as u8 {
            assert_eq!(one_hot_decode(&one_hot(class)), class);
        }
    }
}
