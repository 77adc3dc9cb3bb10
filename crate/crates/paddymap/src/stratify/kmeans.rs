//! Seeded Lloyd's k-means with k-means++ initialization.
//!
//! Stops when the largest relative center movement drops below 1e-4 or
//! after 100 iterations. Centers are returned sorted lexicographically so
//! the fit is a pure function of (points, k, seed).

use rand::Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{Band, Raster, NODATA};

pub const MOVEMENT_TOL: f64 = 1e-4;
pub const MAX_ITERS: usize = 100;

/// Fit k centers to N points of dimension `dim` (row-major flat layout).
pub fn kmeans_fit(points: &[f32], dim: usize, k: usize, seed: u64) -> Result<Vec<f32>> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::DimensionMismatch { expected: dim.max(1), found: points.len() });
    }
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    let mut centers = plus_plus_init(points, dim, k, n, seed);
    let mut assignment = vec![0u32; n];
    let mut last_sse = f64::INFINITY;

    for _iter in 0..MAX_ITERS {
        let sse = assign_points(points, dim, &centers, &mut assignment);
        // Lloyd never increases the objective; tolerate f32 rounding only.
        debug_assert!(
            sse <= last_sse * (1.0 + 1e-9) + 1e-9,
            "sse increased: {last_sse} -> {sse}"
        );
        last_sse = sse;

        // Recompute means; empty clusters keep their previous center.
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0u64; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c as usize] += 1;
            let p = &points[i * dim..(i + 1) * dim];
            let s = &mut sums[c as usize * dim..(c as usize + 1) * dim];
            for (acc, &v) in s.iter_mut().zip(p) {
                *acc += v as f64;
            }
        }
        let mut max_rel_move = 0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let old = centers[c * dim..(c + 1) * dim].to_vec();
            let mut norm_old = 0f64;
            let mut movement = 0f64;
            for d in 0..dim {
                let new = (sums[c * dim + d] / counts[c] as f64) as f32;
                let delta = (new - old[d]) as f64;
                movement += delta * delta;
                norm_old += (old[d] as f64) * (old[d] as f64);
                centers[c * dim + d] = new;
            }
            max_rel_move = max_rel_move.max(movement.sqrt() / (norm_old.sqrt() + 1e-12));
        }
        if max_rel_move < MOVEMENT_TOL {
            break;
        }
    }

    sort_centers(&mut centers, dim, k);
    Ok(centers)
}

fn plus_plus_init(points: &[f32], dim: usize, k: usize, n: usize, seed: u64) -> Vec<f32> {
    let mut rng = crate::rng::stream(seed, "kmeans++", &[]);
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centers.extend_from_slice(&points[first * dim..(first + 1) * dim]);

    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(&points[i * dim..(i + 1) * dim], &centers[0..dim]))
        .collect();
    while centers.len() < k * dim {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            // all remaining points coincide with a center
            rng.gen_range(0..n)
        } else {
            let mut u = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        };
        let start = centers.len();
        centers.extend_from_slice(&points[pick * dim..(pick + 1) * dim]);
        let c = centers[start..start + dim].to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = sq_dist(&points[i * dim..(i + 1) * dim], &c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centers
}

/// Assign each point to its nearest center (ties to the lowest index).
/// Returns the summed squared error.
fn assign_points(points: &[f32], dim: usize, centers: &[f32], assignment: &mut [u32]) -> f64 {
    let n = assignment.len();
    let k = centers.len() / dim;
    let chunk = 4096;
    let partials: Vec<(Vec<u32>, f64)> = par::map_range(n.div_ceil(chunk), |ci| {
        let lo = ci * chunk;
        let hi = (lo + chunk).min(n);
        let mut local = vec![0u32; hi - lo];
        let mut sse = 0f64;
        for i in lo..hi {
            let p = &points[i * dim..(i + 1) * dim];
            let (best, dist) = nearest_center(p, centers, dim, k);
            local[i - lo] = best as u32;
            sse += dist;
        }
        (local, sse)
    });
    let mut sse = 0f64;
    let mut off = 0;
    for (local, s) in partials {
        assignment[off..off + local.len()].copy_from_slice(&local);
        off += local.len();
        sse += s;
    }
    sse
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = (x - y) as f64;
        acc += d * d;
    }
    acc
}

#[inline]
fn nearest_center(p: &[f32], centers: &[f32], dim: usize, k: usize) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let d = sq_dist(p, &centers[c * dim..(c + 1) * dim]);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn sort_centers(centers: &mut [f32], dim: usize, k: usize) {
    let mut rows: Vec<Vec<f32>> = (0..k).map(|c| centers[c * dim..(c + 1) * dim].to_vec()).collect();
    rows.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });
    for (c, row) in rows.into_iter().enumerate() {
        centers[c * dim..(c + 1) * dim].copy_from_slice(&row);
    }
}

/// Per-pixel nearest-center map over a raster whose bands are the feature
/// dimensions. Nodata in any band keeps the pixel nodata.
pub fn kmeans_assign(raster: &Raster, centers: &[f32], dim: usize) -> Result<Raster> {
    if raster.band_count() != dim || centers.len() % dim != 0 {
        return Err(Error::DimensionMismatch { expected: dim, found: raster.band_count() });
    }
    let k = centers.len() / dim;
    let pixels = raster.grid.pixels();
    let width = raster.grid.width;
    let planes: Vec<&[f32]> = (0..dim).map(|b| raster.band_values(b)).collect();
    let nodatas: Vec<Option<f32>> = raster.bands.iter().map(|b| b.nodata).collect();

    let mut out = vec![0f32; pixels];
    par::for_each_chunk_mut(&mut out, width, |row, line| {
        let base = row * width;
        let mut p = vec![0f32; dim];
        for (i, dst) in line.iter_mut().enumerate() {
            let mut valid = true;
            for (d, plane) in planes.iter().enumerate() {
                let v = plane[base + i];
                if crate::raster::is_nodata_value(v, nodatas[d]) {
                    valid = false;
                    break;
                }
                p[d] = v;
            }
            *dst = if valid {
                nearest_center(&p, centers, dim, k).0 as f32
            } else {
                NODATA
            };
        }
    });
    Raster::new(raster.grid.clone(), vec![Band::new("cluster", Some(NODATA))], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoGrid;
    use rand::Rng;

    #[test]
    fn k1_returns_coordinate_mean() {
        let pts = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]; // three 2-d points
        let c = kmeans_fit(&pts, 2, 1, 7).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-6);
        assert!((c[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn two_clusters_match_exhaustive_partition() {
        // Brute-force oracle: minimize within-cluster SSE over all 2-part
        // assignments of {0, 1, 10, 11}.
        let pts = [0.0f32, 1.0, 10.0, 11.0];
        let mut best = (f64::INFINITY, [0f64; 2]);
        for mask in 1u32..(1 << 4) - 1 {
            let (mut s0, mut n0, mut s1, mut n1) = (0f64, 0f64, 0f64, 0f64);
            for (i, &p) in pts.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s0 += p as f64;
                    n0 += 1.0;
                } else {
                    s1 += p as f64;
                    n1 += 1.0;
                }
            }
            let (m0, m1) = (s0 / n0, s1 / n1);
            let sse: f64 = pts
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let m = if mask & (1 << i) != 0 { m0 } else { m1 };
                    (p as f64 - m).powi(2)
                })
                .sum();
            if sse < best.0 {
                best = (sse, [m0.min(m1), m0.max(m1)]);
            }
        }
        assert_eq!(best.1, [0.5, 10.5]);

        for seed in 0..5 {
            let c = kmeans_fit(&pts, 1, 2, seed).unwrap();
            assert!((c[0] as f64 - 0.5).abs() < 1e-6, "seed {seed}: {c:?}");
            assert!((c[1] as f64 - 10.5).abs() < 1e-6, "seed {seed}: {c:?}");
        }
    }

    #[test]
    fn k_equals_n_gives_zero_sse() {
        let pts = [0.0f32, 0.0, 3.0, 4.0, 10.0, -2.0];
        let c = kmeans_fit(&pts, 2, 3, 3).unwrap();
        // every point is its own center
        for i in 0..3 {
            let p = &pts[i * 2..i * 2 + 2];
            let found = (0..3).any(|j| c[j * 2] == p[0] && c[j * 2 + 1] == p[1]);
            assert!(found, "point {p:?} not among centers {c:?}");
        }
    }

    #[test]
    fn input_validation() {
        assert!(matches!(kmeans_fit(&[1.0, 2.0], 1, 3, 0), Err(Error::KTooLarge { .. })));
        assert!(matches!(kmeans_fit(&[1.0, f32::NAN], 1, 1, 0), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn fit_is_deterministic_and_sorted() {
        let mut rng = crate::rng::stream(10, "kmeans-det", &[]);
        let pts: Vec<f32> = (0..400).map(|_| rng.gen_range(-5.0f32..5.0)).collect();
        let a = kmeans_fit(&pts, 4, 7, 42).unwrap();
        let b = kmeans_fit(&pts, 4, 7, 42).unwrap();
        assert_eq!(a, b);
        for w in a.chunks(4).collect::<Vec<_>>().windows(2) {
            assert!(w[0] <= w[1], "centers not sorted: {:?} > {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn assign_matches_brute_force_on_random_raster() {
        let mut rng = crate::rng::stream(4, "assign", &[]);
        let grid = GeoGrid::new(0.0, 160.0, 10.0, 10.0, 16, 16, "EPSG:32645").unwrap();
        let dim = 3;
        let values: Vec<f32> = (0..dim * 256).map(|_| rng.gen_range(-2.0f32..2.0)).collect();
        let bands = (0..dim).map(|i| Band::new(format!("f{i}"), Some(NODATA))).collect();
        let raster = Raster::new(grid, bands, values).unwrap();
        let centers: Vec<f32> = (0..5 * dim).map(|_| rng.gen_range(-2.0f32..2.0)).collect();

        let assigned = kmeans_assign(&raster, &centers, dim).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                let p: Vec<f32> = (0..dim).map(|b| raster.value(b, col, row)).collect();
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for c in 0..5 {
                    let d = sq_dist(&p, &centers[c * dim..(c + 1) * dim]);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                assert_eq!(assigned.value(0, col, row), best as f32);
            }
        }
    }

    #[test]
    fn assign_exact_center_and_tie_rule() {
        let grid = GeoGrid::new(0.0, 10.0, 10.0, 10.0, 2, 1, "EPSG:32645").unwrap();
        // pixel 0 sits exactly on center 1; pixel 1 is equidistant from
        // centers 0 and 2 (and farther from 1) -> tie falls to index 0.
        let raster = Raster::new(
            grid,
            vec![Band::new("f0", Some(NODATA))],
            vec![5.0, 2.0],
        )
        .unwrap();
        let centers = vec![1.0f32, 5.0, 3.0];
        let out = kmeans_assign(&raster, &centers, 1).unwrap();
        assert_eq!(out.value(0, 0, 0), 1.0);
        assert_eq!(out.value(0, 1, 0), 0.0);
    }

    #[test]
    fn assign_keeps_nodata() {
        let grid = GeoGrid::new(0.0, 10.0, 10.0, 10.0, 2, 1, "EPSG:32645").unwrap();
        let raster = Raster::new(grid, vec![Band::new("f0", Some(NODATA))], vec![NODATA, 1.0]).unwrap();
        let out = kmeans_assign(&raster, &[0.0, 2.0], 1).unwrap();
        assert_eq!(out.value(0, 0, 0), NODATA);
        assert_eq!(out.value(0, 1, 0), 0.0);
    }

    #[test]
    fn assign_dimension_mismatch() {
        let grid = GeoGrid::new(0.0, 10.0, 10.0, 10.0, 1, 1, "EPSG:32645").unwrap();
        let raster = Raster::new(grid, vec![Band::new("f0", None)], vec![1.0]).unwrap();
        assert!(matches!(
            kmeans_assign(&raster, &[0.0, 0.0], 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sse_non_increasing_over_iterations() {
        // Drive the internal assignment/update cycle manually and track SSE.
        let mut rng = crate::rng::stream(21, "sse", &[]);
        let dim = 2;
        let pts: Vec<f32> = (0..600).map(|_| rng.gen_range(-10.0f32..10.0)).collect();
        let n = pts.len() / dim;
        let k = 6;
        let mut centers = plus_plus_init(&pts, dim, k, n, 9);
        let mut assignment = vec![0u32; n];
        let mut prev = f64::INFINITY;
        for _ in 0..20 {
            let sse = assign_points(&pts, dim, &centers, &mut assignment);
            assert!(sse <= prev * (1.0 + 1e-9) + 1e-9, "sse increased {prev} -> {sse}");
            prev = sse;
            let mut sums = vec![0f64; k * dim];
            let mut counts = vec![0u64; k];
            for (i, &c) in assignment.iter().enumerate() {
                counts[c as usize] += 1;
                for d in 0..dim {
                    sums[c as usize * dim + d] += pts[i * dim + d] as f64;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for d in 0..dim {
                        centers[c * dim + d] = (sums[c * dim + d] / counts[c] as f64) as f32;
                    }
                }
            }
        }
    }
}
