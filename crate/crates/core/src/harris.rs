//! Harris keypoints with size-aware local non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::filter::{convolve_separable, gaussian_kernel, max_filter, truncation_radius};
use crate::image::GrayImage;
use crate::pmom::central_differences;

/// A detected corner in the full-resolution frame of its image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// Gaussian-windowed gradient products.
#[derive(Clone, Debug)]
pub struct StructureTensorField {
    pub sxx: GrayImage,
    pub sxy: GrayImage,
    pub syy: GrayImage,
}

/// Accumulate `gx^2`, `gx gy`, `gy^2` under a unit-mass Gaussian window of
/// standard deviation `window_sigma`, truncated at `ceil(3 sigma)`.
pub fn structure_tensor(img: &GrayImage, window_sigma: f64) -> StructureTensorField {
    let (gx, gy) = central_differences(img);
    let k = gaussian_kernel(window_sigma, truncation_radius(window_sigma), true);
    let prod = |f: fn(f64, f64) -> f64| {
        let data = gx
            .as_slice()
            .iter()
            .zip(gy.as_slice())
            .map(|(&a, &b)| f(a, b))
            .collect();
        GrayImage::new(img.width(), img.height(), data).expect("same dims")
    };
    StructureTensorField {
        sxx: convolve_separable(&prod(|a, _| a * a), &k),
        sxy: convolve_separable(&prod(|a, b| a * b), &k),
        syy: convolve_separable(&prod(|_, b| b * b), &k),
    }
}

/// `det(M) / tr(M)` per pixel; pixels whose trace is below `1e-12` score 0.
pub fn cornerness_map(img: &GrayImage, window_sigma: f64) -> GrayImage {
    let st = structure_tensor(img, window_sigma);
    let data = st
        .sxx
        .as_slice()
        .iter()
        .zip(st.sxy.as_slice())
        .zip(st.syy.as_slice())
        .map(|((&a, &b), &c)| cornerness(a, b, c))
        .collect();
    GrayImage::new(img.width(), img.height(), data).expect("same dims")
}

#[inline]
pub(crate) fn cornerness(sxx: f64, sxy: f64, syy: f64) -> f64 {
    let tr = sxx + syy;
    if tr < 1e-12 {
        0.0
    } else {
        (sxx * syy - sxy * sxy) / tr
    }
}

/// Suppression-window scale factor between two images:
/// `sqrt(M N / (m n))` with `(M, N)` the larger-area image.
pub fn lnms_ratio(size_a: (usize, usize), size_b: (usize, usize)) -> f64 {
    let a = (size_a.0 * size_a.1) as f64;
    let b = (size_b.0 * size_b.1) as f64;
    (a.max(b) / a.min(b)).sqrt()
}

/// Window ratios for a reference/sensed pair: the larger-area image gets
/// [`lnms_ratio`], the other gets 1. Equal areas give 1 for both.
pub fn window_ratios(ref_size: (usize, usize), sen_size: (usize, usize)) -> (f64, f64) {
    let r = lnms_ratio(ref_size, sen_size);
    if ref_size.0 * ref_size.1 >= sen_size.0 * sen_size.1 {
        (r, 1.0)
    } else {
        (1.0, r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarrisParams {
    /// Standard deviation of the structure-tensor window.
    pub window_sigma: f64,
    pub max_points: usize,
    /// Suppression window side (pixels) before ratio scaling.
    pub base_window: f64,
    /// Keypoints closer than this to any border are dropped.
    pub border_margin: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            window_sigma: 1.5,
            max_points: 2000,
            base_window: 11.0,
            border_margin: 48,
        }
    }
}

/// Detect up to `max_points` corners, strongest first.
///
/// A pixel is a candidate when its cornerness is positive and maximal within
/// the square suppression window of side `base_window * ratio`. Candidates
/// are accepted greedily in score order, rejecting any closer than half the
/// window side to an already accepted point.
pub fn detect(img: &GrayImage, params: &HarrisParams, ratio: f64) -> Vec<Keypoint> {
    assert!(params.max_points >= 1, "max_points must be at least 1");
    assert!(ratio > 0.0, "ratio must be positive");
    let (w, h) = img.dims();
    let m = params.border_margin;
    if w < 3 || h < 3 || w <= 2 * m || h <= 2 * m {
        return Vec::new();
    }
    let side = params.base_window * ratio;
    let radius = ((side / 2.0).floor() as usize).max(1);
    let min_dist = side / 2.0;

    let cm = cornerness_map(img, params.window_sigma);
    let peaks = max_filter(&cm, radius);

    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for y in m..h - m {
        for x in m..w - m {
            let v = cm.get(x, y);
            if v > 0.0 && v >= peaks.get(x, y) {
                candidates.push((x, y, v));
            }
        }
    }
    // row-major scan order breaks score ties deterministically
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2));

    let mut grid = SpatialGrid::new(w, h, min_dist.max(1.0));
    let mut out = Vec::new();
    for (x, y, score) in candidates {
        let (fx, fy) = (x as f64, y as f64);
        if grid.has_neighbor_within(fx, fy, min_dist) {
            continue;
        }
        grid.insert(fx, fy);
        out.push(Keypoint { x: fx, y: fy, score });
        if out.len() == params.max_points {
            break;
        }
    }
    out
}

struct SpatialGrid {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<(f64, f64)>>,
}

impl SpatialGrid {
    fn new(w: usize, h: usize, cell: f64) -> Self {
        let cols = (w as f64 / cell).ceil() as usize + 1;
        let rows = (h as f64 / cell).ceil() as usize + 1;
        Self {
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        }
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        (
            ((x / self.cell) as usize).min(self.cols - 1),
            ((y / self.cell) as usize).min(self.rows - 1),
        )
    }

    fn insert(&mut self, x: f64, y: f64) {
        let (cx, cy) = self.cell_of(x, y);
        self.buckets[cy * self.cols + cx].push((x, y));
    }

    fn has_neighbor_within(&self, x: f64, y: f64, dist: f64) -> bool {
        let (cx, cy) = self.cell_of(x, y);
        let reach = (dist / self.cell).ceil() as usize;
        for gy in cy.saturating_sub(reach)..=(cy + reach).min(self.rows - 1) {
            for gx in cx.saturating_sub(reach)..=(cx + reach).min(self.cols - 1) {
                for &(px, py) in &self.buckets[gy * self.cols + gx] {
                    let (dx, dy) = (px - x, py - y);
                    if dx * dx + dy * dy < dist * dist {
                        return true;
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(margin: usize, max_points: usize) -> HarrisParams {
        HarrisParams {
            border_margin: margin,
            max_points,
            ..HarrisParams::default()
        }
    }

    #[test]
    fn pure_edge_and_flat_have_zero_response() {
        let ramp = GrayImage::from_fn(20, 20, |x, _| x as f64 / 20.0);
        let cm = cornerness_map(&ramp, 1.5);
        for y in 0..20 {
            for x in 0..20 {
                assert!(cm.get(x, y).abs() < 1e-15);
            }
        }
        let flat = GrayImage::filled(20, 20, 0.3);
        assert!(cornerness_map(&flat, 1.5).as_slice().iter().all(|&v| v == 0.0));
        assert!(detect(&flat, &params(2, 100), 1.0).is_empty());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(lnms_ratio((1000, 1000), (500, 500)), 2.0);
        assert_eq!(lnms_ratio((100, 100), (100, 100)), 1.0);
        let r = lnms_ratio((3555, 4026), (1185, 1342));
        let expect = ((3555.0 * 4026.0) / (1185.0 * 1342.0) as f64).sqrt();
        assert!((r - expect).abs() < 1e-12);
        assert!((r - 3.0).abs() < 1e-3);
        assert_eq!(window_ratios((50, 50), (100, 100)), (1.0, 2.0));
        assert_eq!(window_ratios((100, 100), (50, 50)), (2.0, 1.0));
    }

    #[test]
    fn cross_junction_is_found() {
        let img = GrayImage::from_fn(41, 41, |x, y| if x == 20 || y == 23 { 1.0 } else { 0.0 });
        let kps = detect(&img, &params(3, 10), 1.0);
        assert!(!kps.is_empty());
        // exhaustive scan for the global maximum of the response
        let cm = cornerness_map(&img, 1.5);
        let mut best = (0, 0, f64::NEG_INFINITY);
        for y in 3..38 {
            for x in 3..38 {
                if cm.get(x, y) > best.2 {
                    best = (x, y, cm.get(x, y));
                }
            }
        }
        assert_eq!((best.0, best.1), (20, 23));
        assert_eq!((kps[0].x, kps[0].y), (20.0, 23.0));
    }

    #[test]
    fn respects_margin_cap_and_spacing() {
        let mut s = 17u64;
        let img = GrayImage::from_fn(80, 70, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 40) as f64 / (1u64 << 24) as f64
        });
        let p = HarrisParams { base_window: 3.0, ..params(10, 25) };
        let kps = detect(&img, &p, 1.4);
        assert_eq!(kps.len(), 25);
        let min_dist = p.base_window * 1.4 / 2.0;
        for (i, a) in kps.iter().enumerate() {
            assert!(a.x >= 10.0 && a.x < 70.0 && a.y >= 10.0 && a.y < 60.0);
            assert!(a.score > 0.0);
            for b in &kps[i + 1..] {
                assert!((a.x - b.x).hypot(a.y - b.y) >= min_dist);
            }
        }
        assert!(kps.windows(2).all(|p| p[0].score >= p[1].score));
        assert_eq!(kps, detect(&img, &p, 1.4));
        // the default 11 px window leaves fewer candidates than the cap
        let sparse = detect(&img, &params(10, 25), 1.4);
        assert!(sparse.len() < 25 && !sparse.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn remap_scales_cornerness_quadratically(
            v in proptest::collection::vec(0.0f64..1.0, 24 * 24),
            a in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0],
            b in -1.0f64..1.0,
        ) {
            let img = GrayImage::new(24, 24, v).unwrap();
            let remapped = img.map(|p| a * p + b);
            let c1 = cornerness_map(&img, 1.5);
            let c2 = cornerness_map(&remapped, 1.5);
            for (x, y) in c1.as_slice().iter().zip(c2.as_slice()) {
                prop_assert!((a * a * x - y).abs() <= 1e-6 * (a * a * x).abs().max(1e-12));
            }
            let k1 = detect(&img, &params(2, 30), 1.0);
            let k2 = detect(&remapped, &params(2, 30), 1.0);
            let pos = |k: &Vec<Keypoint>| k.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>();
            prop_assert_eq!(pos(&k1), pos(&k2));
        }

        #[test]
        fn structure_tensor_is_psd(v in proptest::collection::vec(0.0f64..1.0, 10 * 9)) {
            let img = GrayImage::new(10, 9, v).unwrap();
            let st = structure_tensor(&img, 1.5);
            for i in 0..img.len() {
                let (a, b, c) = (st.sxx.as_slice()[i], st.sxy.as_slice()[i], st.syy.as_slice()[i]);
                prop_assert!(a >= 0.0 && c >= 0.0);
                prop_assert!(b * b <= a * c + 1e-9);
            }
        }
    }
}
