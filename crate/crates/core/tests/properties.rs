mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::noise;
use msreg_core::ggloh::{assign_region, GglohGeometry, PatchSampler};
use msreg_core::pmom::{pmom, wrap_half_turn, OrientationMap, ScaleBank};
use msreg_core::register::{fit_affine_points, warp};
use msreg_core::{AffineModel, GrayImage};
use proptest::prelude::*;

fn small_bank() -> ScaleBank {
    ScaleBank::evenly_spaced(2.0, 6.0, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pmom_ignores_linear_remaps(
        seed in 0u64..1000,
        a in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0],
        b in -1.0f64..1.0,
    ) {
        let img = noise(20, 18, seed);
        let bank = small_bank();
        let base = pmom(&img, &bank).unwrap();
        let remapped = pmom(&img.map(|v| a * v + b), &bank).unwrap();
        prop_assert!(base.as_image().max_abs_diff(remapped.as_image()) < 1e-9);
    }

    #[test]
    fn pmom_values_stay_in_half_open_range(seed in 0u64..1000) {
        let m = pmom(&noise(16, 16, seed), &small_bank()).unwrap();
        for &v in m.as_image().as_slice() {
            prop_assert!(v > -FRAC_PI_2 && v <= FRAC_PI_2);
        }
    }

    #[test]
    fn descriptors_are_unit_and_nonnegative(seed in 0u64..1000, theta0 in -PI..PI) {
        let geom = GglohGeometry::new(8, 8, 12.0).unwrap();
        let pm = OrientationMap::from_wrapped(noise(32, 32, seed).map(|v| (v - 0.5) * PI));
        let d = PatchSampler::new(geom.clone()).describe_with_reference(&pm, 16, 15, theta0).unwrap();
        prop_assert_eq!(d.values.len(), geom.descriptor_len());
        prop_assert!(d.values.iter().all(|&v| v >= 0.0));
        let norm = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn affine_fit_is_exact_without_noise(
        p in proptest::array::uniform6(-3.0f64..3.0),
        n in 3usize..40,
        seed in 0u64..1000,
    ) {
        let m = AffineModel { a11: p[0], a12: p[1], tx: 10.0 * p[2], a21: p[3], a22: p[4], ty: 10.0 * p[5] };
        let pts = noise(n, 2, seed);
        let src: Vec<(f64, f64)> = (0..n).map(|i| (500.0 * pts.get(i, 0), 500.0 * pts.get(i, 1))).collect();
        let dst: Vec<(f64, f64)> = src.iter().map(|&(x, y)| m.apply(x, y)).collect();
        // skip nearly collinear draws, where the fit is rightly refused
        let area = ((src[1].0 - src[0].0) * (src[2].1 - src[0].1)
            - (src[2].0 - src[0].0) * (src[1].1 - src[0].1)).abs();
        prop_assume!(area > 100.0);
        let fit = fit_affine_points(&src, &dst).unwrap();
        for (s, d) in src.iter().zip(&dst) {
            let (x, y) = fit.apply(s.0, s.1);
            prop_assert!((x - d.0).hypot(y - d.1) < 1e-9);
        }
    }

    #[test]
    fn warp_by_model_then_inverse_returns_smooth_image(
        angle in -0.6f64..0.6,
        scale in 0.85f64..1.2,
        tx in -5.0f64..5.0,
        seed in 0u64..100,
    ) {
        let img = msreg_core::filter::gaussian_blur(&noise(64, 64, seed), 3.0);
        let m = AffineModel::similarity(angle, scale, tx, -tx);
        let back = warp(&warp(&img, &m, (64, 64)).unwrap(), &m.inverse().unwrap(), (64, 64)).unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for y in 0..64 {
            for x in 0..64 {
                let (u, v) = m.apply(x as f64, y as f64);
                if (1.0..=62.0).contains(&u) && (1.0..=62.0).contains(&v) {
                    sum += (back.get(x, y) - img.get(x, y)).abs();
                    n += 1;
                }
            }
        }
        prop_assume!(n > 500);
        prop_assert!(sum / (n as f64) < 0.02);
    }
}

#[test]
fn partition_covers_disc_once_with_balanced_areas() {
    for n in [4, 8, 12, 16] {
        let g = GglohGeometry::new(n, 12, 48.0).unwrap();
        let mut counts = vec![0usize; g.n_regions()];
        for dy in -49i32..=49 {
            for dx in -49i32..=49 {
                let (fx, fy) = (dx as f64, dy as f64);
                let inside = fx * fx + fy * fy <= 48.0 * 48.0;
                match assign_region(fx, fy, 0.3, &g) {
                    Ok(r) => {
                        assert!(inside);
                        counts[r] += 1;
                    }
                    Err(_) => assert!(!inside),
                }
            }
        }
        let total: usize = counts.iter().sum();
        assert_eq!(total, PatchSampler::new(g.clone()).disc_pixels());
        let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        assert!(hi as f64 <= 1.15 * lo as f64, "N_A={n}: {counts:?}");
    }
}

#[test]
fn quarter_turn_of_field_and_reference_keeps_descriptor() {
    // rotating the orientation field by 90 degrees (positions and values)
    // and the reference by the same angle reproduces the descriptor
    let geom = GglohGeometry::new(12, 12, 10.0).unwrap();
    let sampler = PatchSampler::new(geom);
    let field = noise(25, 25, 5).map(|v| (v - 0.5) * PI);
    let pm = OrientationMap::from_wrapped(field.clone());
    let rotated = OrientationMap::from_wrapped(GrayImage::from_fn(25, 25, |x, y| {
        // (x, y) -> (h - 1 - y, x) maps source to destination
        wrap_half_turn(field.get(y, 24 - x) + FRAC_PI_2)
    }));
    for theta0 in [0.1, -1.2, 0.7] {
        let a = sampler.describe_with_reference(&pm, 12, 12, theta0).unwrap();
        let b = sampler.describe_with_reference(&rotated, 12, 12, theta0 + FRAC_PI_2).unwrap();
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }
}
