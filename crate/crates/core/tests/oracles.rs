mod common;

use common::{cornerness_oracle, noise, pmom_oracle};
use msreg_core::harris::cornerness_map;
use msreg_core::pmom::{pmom, pmom_with_weights, ScaleBank};
use msreg_core::register::fit_affine_points;
use msreg_core::AffineModel;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pmom_matches_nested_loop_evaluation() {
    let bank = ScaleBank::evenly_spaced(2.0, 7.0, 4).unwrap();
    let radii: Vec<f64> = bank.scales().iter().map(|s| s.radius).collect();
    for seed in 0..6 {
        let img = noise(16, 16, seed);
        let fast = pmom(&img, &bank).unwrap();
        let slow = pmom_oracle(&img, &radii);
        let worst = fast
            .as_image()
            .as_slice()
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "seed {seed}: {worst}");
    }
}

#[test]
fn pmom_matches_oracle_with_default_bank_on_non_square_input() {
    let bank = ScaleBank::evenly_spaced(9.6, 48.0, 10).unwrap();
    let radii: Vec<f64> = bank.scales().iter().map(|s| s.radius).collect();
    let img = noise(19, 13, 42);
    let fast = pmom(&img, &bank).unwrap();
    let slow = pmom_oracle(&img, &radii);
    for (a, b) in fast.as_image().as_slice().iter().zip(&slow) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn single_scale_weighting_does_not_change_orientation() {
    let img = noise(24, 24, 3);
    let bank = ScaleBank::single(5.0).unwrap();
    let a = pmom_with_weights(&img, &bank, true).unwrap();
    let b = pmom_with_weights(&img, &bank, false).unwrap();
    assert!(a.as_image().max_abs_diff(b.as_image()) < 1e-12);
}

#[test]
fn cornerness_matches_per_pixel_evaluation() {
    for seed in 10..16 {
        let img = noise(16, 16, seed);
        let fast = cornerness_map(&img, 1.5);
        let slow = cornerness_oracle(&img, 1.5);
        for (a, b) in fast.as_slice().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
    let img = noise(21, 17, 99);
    let fast = cornerness_map(&img, 0.8);
    let slow = cornerness_oracle(&img, 0.8);
    for (a, b) in fast.as_slice().iter().zip(&slow) {
        assert!((a - b).abs() < 1e-9);
    }
}

/// Solve the two 3x3 normal-equation systems of the affine least-squares
/// problem directly.
fn normal_equations(src: &[(f64, f64)], dst: &[(f64, f64)]) -> AffineModel {
    let mut ata = Matrix3::zeros();
    let mut atx = Vector3::zeros();
    let mut aty = Vector3::zeros();
    for (&(x, y), &(u, v)) in src.iter().zip(dst) {
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose();
        atx += row * u;
        aty += row * v;
    }
    let inv = ata.try_inverse().expect("well-posed instance");
    let p = inv * atx;
    let q = inv * aty;
    AffineModel { a11: p[0], a12: p[1], tx: p[2], a21: q[0], a22: q[1], ty: q[2] }
}

#[test]
fn affine_fit_agrees_with_normal_equations_on_noisy_matches() {
    let truth = AffineModel { a11: 0.9, a12: -0.35, tx: 12.0, a21: 0.3, a22: 1.05, ty: -7.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let src: Vec<(f64, f64)> = (0..100)
        .map(|_| (rng.gen_range(0.0..600.0), rng.gen_range(0.0..400.0)))
        .collect();
    // Box-Muller for N(0, 0.5^2) noise
    let mut gauss = || {
        let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
        0.5 * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let dst: Vec<(f64, f64)> = src
        .iter()
        .map(|&(x, y)| {
            let (u, v) = truth.apply(x, y);
            (u + gauss(), v + gauss())
        })
        .collect();
    let fit = fit_affine_points(&src, &dst).unwrap();
    let oracle = normal_equations(&src, &dst);
    assert!(fit.max_param_diff(&oracle) < 1e-9, "{fit} vs {oracle}");
    // translations carry the lever-arm noise of far-from-origin points, so
    // only the linear part is held to 0.05 against the generator
    assert!((fit.a11 - truth.a11).abs() < 0.05 && (fit.a22 - truth.a22).abs() < 0.05);
    assert!((fit.a12 - truth.a12).abs() < 0.05 && (fit.a21 - truth.a21).abs() < 0.05);
}
