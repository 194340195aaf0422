//! Test inputs and brute-force reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use msreg_core::ingest::load_gray;
use msreg_core::{BandPolicy, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bundled_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/astronaut.png")
}

pub fn bundled() -> GrayImage {
    load_gray(bundled_path(), BandPolicy::Sum, false).expect("bundled test image")
}

pub fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(w, h, |_, _| rng.gen::<f64>())
}

fn at(img: &GrayImage, x: isize, y: isize) -> f64 {
    let cx = x.clamp(0, img.width() as isize - 1) as usize;
    let cy = y.clamp(0, img.height() as isize - 1) as usize;
    img.get(cx, cy)
}

/// Central differences with replicated borders, one pixel at a time.
pub fn gradient_at(img: &GrayImage, x: isize, y: isize) -> (f64, f64) {
    (
        (at(img, x + 1, y) - at(img, x - 1, y)) / 2.0,
        (at(img, x, y + 1) - at(img, x, y - 1)) / 2.0,
    )
}

/// Square Gaussian window of half-width `hw`, normalized over the square.
fn window(sigma: f64, hw: isize) -> Vec<(isize, isize, f64)> {
    let mut w = Vec::new();
    for dy in -hw..=hw {
        for dx in -hw..=hw {
            w.push((dx, dy, (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()));
        }
    }
    let total: f64 = w.iter().map(|t| t.2).sum();
    w.into_iter().map(|(dx, dy, v)| (dx, dy, v / total)).collect()
}

/// Windowed sums of the gradient outer products at every pixel.
fn windowed<F: Fn(f64, f64) -> [f64; 3]>(img: &GrayImage, sigma: f64, hw: isize, f: F) -> Vec<[f64; 3]> {
    let (w, h) = img.dims();
    let win = window(sigma, hw);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = [0.0; 3];
            for &(dx, dy, wt) in &win {
                // the window slides over the replicated-border field
                let sx = (x + dx).clamp(0, w as isize - 1);
                let sy = (y + dy).clamp(0, h as isize - 1);
                let (gx, gy) = gradient_at(img, sx, sy);
                let v = f(gx, gy);
                for k in 0..3 {
                    acc[k] += wt * v[k];
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Harris response det(M)/tr(M) per pixel, 0 where tr(M) < 1e-12.
pub fn cornerness_oracle(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let hw = (3.0 * sigma).ceil() as isize;
    windowed(img, sigma, hw, |gx, gy| [gx * gx, gx * gy, gy * gy])
        .into_iter()
        .map(|[a, b, c]| {
            let tr = a + c;
            if tr < 1e-12 {
                0.0
            } else {
                (a * c - b * b) / tr
            }
        })
        .collect()
}

/// Orientation in (-pi/2, pi/2] from squared gradients summed over every
/// window radius (each window of unit mass, sigma = radius / 3, half-width
/// floor(radius)).
pub fn pmom_oracle(img: &GrayImage, radii: &[f64]) -> Vec<f64> {
    let n = img.len();
    let mut sx = vec![0.0; n];
    let mut sy = vec![0.0; n];
    for &r in radii {
        let sums = windowed(img, r / 3.0, r.floor() as isize, |gx, gy| [gx * gx - gy * gy, 2.0 * gx * gy, 0.0]);
        for (i, s) in sums.iter().enumerate() {
            sx[i] += s[0];
            sy[i] += s[1];
        }
    }
    sx.iter()
        .zip(&sy)
        .map(|(&x, &y)| {
            let phi = if x == 0.0 && y == 0.0 { 0.0 } else { y.atan2(x) };
            let t = phi / 2.0;
            if t <= -FRAC_PI_2 {
                FRAC_PI_2
            } else {
                t
            }
        })
        .collect()
}
