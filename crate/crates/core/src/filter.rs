//! Dense filtering kernels: Gaussian windows, separable convolution with
//! replicate borders, 2x2 mean downsampling and a square max filter.

use rayon::prelude::*;

use crate::image::GrayImage;

/// Sampled 1-D Gaussian `exp(-i^2 / 2 sigma^2)` for `i` in `-radius..=radius`.
///
/// With `normalized` the taps sum to one, so the separable 2-D window
/// (outer product) also sums to one.
pub fn gaussian_kernel(sigma: f64, radius: usize, normalized: bool) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    if normalized {
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
    }
    k
}

/// Radius at which a Gaussian is truncated: `ceil(3 sigma)`.
pub fn truncation_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(1.0) as usize
}

/// Convolve with the same symmetric odd-length kernel along both axes,
/// replicating border pixels.
pub fn convolve_separable(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let tmp = convolve_rows(img, kernel);
    convolve_cols(&tmp, kernel)
}

fn convolve_rows(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    let (w, h) = img.dims();
    let r = kernel.len() / 2;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        let src = img.row(y);
        let mut padded = Vec::with_capacity(w + 2 * r);
        padded.extend(std::iter::repeat(src[0]).take(r));
        padded.extend_from_slice(src);
        padded.extend(std::iter::repeat(src[w - 1]).take(r));
        for (i, &k) in kernel.iter().enumerate() {
            let shifted = &padded[i..i + w];
            for (o, &s) in out_row.iter_mut().zip(shifted) {
                *o += k * s;
            }
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

fn convolve_cols(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    let (w, h) = img.dims();
    let r = kernel.len() / 2;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        for (i, &k) in kernel.iter().enumerate() {
            let sy = (y as isize + i as isize - r as isize).clamp(0, h as isize - 1) as usize;
            for (o, &s) in out_row.iter_mut().zip(img.row(sy)) {
                *o += k * s;
            }
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

/// Gaussian blur truncated at `ceil(3 sigma)`, normalized, replicate borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let k = gaussian_kernel(sigma, truncation_radius(sigma), true);
    convolve_separable(img, &k)
}

/// Halve the resolution by averaging 2x2 blocks. Odd trailing rows or
/// columns average only the pixels that exist, so the output is
/// `ceil(w/2) x ceil(h/2)`.
pub fn downsample_mean(img: &GrayImage) -> GrayImage {
    let (w, h) = img.dims();
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    GrayImage::from_fn(ow, oh, |x, y| {
        let xs = 2 * x..(2 * x + 2).min(w);
        let ys = 2 * y..(2 * y + 2).min(h);
        let mut sum = 0.0;
        let mut n = 0usize;
        for yy in ys {
            for xx in xs.clone() {
                sum += img.get(xx, yy);
                n += 1;
            }
        }
        sum / n as f64
    })
}

/// Maximum over the `(2 radius + 1)^2` square around every pixel, clipped at
/// the borders.
pub fn max_filter(img: &GrayImage, radius: usize) -> GrayImage {
    let (w, h) = img.dims();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let src = img.row(y);
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows[y * w + x] = src[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let mut out = vec![f64::NEG_INFINITY; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for yy in lo..=hi {
            let src = &rows[yy * w..(yy + 1) * w];
            for (o, &s) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                *o = o.max(s);
            }
        }
    }
    GrayImage::new(w, h, out).expect("dimensions preserved")
}
