//! Shared inputs for the benchmarks.

use msreg_core::GrayImage;

/// Deterministic textured test image: a few interfering sinusoids plus a
/// hashed speckle so the corner detector has something to find.
pub fn texture(w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let waves = (fx * 0.11).sin() * (fy * 0.07).cos() + (0.05 * (fx + 2.0 * fy)).sin();
        let hash = (x.wrapping_mul(73856093) ^ y.wrapping_mul(19349663)) % 1000;
        0.5 + 0.2 * waves + 0.1 * (hash as f64 / 1000.0)
    })
}

/// `texture` shifted by an integer offset, cropped to the same size.
pub fn shifted_texture(w: usize, h: usize, dx: usize, dy: usize) -> GrayImage {
    let big = texture(w + dx, h + dy);
    GrayImage::from_fn(w, h, |x, y| big.get(x + dx, y + dy))
}
