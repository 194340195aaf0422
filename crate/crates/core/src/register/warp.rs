use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::transform::AffineModel;

/// Resample `img` (sensed frame) into the reference frame described by
/// `model`. Each output pixel is pulled from the inverse-mapped position
/// with bilinear interpolation; positions outside the source are 0.
pub fn warp(img: &GrayImage, model: &AffineModel, out_size: (usize, usize)) -> Result<GrayImage> {
    let inv = model.inverse()?;
    let (w, h) = out_size;
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter("output size must be positive".into()));
    }
    Ok(GrayImage::from_fn(w, h, |x, y| {
        let (sx, sy) = inv.apply(x as f64, y as f64);
        img.sample_bilinear(sx, sy).unwrap_or(0.0)
    }))
}

/// Area-weighted resize: every output pixel averages the input footprint it
/// covers, with fractional coverage at the edges. Shrinking by exactly 2
/// reproduces 2x2 block means.
pub fn resize_area(img: &GrayImage, new_w: usize, new_h: usize) -> Result<GrayImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::InvalidParameter("output size must be positive".into()));
    }
    let (w, h) = img.dims();
    let xs = footprints(w, new_w);
    let ys = footprints(h, new_h);
    let mut rows = vec![0.0; new_w * h];
    for y in 0..h {
        let src = img.row(y);
        for (x, fp) in xs.iter().enumerate() {
            rows[y * new_w + x] = fp.iter().map(|&(i, wt)| wt * src[i]).sum();
        }
    }
    let mut out = vec![0.0; new_w * new_h];
    for (y, fp) in ys.iter().enumerate() {
        for &(i, wt) in fp {
            for x in 0..new_w {
                out[y * new_w + x] += wt * rows[i * new_w + x];
            }
        }
    }
    GrayImage::new(new_w, new_h, out)
}

/// Normalized overlap weights of each output cell with the input cells.
fn footprints(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let mut cells = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n_in {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    cells.push((i, overlap / (hi - lo)));
                }
                i += 1;
            }
            cells
        })
        .collect()
}
