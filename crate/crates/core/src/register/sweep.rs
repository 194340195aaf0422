use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::transform::AffineModel;

use super::pipeline::Pipeline;
use super::warp::resize_area;

/// One synthetic pair of a sweep.
#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub param: String,
    pub sensed: GrayImage,
    /// Maps sensed pixels into the reference (original) image.
    pub truth: AffineModel,
}

/// Outcome of one sweep case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub ncm: usize,
    pub success: bool,
    pub runtime_s: f64,
    pub inliers: usize,
    pub model: Option<AffineModel>,
    pub truth: AffineModel,
    /// Recovered minus true rotation, degrees.
    pub angle_error_deg: Option<f64>,
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let q = deg / 90.0;
    if q == q.round() {
        match (q as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Rotate `img` about its center by `deg` degrees and crop the largest
/// axis-aligned square that stays inside the rotated frame.
pub fn rotate_and_crop(img: &GrayImage, deg: f64) -> Result<SyntheticPair> {
    let (w, h) = img.dims();
    let (s, c) = sin_cos_deg(deg);
    let side = (w.min(h) as f64 / (c.abs() + s.abs()) + 1e-9).floor() as usize;
    if side == 0 {
        return Err(Error::ImageTooSmall { width: w, height: h, min: 1 });
    }
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let cs = (side as f64 - 1.0) / 2.0;
    let truth = AffineModel {
        a11: c,
        a12: -s,
        a21: s,
        a22: c,
        tx: cx - c * cs + s * cs,
        ty: cy - s * cs - c * cs,
    };
    let sensed = GrayImage::from_fn(side, side, |x, y| {
        let (u, v) = (x as f64 - cs, y as f64 - cs);
        img.sample_bilinear(cx + c * u - s * v, cy + s * u + c * v)
            .unwrap_or(0.0)
    });
    Ok(SyntheticPair { param: format_param(deg), sensed, truth })
}

/// Shrink `img` by `ratio` with area averaging.
pub fn downscale(img: &GrayImage, ratio: f64) -> Result<SyntheticPair> {
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale ratio must be >= 1, got {ratio}")));
    }
    let (w, h) = img.dims();
    let nw = ((w as f64 / ratio).round() as usize).max(1);
    let nh = ((h as f64 / ratio).round() as usize).max(1);
    let sensed = resize_area(img, nw, nh)?;
    let (sx, sy) = (w as f64 / nw as f64, h as f64 / nh as f64);
    let truth = AffineModel {
        a11: sx,
        a12: 0.0,
        a21: 0.0,
        a22: sy,
        tx: 0.5 * sx - 0.5,
        ty: 0.5 * sy - 0.5,
    };
    Ok(SyntheticPair { param: format_param(ratio), sensed, truth })
}

/// Intensity remaps of the intensity sweep: inversion, a linear remap and
/// a gamma curve.
pub fn intensity_remaps(img: &GrayImage) -> Vec<SyntheticPair> {
    let remaps: [(&str, fn(f64) -> f64); 3] = [
        ("invert", |v| 1.0 - v),
        ("linear", |v| 0.5 * v + 0.2),
        ("gamma2.2", |v| v.max(0.0).powf(2.2)),
    ];
    remaps
        .iter()
        .map(|(name, f)| SyntheticPair {
            param: name.to_string(),
            sensed: img.map(*f),
            truth: AffineModel::identity(),
        })
        .collect()
}

fn format_param(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).to_degrees();
    (d + 180.0).rem_euclid(360.0) - 180.0
}

/// Register every synthetic pair against `reference`, in parallel, keeping
/// the input order. Registration failures become unsuccessful rows.
pub fn run_pairs(pipeline: &Pipeline, reference: &GrayImage, pairs: &[SyntheticPair]) -> Result<Vec<SweepRow>> {
    let ref_orient = pipeline.orientation_pyramid(reference)?;
    let tol = pipeline.config().ncm_tolerance;
    pairs
        .par_iter()
        .map(|pair| {
            let start = Instant::now();
            let row = match pipeline.register_cached(reference, Some(&ref_orient), &pair.sensed) {
                Ok(mut reg) => {
                    let n = reg.evaluate(&pair.truth, tol);
                    SweepRow {
                        param: pair.param.clone(),
                        ncm: n,
                        success: n >= 3,
                        runtime_s: 0.0,
                        inliers: reg.matches.len(),
                        model: Some(reg.model),
                        truth: pair.truth,
                        angle_error_deg: Some(angle_diff_deg(
                            reg.model.rotation_angle(),
                            pair.truth.rotation_angle(),
                        )),
                    }
                }
                Err(e) if e.is_registration_failure() => SweepRow {
                    param: pair.param.clone(),
                    ncm: 0,
                    success: false,
                    runtime_s: 0.0,
                    inliers: 0,
                    model: None,
                    truth: pair.truth,
                    angle_error_deg: None,
                },
                Err(e) => return Err(e),
            };
            log::info!("{}: ncm {} success {}", row.param, row.ncm, row.success);
            Ok(SweepRow { runtime_s: start.elapsed().as_secs_f64(), ..row })
        })
        .collect()
}

pub fn sweep_rotation(pipeline: &Pipeline, img: &GrayImage, angles: &[f64]) -> Result<Vec<SweepRow>> {
    let pairs = angles
        .iter()
        .map(|&a| rotate_and_crop(img, a))
        .collect::<Result<Vec<_>>>()?;
    run_pairs(pipeline, img, &pairs)
}

pub fn sweep_scale(pipeline: &Pipeline, img: &GrayImage, ratios: &[f64]) -> Result<Vec<SweepRow>> {
    let pairs = ratios
        .iter()
        .map(|&r| downscale(img, r))
        .collect::<Result<Vec<_>>>()?;
    run_pairs(pipeline, img, &pairs)
}

pub fn sweep_intensity(pipeline: &Pipeline, img: &GrayImage) -> Result<Vec<SweepRow>> {
    run_pairs(pipeline, img, &intensity_remaps(img))
}

/// `start, start+step, ...` up to and including `end` (within rounding).
pub fn param_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(Error::InvalidParameter(format!("bad range {start}..{end} step {step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,ncm,success,runtime_s\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.3}", r.param, r.ncm, r.success, r.runtime_s);
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(rows_to_csv(rows).as_bytes())?;
    Ok(())
}
