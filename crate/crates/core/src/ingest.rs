//! Image loading, band collapse and normalization.
//!
//! Supported inputs are PNG (8/16-bit, 1-4 channels), binary PGM/PPM and a
//! raw float container for data that does not fit an integer format:
//!
//! ```text
//! RAWF <width> <height> <bands>\n
//! <width*height*bands little-endian f32, band planes in order, each row-major>
//! ```

use std::fmt;
use std::io::Cursor;
use std::path::Path;
use std::str::FromStr;

use image::{DynamicImage, ImageError, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, gaussian_kernel};
use crate::image::{GrayImage, MultiBandImage};

const RAWF_MAGIC: &[u8] = b"RAWF";

/// How a multi-band image is reduced to one band.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BandPolicy {
    /// Pointwise sum of all bands.
    #[default]
    Sum,
    /// A single band by zero-based index.
    Band(usize),
}

impl FromStr for BandPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("sum") {
            return Ok(BandPolicy::Sum);
        }
        let inner = s
            .strip_prefix("band(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("band:"))
            .unwrap_or(s);
        inner
            .trim()
            .parse()
            .map(BandPolicy::Band)
            .map_err(|_| Error::InvalidParameter(format!("unknown band policy `{s}`")))
    }
}

impl fmt::Display for BandPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandPolicy::Sum => f.write_str("sum"),
            BandPolicy::Band(k) => write!(f, "band({k})"),
        }
    }
}

impl TryFrom<String> for BandPolicy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BandPolicy> for String {
    fn from(p: BandPolicy) -> String {
        p.to_string()
    }
}

/// Read and decode an image file, preserving its band count.
pub fn load(path: impl AsRef<Path>) -> Result<MultiBandImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

/// Decode an in-memory image in any supported format.
pub fn decode(bytes: &[u8]) -> Result<MultiBandImage> {
    if bytes.starts_with(RAWF_MAGIC) {
        return decode_rawf(bytes);
    }
    let format = image::guess_format(bytes)
        .map_err(|_| Error::UnsupportedFormat("unrecognized file signature".into()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(Error::UnsupportedFormat(format!("{format:?}")));
    }
    let reader = ImageReader::with_format(Cursor::new(bytes), format);
    let img = reader.decode().map_err(map_image_error)?;
    from_dynamic(&img)
}

fn map_image_error(e: ImageError) -> Error {
    match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => Error::CorruptStream(other.to_string()),
    }
}

fn from_dynamic(img: &DynamicImage) -> Result<MultiBandImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (interleaved, bands): (Vec<f64>, usize) = match img {
        DynamicImage::ImageLuma8(b) => (widen(b.as_raw()), 1),
        DynamicImage::ImageLumaA8(b) => (widen(b.as_raw()), 2),
        DynamicImage::ImageRgb8(b) => (widen(b.as_raw()), 3),
        DynamicImage::ImageRgba8(b) => (widen(b.as_raw()), 4),
        DynamicImage::ImageLuma16(b) => (widen(b.as_raw()), 1),
        DynamicImage::ImageLumaA16(b) => (widen(b.as_raw()), 2),
        DynamicImage::ImageRgb16(b) => (widen(b.as_raw()), 3),
        DynamicImage::ImageRgba16(b) => (widen(b.as_raw()), 4),
        DynamicImage::ImageRgb32F(b) => (widen(b.as_raw()), 3),
        DynamicImage::ImageRgba32F(b) => (widen(b.as_raw()), 4),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "pixel layout {:?}",
                other.color()
            )))
        }
    };
    let plane = w * h;
    let mut samples = vec![0.0; plane * bands];
    for (i, px) in interleaved.chunks_exact(bands).enumerate() {
        for (b, &v) in px.iter().enumerate() {
            samples[b * plane + i] = v;
        }
    }
    MultiBandImage::new(w, h, bands, samples)
}

fn widen<T: Copy + Into<f64>>(raw: &[T]) -> Vec<f64> {
    raw.iter().map(|&v| v.into()).collect()
}

fn decode_rawf(bytes: &[u8]) -> Result<MultiBandImage> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptStream("RAWF header not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::CorruptStream("RAWF header is not text".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dims: Vec<usize> = fields
        .get(1..4)
        .filter(|_| fields.len() == 4)
        .ok_or_else(|| Error::CorruptStream(format!("bad RAWF header `{header}`")))?
        .iter()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::CorruptStream(format!("bad RAWF header `{header}`")))?;
    let (w, h, bands) = (dims[0], dims[1], dims[2]);
    let body = &bytes[nl + 1..];
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(bands))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::CorruptStream("RAWF dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::CorruptStream(format!(
            "RAWF body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let samples = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    MultiBandImage::new(w, h, bands, samples)
        .map_err(|e| Error::CorruptStream(e.to_string()))
}

/// Encode samples in the RAWF container.
pub fn encode_rawf(width: usize, height: usize, bands: usize, samples: &[f64]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height * bands);
    let mut out = format!("RAWF {width} {height} {bands}\n").into_bytes();
    out.reserve(samples.len() * 4);
    for &v in samples {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Write a single-band field as a RAWF file.
pub fn save_rawf(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_rawf(img.width(), img.height(), 1, img.as_slice()))?;
    Ok(())
}

/// Reduce a multi-band image to a single band. No rescaling happens here.
pub fn collapse_bands(img: &MultiBandImage, policy: BandPolicy) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    match policy {
        BandPolicy::Sum => {
            let mut acc = vec![0.0; w * h];
            for b in 0..img.bands() {
                for (a, &v) in acc.iter_mut().zip(img.band(b).expect("band in range")) {
                    *a += v;
                }
            }
            GrayImage::new(w, h, acc)
        }
        BandPolicy::Band(k) => {
            let band = img.band(k).ok_or(Error::BandOutOfRange {
                index: k,
                bands: img.bands(),
            })?;
            GrayImage::new(w, h, band.to_vec())
        }
    }
}

/// Optionally denoise with a 3x3 Gaussian (sigma 0.5), then rescale so the
/// minimum maps to 0 and the maximum to 1. A constant image becomes all zeros.
pub fn normalize_denoise(img: &GrayImage, denoise: bool) -> GrayImage {
    let smoothed;
    let src = if denoise {
        smoothed = convolve_separable(img, &gaussian_kernel(0.5, 1, true));
        &smoothed
    } else {
        img
    };
    let (lo, hi) = src.min_max();
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return GrayImage::filled(src.width(), src.height(), 0.0);
    }
    src.map(|v| (v - lo) / span)
}

/// Load, collapse and normalize in one step.
pub fn load_gray(path: impl AsRef<Path>, policy: BandPolicy, denoise: bool) -> Result<GrayImage> {
    let raw = load(path)?;
    Ok(normalize_denoise(&collapse_bands(&raw, policy)?, denoise))
}

/// Save a field as an 8-bit grayscale PNG, clamping to [0, 1].
pub fn save_png(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer size matches");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Encode(e.to_string()))
}
