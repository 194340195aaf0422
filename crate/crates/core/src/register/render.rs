use std::fmt;
use std::str::FromStr;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Composite styles for inspecting an alignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    /// Reference in red, warped image in green, their mean in blue.
    Fusion,
    /// Square tiles alternating between the two images.
    Checkerboard,
    /// Vertical strips alternating between the two images.
    Alternation,
}

impl FromStr for RenderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fusion" => Ok(Self::Fusion),
            "checkerboard" => Ok(Self::Checkerboard),
            "alternation" => Ok(Self::Alternation),
            other => Err(Error::InvalidParameter(format!("unknown render mode `{other}`"))),
        }
    }
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fusion => "fusion",
            Self::Checkerboard => "checkerboard",
            Self::Alternation => "alternation",
        })
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Composite a reference image with a warped sensed image of the same size.
pub fn render(ref_img: &GrayImage, warped: &GrayImage, mode: RenderMode, block: usize) -> Result<RgbImage> {
    if ref_img.dims() != warped.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            ref_img.dims(),
            warped.dims()
        )));
    }
    if block == 0 {
        return Err(Error::InvalidParameter("block size must be positive".into()));
    }
    let (w, h) = ref_img.dims();
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let (a, b) = (ref_img.get(x, y), warped.get(x, y));
        match mode {
            RenderMode::Fusion => Rgb([to_u8(a), to_u8(b), to_u8(0.5 * (a + b))]),
            RenderMode::Checkerboard => {
                let v = if (x / block + y / block) % 2 == 0 { a } else { b };
                Rgb([to_u8(v); 3])
            }
            RenderMode::Alternation => {
                let v = if (x / block) % 2 == 0 { a } else { b };
                Rgb([to_u8(v); 3])
            }
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_of_identical_images_is_the_image() {
        let img = GrayImage::from_fn(10, 7, |x, y| (x * y) as f64 / 60.0);
        let out = render(&img, &img, RenderMode::Checkerboard, 3).unwrap();
        for y in 0..7 {
            for x in 0..10 {
                assert_eq!(out.get_pixel(x, y).0[0], to_u8(img.get(x as usize, y as usize)));
            }
        }
    }

    #[test]
    fn fusion_of_black_and_white_is_uniform() {
        let black = GrayImage::filled(8, 8, 0.0);
        let white = GrayImage::filled(8, 8, 1.0);
        let out = render(&black, &white, RenderMode::Fusion, 4).unwrap();
        let first = *out.get_pixel(0, 0);
        assert_eq!(first, Rgb([0, 255, 128]));
        assert!(out.pixels().all(|p| *p == first));
    }

    #[test]
    fn block_64_on_128_gives_four_tiles() {
        let black = GrayImage::filled(128, 128, 0.0);
        let white = GrayImage::filled(128, 128, 1.0);
        let out = render(&black, &white, RenderMode::Checkerboard, 64).unwrap();
        let mut tiles = std::collections::BTreeSet::new();
        let mut changes = 0;
        for y in 0..128u32 {
            for x in 0..128u32 {
                tiles.insert((x / 64, y / 64, out.get_pixel(x, y).0[0]));
                if x > 0 && out.get_pixel(x, y) != out.get_pixel(x - 1, y) {
                    changes += 1;
                }
            }
        }
        assert_eq!(tiles.len(), 4);
        assert_eq!(changes, 128);
        let alt = render(&black, &white, RenderMode::Alternation, 32).unwrap();
        assert_eq!(alt.get_pixel(40, 0).0[0], 255);
        assert_eq!(alt.get_pixel(70, 100).0[0], 0);
    }

    #[test]
    fn size_mismatch_and_modes() {
        let a = GrayImage::filled(4, 4, 0.0);
        let b = GrayImage::filled(5, 4, 0.0);
        assert!(matches!(render(&a, &b, RenderMode::Fusion, 2), Err(Error::DimensionMismatch(_))));
        assert_eq!("Checkerboard".parse::<RenderMode>().unwrap(), RenderMode::Checkerboard);
        assert!("mosaic".parse::<RenderMode>().is_err());
    }
}
