//! GLOH-like descriptor over an orientation map.
//!
//! The support disc of radius `r2` is split into a central disc and two
//! rings of `n_sectors` sectors each, with radii chosen so that all
//! `2 n_sectors + 1` regions have the same area. Every region holds a hard
//! histogram of orientations (re-referenced to the keypoint's main
//! orientation) with `n_bins` bins. The sector histograms are folded into
//! sum and absolute-difference halves so that a half-turn jump of the main
//! orientation leaves the descriptor unchanged.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmom::{wrap_half_turn, OrientationMap};

/// Ring and sector layout of the descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GglohGeometry {
    pub n_sectors: usize,
    pub n_bins: usize,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// Weight of the absolute-difference half.
    pub flip_weight: f64,
}

impl GglohGeometry {
    /// Solve the equal-area radii for the given outer radius:
    /// `r0 = r2 / sqrt(2 n + 1)`, `r1 = r0 sqrt(n + 1)`.
    pub fn new(n_sectors: usize, n_bins: usize, r2: f64) -> Result<Self> {
        if n_sectors < 2 || n_sectors % 2 != 0 {
            return Err(Error::OddSectorCount(n_sectors));
        }
        if n_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 orientation bins, got {n_bins}"
            )));
        }
        if !(r2 > 0.0) || !r2.is_finite() {
            return Err(Error::InvalidParameter(format!("outer radius must be positive, got {r2}")));
        }
        let r0 = r2 / ((2 * n_sectors + 1) as f64).sqrt();
        let r1 = r0 * ((n_sectors + 1) as f64).sqrt();
        Ok(Self {
            n_sectors,
            n_bins,
            r0,
            r1,
            r2,
            flip_weight: 1.0,
        })
    }

    pub fn with_flip_weight(mut self, c: f64) -> Self {
        self.flip_weight = c;
        self
    }

    pub fn n_regions(&self) -> usize {
        2 * self.n_sectors + 1
    }

    /// `(2 n_sectors + 1) * n_bins`.
    pub fn descriptor_len(&self) -> usize {
        self.n_regions() * self.n_bins
    }

    /// Diameter of the support patch.
    pub fn patch_size(&self) -> f64 {
        2.0 * self.r2
    }

    /// Integer distance a keypoint must keep from every image border.
    pub fn margin(&self) -> usize {
        self.r2.ceil() as usize
    }

    fn sector_width(&self) -> f64 {
        TAU / self.n_sectors as f64
    }

    fn bin_width(&self) -> f64 {
        PI / self.n_bins as f64
    }

    /// Orientation bin of a re-referenced angle in `(-pi/2, pi/2]`. Bin
    /// centers sit at `-pi/2 + (k + 1) pi / n_bins`; the bin around `pi/2`
    /// also takes values just above `-pi/2`.
    #[inline]
    pub fn bin_of(&self, v: f64) -> usize {
        let t = (v + FRAC_PI_2) / self.bin_width() - 1.0;
        (t.round() as i64).rem_euclid(self.n_bins as i64) as usize
    }

    #[inline]
    fn sector_of(&self, abs_angle: f64, theta0: f64) -> usize {
        let rel = (abs_angle - theta0).rem_euclid(TAU);
        ((rel / self.sector_width()) as usize).min(self.n_sectors - 1)
    }
}

/// Region of an offset from the keypoint: 0 is the central disc, `1..=n`
/// the sectors of the inner ring and `n+1..=2n` those of the outer ring.
/// Sectors are counted counterclockwise (in image axes) starting at
/// `theta0`.
pub fn assign_region(dx: f64, dy: f64, theta0: f64, geom: &GglohGeometry) -> Result<usize> {
    let rho2 = dx * dx + dy * dy;
    if rho2 > geom.r2 * geom.r2 {
        return Err(Error::OutsideDisc { dx, dy });
    }
    if rho2 <= geom.r0 * geom.r0 {
        return Ok(0);
    }
    let ring = if rho2 <= geom.r1 * geom.r1 { 0 } else { 1 };
    Ok(1 + ring * geom.n_sectors + geom.sector_of(dy.atan2(dx), theta0))
}

/// Unit-length descriptor of one keypoint at one pyramid layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub octave: usize,
    pub layer: usize,
    pub keypoint_id: usize,
    /// Set when the support held no samples; such descriptors are all zero
    /// and never matched.
    pub empty: bool,
}

#[derive(Clone, Copy, Debug)]
struct Offset {
    dx: i32,
    dy: i32,
    ring: u8,
    angle: f64,
}

/// Precomputed integer offsets of the support disc.
#[derive(Clone, Debug)]
pub struct PatchSampler {
    geom: GglohGeometry,
    offsets: Vec<Offset>,
}

impl PatchSampler {
    pub fn new(geom: GglohGeometry) -> Self {
        let reach = geom.r2.floor() as i32;
        let (r0s, r1s, r2s) = (geom.r0 * geom.r0, geom.r1 * geom.r1, geom.r2 * geom.r2);
        let mut offsets = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let rho2 = (dx * dx + dy * dy) as f64;
                if rho2 > r2s {
                    continue;
                }
                let ring = if rho2 <= r0s {
                    0
                } else if rho2 <= r1s {
                    1
                } else {
                    2
                };
                offsets.push(Offset {
                    dx,
                    dy,
                    ring,
                    angle: (dy as f64).atan2(dx as f64),
                });
            }
        }
        Self { geom, offsets }
    }

    pub fn geometry(&self) -> &GglohGeometry {
        &self.geom
    }

    /// Number of pixels in the support disc.
    pub fn disc_pixels(&self) -> usize {
        self.offsets.len()
    }

    /// Check that the integer anchor `(x, y)` keeps the full disc in bounds.
    pub fn check_anchor(&self, x: i64, y: i64, width: usize, height: usize) -> Result<()> {
        let m = self.geom.margin() as i64;
        if x - m < 0 || y - m < 0 || x + m > width as i64 - 1 || y + m > height as i64 - 1 {
            return Err(Error::BorderViolation {
                x,
                y,
                margin: self.geom.margin(),
                width,
                height,
            });
        }
        Ok(())
    }

    /// Raw per-region orientation counts, laid out `[region][bin]`.
    pub fn region_histograms(
        &self,
        pm: &OrientationMap,
        x: i64,
        y: i64,
        theta0: f64,
    ) -> Result<Vec<f64>> {
        self.check_anchor(x, y, pm.width(), pm.height())?;
        let g = &self.geom;
        let nb = g.n_bins;
        let mut hist = vec![0.0; g.descriptor_len()];
        for o in &self.offsets {
            let px = (x + o.dx as i64) as usize;
            let py = (y + o.dy as i64) as usize;
            let bin = g.bin_of(wrap_half_turn(pm.get(px, py) - theta0));
            let region = match o.ring {
                0 => 0,
                r => 1 + (r as usize - 1) * g.n_sectors + g.sector_of(o.angle, theta0),
            };
            hist[region * nb + bin] += 1.0;
        }
        Ok(hist)
    }

    /// Descriptor with an explicit reference orientation.
    pub fn describe_with_reference(
        &self,
        pm: &OrientationMap,
        x: i64,
        y: i64,
        theta0: f64,
    ) -> Result<Descriptor> {
        let hist = self.region_histograms(pm, x, y, theta0)?;
        Ok(pack(&self.geom, &hist))
    }

    /// Descriptor at the rounded keypoint position. With rotation invariance
    /// the map value at the keypoint is the reference orientation, otherwise
    /// the reference is 0.
    pub fn describe(
        &self,
        pm: &OrientationMap,
        kp_x: f64,
        kp_y: f64,
        rotation_invariant: bool,
    ) -> Result<Descriptor> {
        let (x, y) = (kp_x.round() as i64, kp_y.round() as i64);
        self.check_anchor(x, y, pm.width(), pm.height())?;
        let theta0 = if rotation_invariant {
            pm.get(x as usize, y as usize)
        } else {
            0.0
        };
        self.describe_with_reference(pm, x, y, theta0)
    }
}

/// Fold region histograms into `[center ; D1 + D2 ; c |D1 - D2|]` and
/// L2-normalize. `D1` holds the first half of the sectors of both rings,
/// `D2` the second half.
fn pack(geom: &GglohGeometry, hist: &[f64]) -> Descriptor {
    let nb = geom.n_bins;
    let n = geom.n_sectors;
    let half = n / 2;
    let block = n * nb;
    let mut values = Vec::with_capacity(geom.descriptor_len());
    values.extend_from_slice(&hist[..nb]);
    let sector = |ring: usize, s: usize| {
        let start = (1 + ring * n + s) * nb;
        &hist[start..start + nb]
    };
    let mut d1 = Vec::with_capacity(block);
    let mut d2 = Vec::with_capacity(block);
    for ring in 0..2 {
        for s in 0..half {
            d1.extend_from_slice(sector(ring, s));
            d2.extend_from_slice(sector(ring, s + half));
        }
    }
    values.extend(d1.iter().zip(&d2).map(|(a, b)| a + b));
    values.extend(d1.iter().zip(&d2).map(|(a, b)| geom.flip_weight * (a - b).abs()));

    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let empty = !(norm > 0.0);
    if !empty {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Descriptor {
        values,
        octave: 0,
        layer: 0,
        keypoint_id: 0,
        empty,
    }
}

/// Convenience wrapper building a sampler for a single descriptor.
pub fn describe(
    pm: &OrientationMap,
    kp_x: f64,
    kp_y: f64,
    geom: &GglohGeometry,
    rotation_invariant: bool,
) -> Result<Descriptor> {
    PatchSampler::new(geom.clone()).describe(pm, kp_x, kp_y, rotation_invariant)
}
