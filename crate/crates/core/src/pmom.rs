//! Partial main orientation map.
//!
//! Elementary gradients are combined into locally weighted squared-gradient
//! responses `(sum w (gx^2 - gy^2), sum w 2 gx gy)`. The angle of that pair is
//! twice the dominant local orientation, so halving it yields an orientation
//! in `(-pi/2, pi/2]` that does not change when the intensity contrast is
//! reversed. Responses from several window scales are summed before the
//! single angle evaluation.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, gaussian_kernel};
use crate::image::GrayImage;

/// Per-pixel image derivatives (central differences, replicate borders).
#[derive(Clone, Debug)]
pub struct GradientField {
    pub gx: GrayImage,
    pub gy: GrayImage,
    pub magnitude: GrayImage,
    pub orientation: GrayImage,
}

/// Central-difference gradients. The image must be at least 3x3.
pub fn gradients(img: &GrayImage) -> Result<GradientField> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let (gx, gy) = central_differences(img);
    let magnitude = GrayImage::from_fn(w, h, |x, y| gx.get(x, y).hypot(gy.get(x, y)));
    let orientation = GrayImage::from_fn(w, h, |x, y| gy.get(x, y).atan2(gx.get(x, y)));
    Ok(GradientField {
        gx,
        gy,
        magnitude,
        orientation,
    })
}

/// `(I(x+1) - I(x-1)) / 2` along each axis with clamped indices.
pub(crate) fn central_differences(img: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = img.dims();
    let gx = GrayImage::from_fn(w, h, |x, y| {
        let xi = x as isize;
        0.5 * (img.get_clamped(xi + 1, y as isize) - img.get_clamped(xi - 1, y as isize))
    });
    let gy = GrayImage::from_fn(w, h, |x, y| {
        let yi = y as isize;
        0.5 * (img.get_clamped(x as isize, yi + 1) - img.get_clamped(x as isize, yi - 1))
    });
    (gx, gy)
}

/// Quadrant-aware angle of `(x, y)` in `(-pi, pi]`; `(0, 0)` maps to 0.
pub fn angle2(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        // covers -0.0 as well, whose quotient would flip the sign of atan
        return if y > 0.0 {
            FRAC_PI_2
        } else if y < 0.0 {
            -FRAC_PI_2
        } else {
            0.0
        };
    }
    let base = (y / x).atan();
    if x > 0.0 {
        base
    } else if y >= 0.0 {
        base + PI
    } else {
        base - PI
    }
}

/// One Gaussian window: weights `exp(-(i^2+j^2) / 2 sigma^2)` over the
/// square of half-width `floor(radius)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowScale {
    pub radius: f64,
    pub sigma: f64,
}

impl WindowScale {
    /// Window with `sigma = radius / 3`.
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window radius must be >= 1, got {radius}"
            )));
        }
        Ok(Self {
            radius,
            sigma: radius / 3.0,
        })
    }

    pub fn half_width(&self) -> usize {
        self.radius.floor() as usize
    }

    fn kernel(&self, normalized: bool) -> Vec<f64> {
        gaussian_kernel(self.sigma, self.half_width(), normalized)
    }
}

/// Set of window scales fused into one orientation map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleBank {
    scales: Vec<WindowScale>,
}

impl ScaleBank {
    /// Bank from explicit radii; they must be strictly increasing.
    pub fn from_radii(radii: &[f64]) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidParameter("scale bank must not be empty".into()));
        }
        if radii.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidParameter(
                "scale bank radii must be strictly increasing".into(),
            ));
        }
        let scales = radii
            .iter()
            .map(|&r| WindowScale::new(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scales })
    }

    /// `count` radii evenly spaced over `[r_min, r_max]`.
    pub fn evenly_spaced(r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        match count {
            0 => Err(Error::InvalidParameter("scale bank must not be empty".into())),
            1 => Self::from_radii(&[r_max]),
            n => {
                let step = (r_max - r_min) / (n - 1) as f64;
                let radii: Vec<f64> = (0..n).map(|i| r_min + step * i as f64).collect();
                Self::from_radii(&radii)
            }
        }
    }

    pub fn single(radius: f64) -> Result<Self> {
        Self::from_radii(&[radius])
    }

    pub fn scales(&self) -> &[WindowScale] {
        &self.scales
    }

    pub fn max_half_width(&self) -> usize {
        self.scales.iter().map(WindowScale::half_width).max().unwrap_or(0)
    }
}

/// Dominant local orientation per pixel, every value in `(-pi/2, pi/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationMap {
    theta: GrayImage,
}

impl OrientationMap {
    /// Wrap a field of angles, rejecting values outside `(-pi/2, pi/2]`.
    pub fn new(theta: GrayImage) -> Result<Self> {
        if let Some(bad) = theta
            .as_slice()
            .iter()
            .find(|v| !(v.is_finite() && **v > -FRAC_PI_2 && **v <= FRAC_PI_2))
        {
            return Err(Error::InvalidParameter(format!(
                "orientation {bad} outside (-pi/2, pi/2]"
            )));
        }
        Ok(Self { theta })
    }

    /// Build from arbitrary angles, folding each into `(-pi/2, pi/2]`.
    pub fn from_wrapped(theta: GrayImage) -> Self {
        Self {
            theta: theta.map(wrap_half_turn),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.theta.get(x, y)
    }

    pub fn width(&self) -> usize {
        self.theta.width()
    }

    pub fn height(&self) -> usize {
        self.theta.height()
    }

    pub fn as_image(&self) -> &GrayImage {
        &self.theta
    }
}

/// Fold an angle into `(-pi/2, pi/2]` by whole half turns.
#[inline]
pub fn wrap_half_turn(a: f64) -> f64 {
    let mut v = a - PI * (a / PI).round();
    if v <= -FRAC_PI_2 {
        v += PI;
    } else if v > FRAC_PI_2 {
        v -= PI;
    }
    v
}

/// Locally weighted squared-gradient responses for one window.
///
/// Returns the `(sum w (gx^2 - gy^2), sum w 2 gx gy)` fields.
pub fn asg_responses(
    grad: &GradientField,
    scale: WindowScale,
    normalized: bool,
) -> (GrayImage, GrayImage) {
    let (dxx, dxy) = doubled_angle_terms(&grad.gx, &grad.gy);
    let k = scale.kernel(normalized);
    (convolve_separable(&dxx, &k), convolve_separable(&dxy, &k))
}

fn doubled_angle_terms(gx: &GrayImage, gy: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = gx.dims();
    let mut a = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for (&x, &y) in gx.as_slice().iter().zip(gy.as_slice()) {
        a.push(x * x - y * y);
        b.push(2.0 * x * y);
    }
    (
        GrayImage::new(w, h, a).expect("same dims"),
        GrayImage::new(w, h, b).expect("same dims"),
    )
}

/// Half angle of the response pair, canonicalized so `-pi/2` becomes `pi/2`.
pub fn orientation_from_responses(sx: &GrayImage, sy: &GrayImage) -> OrientationMap {
    let (w, h) = sx.dims();
    let theta: Vec<f64> = sx
        .as_slice()
        .iter()
        .zip(sy.as_slice())
        .map(|(&x, &y)| half_angle(x, y))
        .collect();
    OrientationMap {
        theta: GrayImage::new(w, h, theta).expect("same dims"),
    }
}

#[inline]
pub(crate) fn half_angle(x: f64, y: f64) -> f64 {
    let t = 0.5 * angle2(x, y);
    if t <= -FRAC_PI_2 {
        FRAC_PI_2
    } else {
        t
    }
}

/// Single-window orientation map.
pub fn asg_orientation(grad: &GradientField, scale: WindowScale) -> OrientationMap {
    let (sx, sy) = asg_responses(grad, scale, true);
    orientation_from_responses(&sx, &sy)
}

/// Multi-scale orientation map: the response pairs of every scale in the
/// bank are summed, then halved once.
///
/// Each scale's window is normalized to unit mass, so every scale carries
/// the same weight in the sum.
pub fn pmom(img: &GrayImage, bank: &ScaleBank) -> Result<OrientationMap> {
    pmom_with_weights(img, bank, true)
}

/// [`pmom`] with a choice between unit-mass and raw Gaussian windows.
pub fn pmom_with_weights(
    img: &GrayImage,
    bank: &ScaleBank,
    normalized: bool,
) -> Result<OrientationMap> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let (gx, gy) = central_differences(img);
    let (dxx, dxy) = doubled_angle_terms(&gx, &gy);
    let mut sum_x = vec![0.0; w * h];
    let mut sum_y = vec![0.0; w * h];
    for scale in bank.scales() {
        let k = scale.kernel(normalized);
        let rx = convolve_separable(&dxx, &k);
        let ry = convolve_separable(&dxy, &k);
        for (a, b) in sum_x.iter_mut().zip(rx.as_slice()) {
            *a += b;
        }
        for (a, b) in sum_y.iter_mut().zip(ry.as_slice()) {
            *a += b;
        }
    }
    let sx = GrayImage::new(w, h, sum_x)?;
    let sy = GrayImage::new(w, h, sum_y)?;
    Ok(orientation_from_responses(&sx, &sy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_x() -> GrayImage {
        GrayImage::from_fn(12, 10, |x, _| x as f64)
    }

    fn ramp_y() -> GrayImage {
        GrayImage::from_fn(12, 10, |_, y| y as f64)
    }

    #[test]
    fn angle2_cases() {
        assert_eq!(angle2(1.0, 0.0), 0.0);
        assert!((angle2(-1.0, 1.0) - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!((angle2(-1.0, -1.0) + 3.0 * PI / 4.0).abs() < 1e-15);
        assert_eq!(angle2(-1.0, 0.0), PI);
        assert_eq!(angle2(0.0, 0.0), 0.0);
        assert_eq!(angle2(-0.0, 2.0), FRAC_PI_2);
        assert_eq!(angle2(0.0, -2.0), -FRAC_PI_2);
    }

    #[test]
    fn angle2_agrees_with_atan2_off_axis() {
        for i in 0..64 {
            let a = -PI + (i as f64 + 0.37) * 2.0 * PI / 64.0;
            let (x, y) = (a.cos(), a.sin());
            assert!((angle2(x, y) - y.atan2(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_gradients() {
        let g = gradients(&ramp_x()).unwrap();
        assert_eq!(g.gx.get(5, 5), 1.0);
        assert_eq!(g.gy.get(5, 5), 0.0);
        assert_eq!(g.orientation.get(5, 5), 0.0);
        let g = gradients(&ramp_y()).unwrap();
        assert_eq!(g.gx.get(5, 5), 0.0);
        assert_eq!(g.gy.get(5, 5), 1.0);
        assert_eq!(g.orientation.get(5, 5), FRAC_PI_2);
        for (m, (x, y)) in g
            .magnitude
            .as_slice()
            .iter()
            .zip(g.gx.as_slice().iter().zip(g.gy.as_slice()))
        {
            assert!((m * m - (x * x + y * y)).abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_reject_tiny_images() {
        let img = GrayImage::filled(2, 5, 1.0);
        assert!(matches!(gradients(&img), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn ramps_give_axis_orientations() {
        let s = WindowScale::new(3.0).unwrap();
        let t = asg_orientation(&gradients(&ramp_x()).unwrap(), s);
        assert!(t.as_image().as_slice().iter().all(|&v| v == 0.0));
        let t = asg_orientation(&gradients(&ramp_y()).unwrap(), s);
        assert!(t.as_image().as_slice().iter().all(|&v| v == FRAC_PI_2));
        let neg = ramp_y().map(|v| -v);
        let t = asg_orientation(&gradients(&neg).unwrap(), s);
        assert!(t.as_image().as_slice().iter().all(|&v| v == FRAC_PI_2));
        let bank = ScaleBank::evenly_spaced(1.0, 4.0, 3).unwrap();
        let t = pmom(&ramp_x(), &bank).unwrap();
        assert!(t.as_image().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_scale_bank_equals_asg() {
        let img = GrayImage::from_fn(14, 11, |x, y| ((x * 7 + y * 13) % 11) as f64 / 11.0);
        let bank = ScaleBank::single(4.0).unwrap();
        let a = pmom(&img, &bank).unwrap();
        let b = asg_orientation(&gradients(&img).unwrap(), bank.scales()[0]);
        assert_eq!(a, b);
    }

    #[test]
    fn bank_validation() {
        assert!(ScaleBank::from_radii(&[]).is_err());
        assert!(ScaleBank::from_radii(&[3.0, 3.0]).is_err());
        assert!(ScaleBank::from_radii(&[0.5]).is_err());
        let bank = ScaleBank::evenly_spaced(9.6, 48.0, 10).unwrap();
        assert_eq!(bank.scales().len(), 10);
        assert!((bank.scales()[9].radius - 48.0).abs() < 1e-12);
        for s in bank.scales() {
            assert!((s.sigma - s.radius / 3.0).abs() < 1e-15);
        }
        assert_eq!(bank.max_half_width(), 48);
    }

    #[test]
    fn wrap_half_turn_range() {
        assert_eq!(wrap_half_turn(-FRAC_PI_2), FRAC_PI_2);
        assert!((wrap_half_turn(PI + 0.1) - 0.1).abs() < 1e-12);
        assert!((wrap_half_turn(-PI - 0.1) + 0.1).abs() < 1e-12);
        for i in -50..50 {
            let v = wrap_half_turn(i as f64 * 0.37);
            assert!(v > -FRAC_PI_2 && v <= FRAC_PI_2);
        }
    }

    #[test]
    fn orientation_map_validation() {
        let bad = GrayImage::filled(2, 2, -FRAC_PI_2);
        assert!(OrientationMap::new(bad.clone()).is_err());
        let ok = OrientationMap::from_wrapped(bad);
        assert_eq!(ok.get(0, 0), FRAC_PI_2);
    }
}
