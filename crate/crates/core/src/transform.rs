//! Planar affine model and least-squares fitting.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `p_ref = A p_sen + t`, with `A = [[a11, a12], [a21, a22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for AffineModel {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineModel {
    pub const fn identity() -> Self {
        Self {
            a11: 1.0,
            a12: 0.0,
            a21: 0.0,
            a22: 1.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            tx,
            ty,
            ..Self::identity()
        }
    }

    /// Rotation by `angle` radians (counterclockwise in image axes, i.e.
    /// from +x towards +y) and isotropic `scale`, followed by `(tx, ty)`.
    pub fn similarity(angle: f64, scale: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            a11: scale * c,
            a12: -scale * s,
            a21: scale * s,
            a22: scale * c,
            tx,
            ty,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a11 * x + self.a12 * y + self.tx,
            self.a21 * x + self.a22 * y + self.ty,
        )
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs() > 1e-9
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if !(det.abs() > 1e-9) {
            return Err(Error::Singular);
        }
        let (b11, b12, b21, b22) = (self.a22 / det, -self.a12 / det, -self.a21 / det, self.a11 / det);
        Ok(Self {
            a11: b11,
            a12: b12,
            a21: b21,
            a22: b22,
            tx: -(b11 * self.tx + b12 * self.ty),
            ty: -(b21 * self.tx + b22 * self.ty),
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &AffineModel) -> Self {
        Self {
            a11: self.a11 * other.a11 + self.a12 * other.a21,
            a12: self.a11 * other.a12 + self.a12 * other.a22,
            a21: self.a21 * other.a11 + self.a22 * other.a21,
            a22: self.a21 * other.a12 + self.a22 * other.a22,
            tx: self.a11 * other.tx + self.a12 * other.ty + self.tx,
            ty: self.a21 * other.tx + self.a22 * other.ty + self.ty,
        }
    }

    /// Rotation angle of the linear part in radians.
    pub fn rotation_angle(&self) -> f64 {
        (self.a21 - self.a12).atan2(self.a11 + self.a22)
    }

    /// Geometric-mean scale `sqrt(|det A|)`.
    pub fn scale(&self) -> f64 {
        self.determinant().abs().sqrt()
    }

    pub fn params(&self) -> [f64; 6] {
        [self.a11, self.a12, self.tx, self.a21, self.a22, self.ty]
    }

    /// Largest absolute difference over the six parameters.
    pub fn max_param_diff(&self, other: &AffineModel) -> f64 {
        self.params()
            .iter()
            .zip(other.params())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One line, six decimals: `a11 a12 tx a21 a22 ty`.
impl fmt::Display for AffineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.params();
        write!(f, "{} {} {} {} {} {}", p[0], p[1], p[2], p[3], p[4], p[5])
    }
}

impl FromStr for AffineModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("model line: {e}")))?;
        if v.len() != 6 {
            return Err(Error::InvalidParameter(format!(
                "model line needs 6 numbers, got {}",
                v.len()
            )));
        }
        Ok(Self {
            a11: v[0],
            a12: v[1],
            tx: v[2],
            a21: v[3],
            a22: v[4],
            ty: v[5],
        })
    }
}

fn centroid(p: &[(f64, f64)]) -> (f64, f64) {
    let n = p.len() as f64;
    let (sx, sy) = p.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    (sx / n, sy / n)
}

/// Least-squares affine map taking `src` onto `dst`.
///
/// Points are centered before solving; the linear part comes from an SVD
/// solve, which also detects collinear configurations.
pub fn fit_affine_points(src: &[(f64, f64)], dst: &[(f64, f64)]) -> Result<AffineModel> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::Singular);
    }
    let n = src.len();
    let (sx, sy) = centroid(src);
    let (dx, dy) = centroid(dst);
    let p = DMatrix::from_fn(n, 2, |i, j| if j == 0 { src[i].0 - sx } else { src[i].1 - sy });
    let q = DMatrix::from_fn(n, 2, |i, j| if j == 0 { dst[i].0 - dx } else { dst[i].1 - dy });
    let svd = p.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin <= 1e-9 * smax {
        return Err(Error::Singular);
    }
    // columns of the solution are the rows of A
    let at = svd.solve(&q, 0.0).map_err(|_| Error::Singular)?;
    let a = Matrix2::new(at[(0, 0)], at[(1, 0)], at[(0, 1)], at[(1, 1)]);
    let t = Vector2::new(dx, dy) - a * Vector2::new(sx, sy);
    Ok(AffineModel {
        a11: a[(0, 0)],
        a12: a[(0, 1)],
        a21: a[(1, 0)],
        a22: a[(1, 1)],
        tx: t.x,
        ty: t.y,
    })
}

/// Exact affine map through three correspondences; `None` when the source
/// or target triangle is degenerate.
pub(crate) fn affine_from_three(src: [(f64, f64); 3], dst: [(f64, f64); 3]) -> Option<AffineModel> {
    let area = |p: &[(f64, f64); 3]| {
        ((p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1)).abs()
    };
    if area(&src) < 1e-6 || area(&dst) < 1e-6 {
        return None;
    }
    let (u1, v1) = (src[1].0 - src[0].0, src[1].1 - src[0].1);
    let (u2, v2) = (src[2].0 - src[0].0, src[2].1 - src[0].1);
    let det = u1 * v2 - u2 * v1;
    let (p1, q1) = (dst[1].0 - dst[0].0, dst[1].1 - dst[0].1);
    let (p2, q2) = (dst[2].0 - dst[0].0, dst[2].1 - dst[0].1);
    // A [u1 u2; v1 v2] = [p1 p2; q1 q2]
    let a11 = (p1 * v2 - p2 * v1) / det;
    let a12 = (p2 * u1 - p1 * u2) / det;
    let a21 = (q1 * v2 - q2 * v1) / det;
    let a22 = (q2 * u1 - q1 * u2) / det;
    Some(AffineModel {
        a11,
        a12,
        a21,
        a22,
        tx: dst[0].0 - a11 * src[0].0 - a12 * src[0].1,
        ty: dst[0].1 - a21 * src[0].0 - a22 * src[0].1,
    })
}
