use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest |det| accepted for a normalized homography.
pub const DEFAULT_DET_EPSILON: f64 = 1e-9;

/// Sub-pixel image point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned integer box. `x`, `y` is the top-left corner and the box
/// covers the half-open ranges `[x, x + w)` and `[y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    /// Panics if `w` or `h` is zero.
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        assert!(w >= 1 && h >= 1, "bounding box must have positive size");
        Self { x, y, w, h }
    }

    /// Box spanning the half-open ranges `[x0, x1)` and `[y0, y1)`, or `None`
    /// when empty.
    pub fn from_extents(x0: i64, y0: i64, x1: i64, y1: i64) -> Option<Self> {
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(Self {
            x: x0 as i32,
            y: y0 as i32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }

    #[inline]
    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    #[inline]
    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    #[inline]
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        Self::from_extents(
            (self.x as i64).max(other.x as i64),
            (self.y as i64).max(other.y as i64),
            self.right().min(other.right()),
            self.bottom().min(other.bottom()),
        )
    }

    pub fn intersection_area(&self, other: &Self) -> u64 {
        self.intersection(other).map_or(0, |b| b.area())
    }

    /// True when the boxes share a region of positive area. Boxes that only
    /// touch along an edge do not intersect.
    pub fn intersects(&self, other: &Self) -> bool {
        self.intersection(other).is_some()
    }

    /// Smallest box enclosing both.
    pub fn union(&self, other: &Self) -> Self {
        Self::from_extents(
            (self.x as i64).min(other.x as i64),
            (self.y as i64).min(other.y as i64),
            self.right().max(other.right()),
            self.bottom().max(other.bottom()),
        )
        .expect("union of non-empty boxes is non-empty")
    }

    /// Grows the box by `margin` on all four sides.
    pub fn inflate(&self, margin: u32) -> Self {
        let m = margin as i64;
        Self::from_extents(
            self.x as i64 - m,
            self.y as i64 - m,
            self.right() + m,
            self.bottom() + m,
        )
        .expect("inflated box is non-empty")
    }

    /// Restricts the box to the `width` x `height` frame.
    pub fn clip(&self, width: usize, height: usize) -> Option<Self> {
        Self::from_extents(
            (self.x as i64).max(0),
            (self.y as i64).max(0),
            self.right().min(width as i64),
            self.bottom().min(height as i64),
        )
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x as i64 && x < self.right() && y >= self.y as i64 && y < self.bottom()
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.w, self.h)
    }
}

/// Invertible 3x3 projective transform, normalized so `m[2][2] = 1` whenever
/// that entry is non-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        Self::with_epsilon(m, DEFAULT_DET_EPSILON)
    }

    pub fn with_epsilon(m: Matrix3<f64>, det_epsilon: f64) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularTransform { det: f64::NAN });
        }
        let s = m[(2, 2)];
        let m = if s != 0.0 { m / s } else { m };
        let det = m.determinant();
        if !(det.abs() > det_epsilon) {
            return Err(Error::SingularTransform { det });
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0),
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Result<Self> {
        Self::new(Matrix3::new(sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` radians and uniform `scale` about the pivot
    /// `(cx, cy)`, followed by a `(tx, ty)` translation.
    pub fn similarity(angle: f64, scale: f64, cx: f64, cy: f64, tx: f64, ty: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let a = scale * c;
        let b = scale * s;
        Self::new(Matrix3::new(
            a,
            -b,
            cx - a * cx + b * cy + tx,
            b,
            a,
            cy - b * cx - a * cy + ty,
            0.0,
            0.0,
            1.0,
        ))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .m
            .try_inverse()
            .ok_or(Error::SingularTransform { det: self.m.determinant() })?;
        Self::new(inv)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self> {
        Self::new(self.m * first.m)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = self.m * Vector3::new(x, y, 1.0);
        if p[2].abs() < 1e-15 {
            return None;
        }
        Some((p[0] / p[2], p[1] / p[2]))
    }

    /// Euclidean distance between `H * from` and `to`; infinite when the
    /// projection is undefined.
    pub fn reprojection_error(&self, from: Point, to: Point) -> f64 {
        match self.apply(from.x, from.y) {
            Some((u, v)) => ((u - to.x).powi(2) + (v - to.y).powi(2)).sqrt(),
            None => f64::INFINITY,
        }
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}
