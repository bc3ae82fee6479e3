//! Perspective warping by inverse mapping: every destination pixel samples
//! the source at `H⁻¹ · (x, y, 1)`.

use crate::error::Result;
use crate::geometry::Homography;
use crate::plane::{BinaryMask, Plane};

/// Tolerance for source coordinates that land a hair outside the frame.
const EDGE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// Four-tap bilinear footprint of one source location.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BilinearTap {
    pub i00: usize,
    pub i10: usize,
    pub i01: usize,
    pub i11: usize,
    pub fx: f32,
    pub fy: f32,
}

impl BilinearTap {
    #[inline]
    pub fn sample(&self, data: &[f32]) -> f32 {
        let top = (1.0 - self.fx) * data[self.i00] + self.fx * data[self.i10];
        let bottom = (1.0 - self.fx) * data[self.i01] + self.fx * data[self.i11];
        (1.0 - self.fy) * top + self.fy * bottom
    }

    /// Index of the tap closest to the sample location.
    #[inline]
    pub fn nearest(&self) -> usize {
        match (self.fx >= 0.5, self.fy >= 0.5) {
            (false, false) => self.i00,
            (true, false) => self.i10,
            (false, true) => self.i01,
            (true, true) => self.i11,
        }
    }
}

/// Splits a source coordinate into a left tap and a fraction such that both
/// taps with non-zero weight lie in `[0, len)`.
#[inline]
fn split_coord(s: f64, len: usize) -> Option<(usize, usize, f32)> {
    let max = (len - 1) as f64;
    if !(s >= -EDGE_EPS && s <= max + EDGE_EPS) {
        return None;
    }
    let s = s.clamp(0.0, max);
    if len == 1 {
        return Some((0, 0, 0.0));
    }
    let i0 = (s as usize).min(len - 2);
    Some((i0, i0 + 1, (s - i0 as f64) as f32))
}

/// Visits every destination pixel of a `width` x `height` frame in row-major
/// order with the bilinear footprint of its source location under
/// `inverse`, or `None` when the footprint leaves the source frame.
pub(crate) fn for_each_bilinear_source(
    width: usize,
    height: usize,
    inverse: &Homography,
    mut f: impl FnMut(usize, Option<BilinearTap>),
) {
    let m = inverse.matrix();
    for y in 0..height {
        let yf = y as f64;
        let (bx, by, bw) = (
            m[(0, 1)] * yf + m[(0, 2)],
            m[(1, 1)] * yf + m[(1, 2)],
            m[(2, 1)] * yf + m[(2, 2)],
        );
        for x in 0..width {
            let xf = x as f64;
            let wq = m[(2, 0)] * xf + bw;
            let tap = if wq.abs() < 1e-15 {
                None
            } else {
                let sx = (m[(0, 0)] * xf + bx) / wq;
                let sy = (m[(1, 0)] * xf + by) / wq;
                split_coord(sx, width).and_then(|(x0, x1, fx)| {
                    split_coord(sy, height).map(|(y0, y1, fy)| BilinearTap {
                        i00: y0 * width + x0,
                        i10: y0 * width + x1,
                        i01: y1 * width + x0,
                        i11: y1 * width + x1,
                        fx,
                        fy,
                    })
                })
            };
            f(y * width + x, tap);
        }
    }
}

/// Warps `src` into a plane of the same size. Pixels whose source falls
/// outside `src` are set to 0 and flagged 0 in the returned validity mask.
///
/// In bilinear mode a pixel is valid when every tap with non-zero weight is
/// inside the source.
pub fn warp_perspective(
    src: &Plane<f32>,
    h: &Homography,
    interpolation: Interpolation,
) -> Result<(Plane<f32>, BinaryMask)> {
    match interpolation {
        Interpolation::Nearest => warp_nearest(src, h),
        Interpolation::Bilinear => {
            let inverse = h.inverse()?;
            let (w, ht) = src.dims();
            let data = src.as_slice();
            let mut dst = Plane::filled(w, ht, 0.0f32)?;
            let mut valid = BinaryMask::zeros(w, ht)?;
            {
                let out = dst.as_mut_slice();
                let ok = valid.as_mut_slice();
                for_each_bilinear_source(w, ht, &inverse, |i, tap| {
                    if let Some(tap) = tap {
                        out[i] = tap.sample(data);
                        ok[i] = 1;
                    }
                });
            }
            Ok((dst, valid))
        }
    }
}

/// Nearest-neighbour warp for planes whose values must not be blended.
/// Pixels whose rounded source location is outside `src` get `T::default()`.
pub fn warp_nearest<T: Copy + Default>(src: &Plane<T>, h: &Homography) -> Result<(Plane<T>, BinaryMask)> {
    let inverse = h.inverse()?;
    let (w, ht) = src.dims();
    let mut dst = Plane::filled(w, ht, T::default())?;
    let mut valid = BinaryMask::zeros(w, ht)?;
    for y in 0..ht {
        for x in 0..w {
            let Some((sx, sy)) = inverse.apply(x as f64, y as f64) else {
                continue;
            };
            let (xi, yi) = (sx.round(), sy.round());
            if xi >= 0.0 && yi >= 0.0 && xi < w as f64 && yi < ht as f64 {
                dst.set(x, y, src.get(xi as usize, yi as usize));
                valid.set(x, y, true);
            }
        }
    }
    Ok((dst, valid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn ramp(w: usize, h: usize) -> Plane<f32> {
        Plane::from_fn(w, h, |x, y| (x as f32 * 3.0 + y as f32 * 7.0) % 251.0).unwrap()
    }

    /// Textbook bilinear sample at a real-valued location inside the frame.
    fn brute_bilinear(p: &Plane<f32>, x: f64, y: f64) -> f64 {
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(p.width() - 1);
        let y1 = (y0 + 1).min(p.height() - 1);
        let (ax, ay) = (x - x0 as f64, y - y0 as f64);
        let g = |x: usize, y: usize| p.get(x, y) as f64;
        (1.0 - ax) * (1.0 - ay) * g(x0, y0)
            + ax * (1.0 - ay) * g(x1, y0)
            + (1.0 - ax) * ay * g(x0, y1)
            + ax * ay * g(x1, y1)
    }

    #[test]
    fn identity_is_exact_and_fully_valid() {
        let src = ramp(17, 9);
        for mode in [Interpolation::Nearest, Interpolation::Bilinear] {
            let (dst, valid) = warp_perspective(&src, &Homography::identity(), mode).unwrap();
            assert_eq!(dst, src);
            assert_eq!(valid.count_ones(), 17 * 9);
        }
    }

    #[test]
    fn integer_translation_shifts_and_invalidates_strip() {
        let src = ramp(20, 6);
        let h = Homography::translation(3.0, 0.0);
        for mode in [Interpolation::Nearest, Interpolation::Bilinear] {
            let (dst, valid) = warp_perspective(&src, &h, mode).unwrap();
            for y in 0..6 {
                for x in 0..20 {
                    if x < 3 {
                        assert!(!valid.get(x, y));
                    } else {
                        assert!(valid.get(x, y));
                        assert_eq!(dst.get(x, y), src.get(x - 3, y));
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_matches_brute_force_bilinear() {
        let src = Plane::from_fn(16, 12, |x, y| ((x * x + 3 * y) % 97) as f32).unwrap();
        let h = Homography::new(Matrix3::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
        let (dst, valid) = warp_perspective(&src, &h, Interpolation::Bilinear).unwrap();
        for y in 0..12 {
            for x in 0..16 {
                let (sx, sy) = (x as f64 / 2.0, y as f64 / 2.0);
                assert!(valid.get(x, y));
                assert!((dst.get(x, y) as f64 - brute_bilinear(&src, sx, sy)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn subpixel_shift_invalidates_pixels_needing_outside_taps() {
        let src = ramp(10, 4);
        let (_, valid) = warp_perspective(&src, &Homography::translation(0.5, 0.0), Interpolation::Bilinear).unwrap();
        assert!(!valid.get(0, 0));
        assert!(valid.get(1, 0));
        assert!(valid.get(9, 0));
    }

    #[test]
    fn singular_homography_is_rejected() {
        let src = ramp(4, 4);
        let h = Homography::scaling(1e-6, 1e-6);
        assert!(h.is_err() || warp_perspective(&src, &h.unwrap(), Interpolation::Bilinear).is_err());
    }

    #[test]
    fn nearest_warp_preserves_integer_values() {
        let src = Plane::from_fn(8, 8, |x, y| (x + 8 * y) as u16).unwrap();
        let (dst, valid) = warp_nearest(&src, &Homography::translation(-2.0, 1.0)).unwrap();
        assert_eq!(dst.get(0, 1), src.get(2, 0));
        assert!(!valid.get(7, 0));
        assert!(!valid.get(0, 0));
    }
}
