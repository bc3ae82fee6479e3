//! Pyramidal Lucas-Kanade point tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging::filter::pyr_down;
use crate::plane::Plane;

/// Coarse-to-fine stack of a grayscale plane. Level 0 is full resolution,
/// each further level halves both dimensions, so a level-`k` coordinate is
/// the full-resolution coordinate divided by `2^k`.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    levels: Vec<Plane<f32>>,
}

impl ImagePyramid {
    /// Builds up to `levels` levels, stopping early once a level would drop
    /// below 8 pixels on a side.
    pub fn build(base: Plane<f32>, levels: usize) -> Result<Self> {
        let mut stack = vec![base];
        while stack.len() < levels.max(1) {
            let top = stack.last().expect("non-empty");
            if top.width() < 16 || top.height() < 16 {
                break;
            }
            let next = pyr_down(top)?;
            stack.push(next);
        }
        Ok(Self { levels: stack })
    }

    pub fn level(&self, i: usize) -> &Plane<f32> {
        &self.levels[i]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn base(&self) -> &Plane<f32> {
        &self.levels[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LkParams {
    /// Side of the square integration window, odd.
    pub window: usize,
    pub levels: usize,
    pub max_iterations: usize,
    /// Stop iterating once an update moves the estimate less than this (px).
    pub epsilon: f32,
    /// Minimum eigenvalue of the window's gradient matrix, normalized by the
    /// window area, below which a point is untrackable.
    pub min_eigenvalue: f32,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window: 21,
            levels: 3,
            max_iterations: 30,
            epsilon: 0.01,
            min_eigenvalue: 1e-2,
        }
    }
}

impl LkParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "LK window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.levels == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("LK levels and iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A grid point and where it was found in the next frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCorrespondence {
    pub prev: Point,
    /// Only meaningful when `tracked` is true.
    pub curr: Point,
    pub tracked: bool,
    /// Mean absolute intensity difference over the window at the final
    /// position.
    pub residual: f32,
}

impl PointCorrespondence {
    pub fn displacement(&self) -> (f64, f64) {
        (self.curr.x - self.prev.x, self.curr.y - self.prev.y)
    }
}

/// Tracks every point from `prev` into `curr`.
pub fn track_points(
    prev: &ImagePyramid,
    curr: &ImagePyramid,
    points: &[Point],
    params: &LkParams,
) -> Result<Vec<PointCorrespondence>> {
    params.validate()?;
    if prev.base().dims() != curr.base().dims() {
        return Err(Error::DimensionMismatch {
            expected: prev.base().dims(),
            actual: curr.base().dims(),
        });
    }
    let levels = params.levels.min(prev.len()).min(curr.len());
    let mut tracker = Tracker::new(params.window);
    Ok(points
        .iter()
        .map(|&p| tracker.track(prev, curr, p, levels, params))
        .collect())
}

struct Tracker {
    half: usize,
    /// Previous-frame patch with a one-pixel apron for central differences.
    apron: Vec<f32>,
    template: Vec<f32>,
    gx: Vec<f32>,
    gy: Vec<f32>,
    warped: Vec<f32>,
}

impl Tracker {
    fn new(window: usize) -> Self {
        let n = window * window;
        Self {
            half: window / 2,
            apron: vec![0.0; (window + 2) * (window + 2)],
            template: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            warped: vec![0.0; n],
        }
    }

    fn track(
        &mut self,
        prev: &ImagePyramid,
        curr: &ImagePyramid,
        pt: Point,
        levels: usize,
        params: &LkParams,
    ) -> PointCorrespondence {
        let lost = PointCorrespondence {
            prev: pt,
            curr: pt,
            tracked: false,
            residual: f32::INFINITY,
        };
        let win = 2 * self.half + 1;
        let area = (win * win) as f32;
        let max_motion = (win as f32) * (1 << levels) as f32;
        let (mut gx, mut gy) = (0.0f32, 0.0f32);

        for level in (0..levels).rev() {
            let scale = 1.0 / (1u32 << level) as f32;
            let (px, py) = (pt.x as f32 * scale, pt.y as f32 * scale);
            let img_prev = prev.level(level);
            let img_curr = curr.level(level);

            sample_patch(img_prev, px, py, self.half + 1, &mut self.apron);
            let aw = win + 2;
            let (mut gxx, mut gxy, mut gyy) = (0.0f32, 0.0f32, 0.0f32);
            for j in 0..win {
                for i in 0..win {
                    let a = (j + 1) * aw + (i + 1);
                    let dx = 0.5 * (self.apron[a + 1] - self.apron[a - 1]);
                    let dy = 0.5 * (self.apron[a + aw] - self.apron[a - aw]);
                    let k = j * win + i;
                    self.template[k] = self.apron[a];
                    self.gx[k] = dx;
                    self.gy[k] = dy;
                    gxx += dx * dx;
                    gxy += dx * dy;
                    gyy += dy * dy;
                }
            }
            let min_eig = 0.5 * ((gxx + gyy) - ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt()) / area;
            let det = gxx * gyy - gxy * gxy;
            if !(min_eig >= params.min_eigenvalue) || det <= f32::EPSILON {
                if level == 0 {
                    return lost;
                }
                gx *= 2.0;
                gy *= 2.0;
                continue;
            }
            let inv_det = 1.0 / det;

            let (w, h) = img_curr.dims();
            let (mut vx, mut vy) = (0.0f32, 0.0f32);
            for _ in 0..params.max_iterations {
                let (qx, qy) = (px + gx + vx, py + gy + vy);
                if !(qx >= 0.0 && qy >= 0.0 && qx <= (w - 1) as f32 && qy <= (h - 1) as f32) {
                    return lost;
                }
                sample_patch(img_curr, qx, qy, self.half, &mut self.warped);
                let (mut bx, mut by) = (0.0f32, 0.0f32);
                for k in 0..self.template.len() {
                    let diff = self.template[k] - self.warped[k];
                    bx += diff * self.gx[k];
                    by += diff * self.gy[k];
                }
                let dx = inv_det * (gyy * bx - gxy * by);
                let dy = inv_det * (gxx * by - gxy * bx);
                vx += dx;
                vy += dy;
                if !(vx.is_finite() && vy.is_finite()) || vx.abs().max(vy.abs()) > max_motion {
                    return lost;
                }
                if dx * dx + dy * dy < params.epsilon * params.epsilon {
                    break;
                }
            }
            gx += vx;
            gy += vy;
            if level > 0 {
                gx *= 2.0;
                gy *= 2.0;
            }
        }

        let curr_pt = Point::new(pt.x + gx as f64, pt.y + gy as f64);
        let (w, h) = curr.base().dims();
        if !(curr_pt.x >= 0.0 && curr_pt.y >= 0.0 && curr_pt.x <= (w - 1) as f64 && curr_pt.y <= (h - 1) as f64) {
            return lost;
        }
        sample_patch(curr.base(), curr_pt.x as f32, curr_pt.y as f32, self.half, &mut self.warped);
        sample_patch(prev.base(), pt.x as f32, pt.y as f32, self.half, &mut self.template);
        let residual = self
            .template
            .iter()
            .zip(&self.warped)
            .map(|(a, b)| (a - b).abs())
            .sum::<f32>()
            / area;
        PointCorrespondence {
            prev: pt,
            curr: curr_pt,
            tracked: true,
            residual,
        }
    }
}

/// Samples the `(2*half+1)^2` grid centred on `(cx, cy)` with bilinear
/// interpolation; coordinates outside the plane are clamped to the edge.
fn sample_patch(p: &Plane<f32>, cx: f32, cy: f32, half: usize, out: &mut [f32]) {
    let side = 2 * half + 1;
    let (w, h) = p.dims();
    let x0f = (cx - half as f32).floor();
    let y0f = (cy - half as f32).floor();
    let fx = cx - half as f32 - x0f;
    let fy = cy - half as f32 - y0f;
    let (x0, y0) = (x0f as isize, y0f as isize);
    let data = p.as_slice();
    let interior = x0 >= 0 && y0 >= 0 && (x0 + side as isize) < w as isize && (y0 + side as isize) < h as isize;
    let (w00, w10, w01, w11) = ((1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy);
    if interior {
        let (x0, y0) = (x0 as usize, y0 as usize);
        for j in 0..side {
            let r0 = &data[(y0 + j) * w + x0..(y0 + j) * w + x0 + side + 1];
            let r1 = &data[(y0 + j + 1) * w + x0..(y0 + j + 1) * w + x0 + side + 1];
            let o = &mut out[j * side..(j + 1) * side];
            for i in 0..side {
                o[i] = w00 * r0[i] + w10 * r0[i + 1] + w01 * r1[i] + w11 * r1[i + 1];
            }
        }
    } else {
        let cx_ = |x: isize| x.clamp(0, w as isize - 1) as usize;
        let cy_ = |y: isize| y.clamp(0, h as isize - 1) as usize;
        for j in 0..side {
            let (ya, yb) = (cy_(y0 + j as isize), cy_(y0 + j as isize + 1));
            for i in 0..side {
                let (xa, xb) = (cx_(x0 + i as isize), cx_(x0 + i as isize + 1));
                out[j * side + i] = w00 * data[ya * w + xa]
                    + w10 * data[ya * w + xb]
                    + w01 * data[yb * w + xa]
                    + w11 * data[yb * w + xb];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::select_grid_points;

    /// Smooth analytic texture; `shift` moves the pattern by `(sx, sy)`.
    pub(crate) fn smooth_texture(w: usize, h: usize, sx: f32, sy: f32) -> Plane<f32> {
        Plane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f32 - sx, y as f32 - sy);
            128.0
                + 40.0 * (x * 0.21).sin() * (y * 0.17).cos()
                + 30.0 * (x * 0.083 + y * 0.121).sin()
                + 20.0 * (y * 0.29 - x * 0.05).cos()
        })
        .unwrap()
    }

    fn pyramid(p: Plane<f32>) -> ImagePyramid {
        ImagePyramid::build(p, 3).unwrap()
    }

    #[test]
    fn identical_frames_track_in_place() {
        let a = pyramid(smooth_texture(160, 120, 0.0, 0.0));
        let pts = select_grid_points(160, 120, 32);
        let out = track_points(&a, &a, &pts, &LkParams::default()).unwrap();
        for c in out {
            assert!(c.tracked);
            let (dx, dy) = c.displacement();
            assert!(dx.abs() < 1e-3 && dy.abs() < 1e-3, "{dx} {dy}");
        }
    }

    #[test]
    fn recovers_integer_shift() {
        let a = pyramid(smooth_texture(200, 150, 0.0, 0.0));
        let b = pyramid(smooth_texture(200, 150, 4.0, 0.0));
        let pts = select_grid_points(200, 150, 32);
        let out = track_points(&a, &b, &pts, &LkParams::default()).unwrap();
        for c in &out {
            assert!(c.tracked);
            let (dx, dy) = c.displacement();
            assert!((dx - 4.0).abs() < 0.25 && dy.abs() < 0.25, "{dx} {dy}");
        }
    }

    #[test]
    fn flat_frames_are_untrackable() {
        let a = pyramid(Plane::filled(96, 96, 90.0).unwrap());
        let pts = select_grid_points(96, 96, 32);
        let out = track_points(&a, &a, &pts, &LkParams::default()).unwrap();
        assert!(!out.is_empty());
        assert!(out.iter().all(|c| !c.tracked));
    }

    #[test]
    fn mismatched_pyramids_are_rejected() {
        let a = pyramid(smooth_texture(64, 64, 0.0, 0.0));
        let b = pyramid(smooth_texture(32, 32, 0.0, 0.0));
        assert!(matches!(
            track_points(&a, &b, &[], &LkParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn even_window_is_rejected() {
        let a = pyramid(smooth_texture(64, 64, 0.0, 0.0));
        let params = LkParams {
            window: 20,
            ..LkParams::default()
        };
        assert!(track_points(&a, &a, &[], &params).is_err());
    }
}
