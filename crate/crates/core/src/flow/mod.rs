//! Dense optical flow between the current frame and the background mean,
//! and the magnitude-to-weight transform applied to the difference image.

mod farneback;

use serde::{Deserialize, Serialize};

pub use farneback::{estimate_dense_flow, DenseFlow};

use crate::error::{Error, Result};
use crate::imaging::filter::resize_bilinear;
use crate::plane::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Ratio between consecutive pyramid levels, in (0, 1).
    pub pyr_scale: f32,
    pub levels: usize,
    /// Side of the box window that aggregates the per-pixel constraints.
    pub window: usize,
    pub iterations: usize,
    /// Radius of the polynomial neighbourhood.
    pub poly_n: usize,
    pub poly_sigma: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyr_scale: 0.5,
            levels: 3,
            window: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("flow: {m}")));
        if !(self.pyr_scale > 0.0 && self.pyr_scale < 1.0) {
            return bad("pyr_scale must lie in (0, 1)");
        }
        if self.levels == 0 || self.iterations == 0 {
            return bad("levels and iterations must be positive");
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return bad("window must be odd");
        }
        if self.poly_n == 0 || !(self.poly_sigma > 0.0) {
            return bad("poly_n and poly_sigma must be positive");
        }
        Ok(())
    }
}

/// Per-pixel displacement, pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub dx: Plane<f32>,
    pub dy: Plane<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            dx: Plane::filled(width, height, 0.0)?,
            dy: Plane::filled(width, height, 0.0)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dx.dims()
    }

    /// Resamples to a finer level, scaling the vectors with the resolution.
    fn upscaled(&self, width: usize, height: usize) -> Result<Self> {
        let (w, h) = self.dims();
        let (sx, sy) = (width as f32 / w as f32, height as f32 / h as f32);
        Ok(Self {
            dx: resize_bilinear(&self.dx, width, height)?.map(|v| v * sx),
            dy: resize_bilinear(&self.dy, width, height)?.map(|v| v * sy),
        })
    }
}

pub fn flow_magnitude(flow: &FlowField) -> Plane<f32> {
    flow.dx
        .zip_map(&flow.dy, |dx, dy| dx.hypot(dy))
        .expect("flow components share dimensions")
}

/// `min(mag / t_mag, w_cap)` where `mag > t_mag`, 1 elsewhere.
pub fn magnitude_weights(mag: &Plane<f32>, t_mag: f32, w_cap: f32) -> Result<Plane<f32>> {
    if !(t_mag > 0.0) {
        return Err(Error::InvalidParameter(format!("t_mag must be positive, got {t_mag}")));
    }
    if !(w_cap >= 1.0) {
        return Err(Error::InvalidParameter(format!("w_cap must be at least 1, got {w_cap}")));
    }
    Ok(mag.map(|m| if m > t_mag { (m / t_mag).min(w_cap) } else { 1.0 }))
}
