//! Global (camera) motion between consecutive frames: grid points are
//! tracked with pyramidal Lucas-Kanade, a homography is fitted with RANSAC
//! and the mean inlier displacement gives the background motion `A_BG`.

mod grid;
mod lk;
mod ransac;

use serde::{Deserialize, Serialize};

pub use grid::select_grid_points;
pub use lk::{track_points, ImagePyramid, LkParams, PointCorrespondence};
pub use ransac::{estimate_homography, fit_homography_dlt, HomographyFit, RansacParams};

use crate::error::{Error, Result};
use crate::geometry::Homography;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationParams {
    pub grid_step: usize,
    pub lk: LkParams,
    pub ransac: RansacParams,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            grid_step: 32,
            lk: LkParams::default(),
            ransac: RansacParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub h: Homography,
    pub inlier_flags: Vec<bool>,
    /// Mean inlier displacement, pixels per frame.
    pub a_bg: f64,
    pub inlier_ratio: f64,
}

/// Mean Euclidean displacement over the correspondences flagged as inliers.
pub fn background_motion(correspondences: &[PointCorrespondence], inlier_flags: &[bool]) -> Result<f64> {
    let (sum, n) = correspondences
        .iter()
        .zip(inlier_flags)
        .filter(|(_, &inlier)| inlier)
        .fold((0.0f64, 0usize), |(s, n), (c, _)| {
            let (dx, dy) = c.displacement();
            (s + dx.hypot(dy), n + 1)
        });
    if n == 0 {
        return Err(Error::UndefinedMotion);
    }
    Ok(sum / n as f64)
}

/// Estimates the motion taking `prev` onto `curr`.
pub fn register(prev: &ImagePyramid, curr: &ImagePyramid, params: &RegistrationParams) -> Result<RegistrationResult> {
    let (w, h) = prev.base().dims();
    let points = select_grid_points(w, h, params.grid_step);
    let correspondences = track_points(prev, curr, &points, &params.lk)?;
    let fit = estimate_homography(&correspondences, &params.ransac)?;
    let a_bg = background_motion(&correspondences, &fit.inlier_flags)?;
    Ok(RegistrationResult {
        h: fit.h,
        inlier_flags: fit.inlier_flags,
        a_bg,
        inlier_ratio: fit.inlier_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use proptest::prelude::*;

    fn moved(dx: f64, dy: f64) -> PointCorrespondence {
        PointCorrespondence {
            prev: Point::new(10.0, 10.0),
            curr: Point::new(10.0 + dx, 10.0 + dy),
            tracked: true,
            residual: 0.0,
        }
    }

    #[test]
    fn zero_motion() {
        let c = vec![moved(0.0, 0.0); 5];
        assert_eq!(background_motion(&c, &[true; 5]).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let c = vec![moved(3.0, 4.0); 4];
        assert_eq!(background_motion(&c, &[true; 4]).unwrap(), 5.0);
    }

    #[test]
    fn mean_of_norms() {
        let c = vec![moved(3.0, 4.0), moved(0.0, 0.0)];
        assert_eq!(background_motion(&c, &[true, true]).unwrap(), 2.5);
    }

    #[test]
    fn outliers_are_excluded() {
        let c = vec![moved(3.0, 4.0), moved(100.0, 0.0)];
        assert_eq!(background_motion(&c, &[true, false]).unwrap(), 5.0);
    }

    #[test]
    fn no_inliers_is_an_error() {
        let c = vec![moved(1.0, 1.0)];
        assert!(matches!(background_motion(&c, &[false]), Err(Error::UndefinedMotion)));
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            d in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0, any::<bool>()), 1..40),
            seed in any::<u64>(),
        ) {
            let c: Vec<_> = d.iter().map(|&(x, y, _)| moved(x, y)).collect();
            let mut flags: Vec<bool> = d.iter().map(|t| t.2).collect();
            flags[0] = true;
            let a = background_motion(&c, &flags).unwrap();
            let mut order: Vec<usize> = (0..c.len()).collect();
            // deterministic shuffle from the seed
            order.sort_by_key(|&i| (i as u64).wrapping_mul(6364136223846793005).wrapping_add(seed).rotate_left(17));
            let c2: Vec<_> = order.iter().map(|&i| c[i]).collect();
            let f2: Vec<_> = order.iter().map(|&i| flags[i]).collect();
            let b = background_motion(&c2, &f2).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
            prop_assert!(a >= 0.0);
        }
    }
}
