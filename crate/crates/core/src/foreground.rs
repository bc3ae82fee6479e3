//! Foreground mask from the aligned model: neighbourhood difference, S/V
//! fusion, motion-adaptive threshold and flow weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{ensure_same_dims, BinaryMask, Plane};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForegroundParams {
    /// Base threshold `T`, intensity units.
    pub t_base: f32,
    pub lambda1: f32,
    /// Per pixel/frame of background motion.
    pub lambda2: f32,
    /// Minimum age, in frames, for a pixel to be reported.
    pub t_age: u16,
    /// Flow magnitude above which the difference is amplified, pixels/frame.
    pub t_mag: f32,
    pub w_cap: f32,
}

impl Default for ForegroundParams {
    fn default() -> Self {
        Self {
            t_base: 40.0,
            lambda1: 0.005,
            lambda2: 0.25,
            t_age: 5,
            t_mag: 5.0,
            w_cap: 4.0,
        }
    }
}

impl ForegroundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_base", self.t_base),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("t_mag", self.t_mag),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.t_age == 0 {
            return Err(Error::InvalidParameter("t_age must be positive".into()));
        }
        if !(self.w_cap >= 1.0 && self.w_cap.is_finite()) {
            return Err(Error::InvalidParameter(format!("w_cap must be at least 1, got {}", self.w_cap)));
        }
        Ok(())
    }
}

/// `D(p) = min |I(k) - μ(p)|` over the 3x3 neighbourhood `k` of `p`, clipped
/// at the frame border.
pub fn neighborhood_difference(i_t: &Plane<f32>, mu: &Plane<f32>) -> Result<Plane<f32>> {
    ensure_same_dims(i_t.dims(), mu.dims())?;
    let (w, h) = i_t.dims();
    let mut out = Plane::filled(w, h, 0.0f32)?;
    for y in 0..h {
        let mu_row = mu.row(y);
        let out_row = out.row_mut(y);
        out_row.iter_mut().for_each(|o| *o = f32::INFINITY);
        for ry in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            let src = i_t.row(ry);
            // each horizontal offset over the columns where it stays inside
            for (lo, hi, shift) in [(1usize, w, -1isize), (0, w, 0), (0, w - 1, 1)] {
                if lo >= hi {
                    continue;
                }
                let taps = &src[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                for ((o, &m), &v) in out_row[lo..hi].iter_mut().zip(&mu_row[lo..hi]).zip(taps) {
                    *o = o.min((v - m).abs());
                }
            }
        }
    }
    Ok(out)
}

/// Per-pixel maximum of the channel differences.
pub fn fuse_sv(d_s: &Plane<f32>, d_v: &Plane<f32>) -> Result<Plane<f32>> {
    d_s.zip_map(d_v, f32::max)
}

/// `T_a = T · λ1 · exp(a_bg · λ2)`.
pub fn adaptive_threshold(params: &ForegroundParams, a_bg: f64) -> f64 {
    params.t_base as f64 * params.lambda1 as f64 * (a_bg * params.lambda2 as f64).exp()
}

pub fn weighted_difference(d: &Plane<f32>, w: &Plane<f32>) -> Result<Plane<f32>> {
    d.zip_map(w, |d, w| d * w)
}

/// 1 where `d_w > t_a` and `age > t_age`.
pub fn threshold_mask(d_w: &Plane<f32>, t_a: f64, age: &Plane<u16>, t_age: u16) -> Result<BinaryMask> {
    ensure_same_dims(d_w.dims(), age.dims())?;
    let (w, h) = d_w.dims();
    let mut mask = BinaryMask::zeros(w, h)?;
    for ((m, &d), &a) in mask.as_mut_slice().iter_mut().zip(d_w.as_slice()).zip(age.as_slice()) {
        *m = (d as f64 > t_a && a > t_age) as u8;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_difference(i_t: &Plane<f32>, mu: &Plane<f32>) -> Plane<f32> {
        let (w, h) = i_t.dims();
        Plane::from_fn(w, h, |x, y| {
            let mut best = f32::INFINITY;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (kx, ky) = (x as i64 + dx, y as i64 + dy);
                    if kx >= 0 && ky >= 0 && kx < w as i64 && ky < h as i64 {
                        best = best.min((i_t.get(kx as usize, ky as usize) - mu.get(x, y)).abs());
                    }
                }
            }
            best
        })
        .unwrap()
    }

    fn plane_strategy() -> impl Strategy<Value = (Plane<f32>, Plane<f32>)> {
        (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
            (
                prop::collection::vec(0.0f32..255.0, w * h),
                prop::collection::vec(0.0f32..255.0, w * h),
            )
                .prop_map(move |(a, b)| (Plane::from_vec(w, h, a).unwrap(), Plane::from_vec(w, h, b).unwrap()))
        })
    }

    #[test]
    fn difference_examples() {
        let mu = Plane::filled(7, 5, 80.0f32).unwrap();
        assert!(neighborhood_difference(&mu, &mu).unwrap().as_slice().iter().all(|&d| d == 0.0));

        let mut impulse = mu.clone();
        impulse.set(3, 2, 180.0);
        let d = neighborhood_difference(&impulse, &mu).unwrap();
        assert_eq!(d, brute_difference(&impulse, &mu));
        assert!(d.as_slice().iter().all(|&v| v == 0.0));

        let raised = mu.map(|v| v + 50.0);
        assert!(neighborhood_difference(&raised, &mu).unwrap().as_slice().iter().all(|&v| v == 50.0));
        assert!(neighborhood_difference(&mu, &Plane::filled(5, 5, 0.0).unwrap()).is_err());
    }

    #[test]
    fn one_pixel_misalignment_is_absorbed() {
        // vertical step edge shifted by one column
        let mu = Plane::from_fn(12, 8, |x, _| if x < 6 { 20.0 } else { 200.0 }).unwrap();
        let i_t = Plane::from_fn(12, 8, |x, _| if x < 7 { 20.0 } else { 200.0 }).unwrap();
        assert!(neighborhood_difference(&i_t, &mu).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fusion_examples() {
        let z = Plane::filled(2, 1, 0.0f32).unwrap();
        let x = Plane::from_vec(2, 1, vec![5.0f32, 7.0]).unwrap();
        assert_eq!(fuse_sv(&z, &x).unwrap(), x);
        let s = Plane::from_vec(1, 1, vec![30.0f32]).unwrap();
        let v = Plane::from_vec(1, 1, vec![20.0f32]).unwrap();
        assert_eq!(fuse_sv(&s, &v).unwrap().get(0, 0), 30.0);
        assert!(fuse_sv(&s, &x).is_err());
    }

    #[test]
    fn threshold_examples() {
        let p = ForegroundParams::default();
        assert!((adaptive_threshold(&p, 0.0) - 0.2).abs() < 1e-6);
        assert!((adaptive_threshold(&p, 4.0) - 0.2 * std::f64::consts::E).abs() < 1e-6);
        assert!((adaptive_threshold(&p, 4.0) - 0.5437).abs() < 1e-4);
        assert!(adaptive_threshold(&p, 1.0) < adaptive_threshold(&p, 1.5));
    }

    #[test]
    fn weighting_examples() {
        let d = Plane::from_vec(2, 1, vec![30.0f32, 0.3]).unwrap();
        let ones = Plane::filled(2, 1, 1.0f32).unwrap();
        assert_eq!(weighted_difference(&d, &ones).unwrap(), d);
        let w = Plane::from_vec(2, 1, vec![2.0f32, 3.5]).unwrap();
        assert_eq!(weighted_difference(&d, &w).unwrap().get(0, 0), 60.0);
        let zero = Plane::filled(2, 1, 0.0f32).unwrap();
        assert_eq!(weighted_difference(&zero, &w).unwrap(), zero);
    }

    #[test]
    fn mask_examples() {
        let d = Plane::from_vec(3, 1, vec![0.5f32, 1000.0, 0.6]).unwrap();
        let age = Plane::from_vec(3, 1, vec![10u16, 5, 10]).unwrap();
        let m = threshold_mask(&d, 0.5, &age, 5).unwrap();
        assert_eq!(m.as_slice(), &[0, 0, 1]);
        let zero = Plane::filled(3, 1, 0.0f32).unwrap();
        assert_eq!(threshold_mask(&zero, 0.2, &age, 5).unwrap().count_ones(), 0);
    }

    #[test]
    fn params_validate() {
        assert!(ForegroundParams::default().validate().is_ok());
        let bad = ForegroundParams { lambda2: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ForegroundParams { w_cap: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn difference_matches_brute_force((i_t, mu) in plane_strategy()) {
            let d = neighborhood_difference(&i_t, &mu).unwrap();
            prop_assert_eq!(&d, &brute_difference(&i_t, &mu));
            // never exceeds the plain difference
            for ((&dv, &a), &b) in d.as_slice().iter().zip(i_t.as_slice()).zip(mu.as_slice()) {
                prop_assert!(dv <= (a - b).abs());
            }
        }

        #[test]
        fn fusion_is_commutative_and_idempotent((a, b) in plane_strategy()) {
            prop_assert_eq!(fuse_sv(&a, &b).unwrap(), fuse_sv(&b, &a).unwrap());
            prop_assert_eq!(fuse_sv(&a, &a).unwrap(), a);
        }

        #[test]
        fn mask_is_monotone_in_difference(
            (d, bump) in plane_strategy(), t_a in 0.0f64..300.0, age in 0u16..12,
        ) {
            let ages = Plane::filled(d.width(), d.height(), age).unwrap();
            let raised = d.zip_map(&bump, |a, b| a + b).unwrap();
            let lo = threshold_mask(&d, t_a, &ages, 5).unwrap();
            let hi = threshold_mask(&raised, t_a, &ages, 5).unwrap();
            for (&l, &h) in lo.as_slice().iter().zip(hi.as_slice()) {
                prop_assert!(l <= h);
            }
        }

        #[test]
        fn threshold_increases_with_motion(a in 0.0f64..20.0, delta in 0.01f64..5.0) {
            let p = ForegroundParams::default();
            prop_assert!(adaptive_threshold(&p, a) < adaptive_threshold(&p, a + delta));
        }
    }
}
