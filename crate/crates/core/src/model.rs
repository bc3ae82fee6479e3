//! Per-pixel running-mean background model over the S and V channels with an
//! age counter that sets the learning rate `α = 1 / age`.

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::geometry::Homography;
use crate::imaging::for_each_bilinear_source;
use crate::plane::{ensure_same_dims, Plane};

pub const DEFAULT_AGE_MAX: u16 = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    pub mu_s: Plane<f32>,
    pub mu_v: Plane<f32>,
    pub age: Plane<u16>,
}

impl BackgroundModel {
    pub fn width(&self) -> usize {
        self.mu_v.width()
    }

    pub fn height(&self) -> usize {
        self.mu_v.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mu_v.dims()
    }

    pub fn mu_v_image(&self) -> image::GrayImage {
        self.mu_v.to_luma8()
    }

    pub fn age_image(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        let (w, h) = self.dims();
        ImageBuffer::from_raw(w as u32, h as u32, self.age.as_slice().to_vec()).expect("age dims match buffer")
    }
}

/// Copies the first frame into the mean planes with every age at 0.
pub fn init_model(s: &Plane<f32>, v: &Plane<f32>) -> Result<BackgroundModel> {
    ensure_same_dims(s.dims(), v.dims())?;
    Ok(BackgroundModel {
        mu_s: s.clone(),
        mu_v: v.clone(),
        age: Plane::filled(v.width(), v.height(), 0)?,
    })
}

/// Moves the model into the current frame's coordinates. Means are sampled
/// bilinearly and ages nearest-neighbour; pixels whose source lies outside
/// the previous frame restart with mean 0 and age 0.
pub fn warp_model(model: &BackgroundModel, h: &Homography) -> Result<BackgroundModel> {
    let inverse = h.inverse()?;
    let (w, ht) = model.dims();
    let mut mu_s = Plane::filled(w, ht, 0.0f32)?;
    let mut mu_v = Plane::filled(w, ht, 0.0f32)?;
    let mut age = Plane::filled(w, ht, 0u16)?;
    {
        let (src_s, src_v, src_age) = (model.mu_s.as_slice(), model.mu_v.as_slice(), model.age.as_slice());
        let (out_s, out_v, out_age) = (mu_s.as_mut_slice(), mu_v.as_mut_slice(), age.as_mut_slice());
        for_each_bilinear_source(w, ht, &inverse, |i, tap| {
            if let Some(tap) = tap {
                out_s[i] = tap.sample(src_s);
                out_v[i] = tap.sample(src_v);
                out_age[i] = src_age[tap.nearest()];
            }
        });
    }
    Ok(BackgroundModel { mu_s, mu_v, age })
}

/// Blends the current frame in: `age' = min(age + 1, age_max)`,
/// `μ' = (1 - 1/age')·μ + (1/age')·I`.
pub fn update_model(model: &BackgroundModel, s: &Plane<f32>, v: &Plane<f32>, age_max: u16) -> Result<BackgroundModel> {
    if age_max == 0 {
        return Err(Error::InvalidParameter("age_max must be at least 1".into()));
    }
    ensure_same_dims(model.dims(), s.dims())?;
    ensure_same_dims(model.dims(), v.dims())?;
    let age = model.age.map(|a| a.saturating_add(1).min(age_max));
    let mu_s = blend(&model.mu_s, s, &age)?;
    let mu_v = blend(&model.mu_v, v, &age)?;
    Ok(BackgroundModel { mu_s, mu_v, age })
}

fn blend(mu: &Plane<f32>, frame: &Plane<f32>, age: &Plane<u16>) -> Result<Plane<f32>> {
    let mut out = mu.clone();
    for ((m, &i), &a) in out.as_mut_slice().iter_mut().zip(frame.as_slice()).zip(age.as_slice()) {
        *m = if a <= 1 {
            i
        } else {
            let alpha = 1.0 / a as f32;
            ((1.0 - alpha) * *m + alpha * i).clamp(m.min(i), m.max(i))
        };
    }
    Ok(out)
}
