use image::RgbImage;

use crate::error::Result;
use crate::plane::{check_dims, Plane};

/// Converts an RGB frame to the saturation and value channels of HSV, both
/// scaled to [0, 255] and rounded to integers. Hue is not computed.
pub fn rgb_to_sv(frame: &RgbImage) -> Result<(Plane<f32>, Plane<f32>)> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    check_dims(w, h)?;
    let mut s = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for px in frame.as_raw().chunks_exact(3) {
        let max = px[0].max(px[1]).max(px[2]);
        let min = px[0].min(px[1]).min(px[2]);
        let sat = if max == 0 {
            0.0
        } else {
            (255.0 * (max - min) as f32 / max as f32).round()
        };
        s.push(sat);
        v.push(max as f32);
    }
    Ok((Plane::from_vec(w, h, s)?, Plane::from_vec(w, h, v)?))
}
