//! Linear filters and resampling on `f32` planes. Borders replicate the edge
//! pixel.

use crate::error::{Error, Result};
use crate::plane::Plane;

/// Normalized Gaussian kernel of `2 * radius + 1` taps.
pub fn gaussian_kernel(sigma: f32, radius: usize) -> Vec<f32> {
    let mut k: Vec<f32> = (0..=2 * radius)
        .map(|i| {
            let d = i as f32 - radius as f32;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves rows and then columns with the same symmetric odd-length kernel.
pub fn separable_filter(src: &Plane<f32>, kernel: &[f32]) -> Plane<f32> {
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let r = kernel.len() / 2;
    let (w, h) = src.dims();
    let mut tmp = src.clone();
    let mut padded = vec![0.0f32; w.max(h) + 2 * r];

    for y in 0..h {
        let row = src.row(y);
        fill_padded(&mut padded, r, row.iter().copied());
        let out = tmp.row_mut(y);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &kv) in kernel.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(&padded[k..k + w]) {
                *o += kv * v;
            }
        }
    }

    let mut out = tmp.clone();
    // column pass operates on whole rows at a time for cache friendliness
    let mut acc = vec![0.0f32; w];
    for y in 0..h {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r as isize).clamp(0, h as isize - 1) as usize;
            for (a, &s) in acc.iter_mut().zip(tmp.row(sy)) {
                *a += kv * s;
            }
        }
        out.row_mut(y).copy_from_slice(&acc);
    }
    out
}

fn fill_padded(buf: &mut [f32], r: usize, line: impl ExactSizeIterator<Item = f32> + Clone) {
    let n = line.len();
    let first = line.clone().next().unwrap_or(0.0);
    let last = line.clone().last().unwrap_or(0.0);
    buf[..r].iter_mut().for_each(|v| *v = first);
    for (i, v) in line.enumerate() {
        buf[r + i] = v;
    }
    buf[r + n..r + n + r].iter_mut().for_each(|v| *v = last);
}

pub fn gaussian_blur(src: &Plane<f32>, sigma: f32) -> Plane<f32> {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = ((sigma * 3.0).ceil() as usize).max(1);
    separable_filter(src, &gaussian_kernel(sigma, radius))
}

/// Halves a plane after smoothing with the 5-tap binomial kernel.
pub fn pyr_down(src: &Plane<f32>) -> Result<Plane<f32>> {
    let (w, h) = src.dims();
    if w < 2 || h < 2 {
        return Err(Error::InvalidDimensions { width: w / 2, height: h / 2 });
    }
    let smooth = separable_filter(src, &[1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0]);
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    Plane::from_fn(nw, nh, |x, y| smooth.get(2 * x, 2 * y))
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_bilinear(src: &Plane<f32>, width: usize, height: usize) -> Result<Plane<f32>> {
    let (w, h) = src.dims();
    if (w, h) == (width, height) {
        return Ok(src.clone());
    }
    let sx = w as f32 / width as f32;
    let sy = h as f32 / height as f32;
    let xs: Vec<(usize, usize, f32)> = (0..width).map(|x| axis_tap((x as f32 + 0.5) * sx - 0.5, w)).collect();
    let data = src.as_slice();
    let mut out = Plane::filled(width, height, 0.0f32)?;
    for y in 0..height {
        let (y0, y1, fy) = axis_tap((y as f32 + 0.5) * sy - 0.5, h);
        let (r0, r1) = (&data[y0 * w..(y0 + 1) * w], &data[y1 * w..(y1 + 1) * w]);
        for (o, &(x0, x1, fx)) in out.row_mut(y).iter_mut().zip(&xs) {
            let top = r0[x0] + fx * (r0[x1] - r0[x0]);
            let bot = r1[x0] + fx * (r1[x1] - r1[x0]);
            *o = top + fy * (bot - top);
        }
    }
    Ok(out)
}

#[inline]
fn axis_tap(s: f32, len: usize) -> (usize, usize, f32) {
    let s = s.clamp(0.0, (len - 1) as f32);
    let i0 = s as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, s - i0 as f32)
}

/// Mean over a `size` x `size` window (odd `size`) computed with running
/// sums; cost is independent of the window size.
pub fn box_blur(src: &Plane<f32>, size: usize) -> Plane<f32> {
    let mut out = src.clone();
    box_blur_in_place(&mut out, size, &mut Vec::new());
    out
}

/// In-place variant of [`box_blur`] reusing `scratch` between calls.
pub fn box_blur_in_place(p: &mut Plane<f32>, size: usize, scratch: &mut Vec<f32>) {
    let r = size / 2;
    if r == 0 {
        return;
    }
    let (w, h) = p.dims();
    let norm = 1.0 / (2 * r + 1) as f32;

    // horizontal
    scratch.resize(w + 2 * r, 0.0);
    for y in 0..h {
        let row = p.row_mut(y);
        fill_padded(scratch, r, row.iter().copied());
        let mut sum: f32 = scratch[..2 * r + 1].iter().sum();
        row[0] = sum * norm;
        for x in 1..w {
            sum += scratch[x + 2 * r] - scratch[x - 1];
            row[x] = sum * norm;
        }
    }

    // vertical, whole rows at a time
    let data = p.as_mut_slice();
    let src = data.to_vec();
    let row = |y: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        &src[y * w..(y + 1) * w]
    };
    let mut sums = vec![0.0f32; w];
    for dy in -(r as isize)..=(r as isize) {
        for (s, &v) in sums.iter_mut().zip(row(dy)) {
            *s += v;
        }
    }
    for y in 0..h {
        let out = &mut data[y * w..(y + 1) * w];
        for (o, &s) in out.iter_mut().zip(&sums) {
            *o = s * norm;
        }
        let (add, sub) = (row(y as isize + r as isize + 1), row(y as isize - r as isize));
        for ((s, &a), &b) in sums.iter_mut().zip(add).zip(sub) {
            *s += a - b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize) -> Plane<f32> {
        Plane::from_fn(w, h, |x, y| ((x * 7919 + y * 104729) % 251) as f32).unwrap()
    }

    #[test]
    fn gaussian_kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.1, 5);
        assert!((k.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        for i in 0..5 {
            assert!((k[i] - k[10 - i]).abs() < 1e-7);
        }
    }

    #[test]
    fn box_blur_matches_direct_mean() {
        let p = noise(13, 9);
        let b = box_blur(&p, 5);
        for y in 0..9i64 {
            for x in 0..13i64 {
                let mut s = 0.0f64;
                for dy in -2..=2 {
                    for dx in -2..=2 {
                        let sx = (x + dx).clamp(0, 12) as usize;
                        let sy = (y + dy).clamp(0, 8) as usize;
                        s += p.get(sx, sy) as f64;
                    }
                }
                assert!((b.get(x as usize, y as usize) as f64 - s / 25.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn separable_filter_preserves_constants() {
        let p = Plane::filled(11, 6, 42.0f32).unwrap();
        let out = separable_filter(&p, &gaussian_kernel(2.0, 6));
        assert!(out.as_slice().iter().all(|&v| (v - 42.0).abs() < 1e-4));
    }

    #[test]
    fn pyr_down_halves_dimensions() {
        let p = noise(21, 10);
        let d = pyr_down(&p).unwrap();
        assert_eq!(d.dims(), (11, 5));
    }

    #[test]
    fn resize_identity_and_constant() {
        let p = noise(10, 10);
        assert_eq!(resize_bilinear(&p, 10, 10).unwrap(), p);
        let c = Plane::filled(10, 8, 3.0f32).unwrap();
        let r = resize_bilinear(&c, 5, 4).unwrap();
        assert!(r.as_slice().iter().all(|&v| (v - 3.0).abs() < 1e-6));
    }
}
