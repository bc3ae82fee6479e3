//! Binary morphology with a square structuring element of side
//! `2 * radius + 1`. Pixels outside the mask count as 0.

use crate::error::{Error, Result};
use crate::plane::BinaryMask;

/// Erosion followed by dilation.
pub fn morph_open(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    dilate(&erode(mask, radius)?, radius)
}

pub fn erode(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    // a pixel survives only when the whole in-bounds window is set and the
    // window does not leave the frame
    let full = 2 * radius + 1;
    square_filter(mask, radius, |count| count == full)
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    square_filter(mask, radius, |count| count > 0)
}

/// Separable square filter: applies `keep(ones_in_window)` along rows, then
/// along columns of the intermediate result.
fn square_filter(mask: &BinaryMask, radius: usize, keep: impl Fn(usize) -> bool) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::InvalidParameter("morphology radius must be >= 1".into()));
    }
    let (w, h) = mask.dims();
    let src = mask.as_slice();
    let mut tmp = vec![0u8; w * h];
    let mut prefix = Vec::with_capacity(w + 1);
    for y in 0..h {
        filter_line(&src[y * w..(y + 1) * w], radius, &keep, &mut prefix, &mut tmp[y * w..(y + 1) * w]);
    }

    // columns: running per-column counts over the in-bounds rows of the window
    let mut out = BinaryMask::zeros(w, h)?;
    let dst = out.as_mut_slice();
    let mut counts = vec![0u32; w];
    for row in tmp.chunks_exact(w).take(radius) {
        add_row(&mut counts, row);
    }
    for y in 0..h {
        if y + radius < h {
            add_row(&mut counts, &tmp[(y + radius) * w..(y + radius + 1) * w]);
        }
        if y > radius {
            let old = &tmp[(y - radius - 1) * w..(y - radius) * w];
            for (c, &v) in counts.iter_mut().zip(old) {
                *c -= v as u32;
            }
        }
        for (o, &c) in dst[y * w..(y + 1) * w].iter_mut().zip(&counts) {
            *o = keep(c as usize) as u8;
        }
    }
    Ok(out)
}

fn add_row(counts: &mut [u32], row: &[u8]) {
    for (c, &v) in counts.iter_mut().zip(row) {
        *c += v as u32;
    }
}

fn filter_line(line: &[u8], radius: usize, keep: &impl Fn(usize) -> bool, prefix: &mut Vec<usize>, out: &mut [u8]) {
    let n = line.len();
    prefix.clear();
    prefix.push(0);
    let mut acc = 0;
    for &v in line {
        acc += v as usize;
        prefix.push(acc);
    }
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(n);
        *o = keep(prefix[hi] - prefix[lo]) as u8;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct 2-D definition, out-of-bounds pixels read as 0.
    fn brute_open(m: &BinaryMask, r: usize) -> BinaryMask {
        let (w, h) = m.dims();
        let r = r as i64;
        let at = |m: &BinaryMask, x: i64, y: i64| {
            x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && m.get(x as usize, y as usize)
        };
        let eroded = BinaryMask::from_fn(w, h, |x, y| {
            (-r..=r).all(|dy| (-r..=r).all(|dx| at(m, x as i64 + dx, y as i64 + dy)))
        })
        .unwrap();
        BinaryMask::from_fn(w, h, |x, y| {
            (-r..=r).any(|dy| (-r..=r).any(|dx| at(&eroded, x as i64 + dx, y as i64 + dy)))
        })
        .unwrap()
    }

    #[test]
    fn empty_mask_stays_empty() {
        let m = BinaryMask::zeros(9, 7).unwrap();
        assert_eq!(morph_open(&m, 1).unwrap().count_ones(), 0);
    }

    #[test]
    fn isolated_pixel_is_removed() {
        let mut m = BinaryMask::zeros(9, 9).unwrap();
        m.set(4, 4, true);
        assert_eq!(morph_open(&m, 1).unwrap().count_ones(), 0);
    }

    #[test]
    fn solid_block_survives() {
        let m = BinaryMask::from_fn(30, 30, |x, y| (10..20).contains(&x) && (10..20).contains(&y)).unwrap();
        let opened = morph_open(&m, 1).unwrap();
        assert_eq!(opened, brute_open(&m, 1));
        assert_eq!(opened, m);
    }

    #[test]
    fn block_touching_border_survives() {
        // erosion trims the border row, dilation grows it back
        let m = BinaryMask::from_fn(10, 10, |x, y| x < 5 && y < 5).unwrap();
        assert!(!erode(&m, 1).unwrap().get(0, 0));
        let opened = morph_open(&m, 1).unwrap();
        assert_eq!(opened, brute_open(&m, 1));
        assert_eq!(opened, m);
    }

    #[test]
    fn thin_line_is_removed() {
        let m = BinaryMask::from_fn(12, 12, |x, y| y == 5 || (x == 3 && y < 4)).unwrap();
        assert_eq!(morph_open(&m, 1).unwrap().count_ones(), 0);
    }

    #[test]
    fn zero_radius_is_rejected() {
        assert!(morph_open(&BinaryMask::zeros(3, 3).unwrap(), 0).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.6), w * h).prop_map(move |bits| {
                BinaryMask::from_fn(w, h, |x, y| bits[y * w + x]).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(m in arb_mask(), r in 1usize..3) {
            prop_assert_eq!(morph_open(&m, r).unwrap(), brute_open(&m, r));
        }

        #[test]
        fn opening_is_idempotent(m in arb_mask(), r in 1usize..3) {
            let once = morph_open(&m, r).unwrap();
            prop_assert_eq!(morph_open(&once, r).unwrap(), once);
        }

        #[test]
        fn opening_is_anti_extensive(m in arb_mask()) {
            let opened = morph_open(&m, 1).unwrap();
            for (a, b) in opened.as_slice().iter().zip(m.as_slice()) {
                prop_assert!(a <= b);
            }
        }
    }
}
