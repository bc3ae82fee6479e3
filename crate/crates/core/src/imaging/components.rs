use crate::geometry::BoundingBox;
use crate::plane::BinaryMask;

/// One 8-connected component of a binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Label in discovery (row-major scan) order, starting at 1.
    pub label: u32,
    pub pixel_count: usize,
    pub bbox: BoundingBox,
}

/// Labels the 8-connected components of `mask`. Regions are ordered by the
/// top-left corner of their bounding box, `y` first.
pub fn connected_components(mask: &BinaryMask) -> Vec<Region> {
    let (w, h) = mask.dims();
    let src = mask.as_slice();
    let mut labels = vec![0u32; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if src[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = regions.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut count = 0;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if src[j] != 0 && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        regions.push(Region {
            label,
            pixel_count: count,
            bbox: BoundingBox::new(x0 as i32, y0 as i32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32),
        });
    }

    regions.sort_by_key(|r| (r.bbox.y, r.bbox.x, r.label));
    regions
}
