use crate::geometry::BoundingBox;
use crate::imaging::connected_components;
use crate::plane::BinaryMask;

/// Bounding boxes of the 8-connected components with more than `min_area`
/// pixels, in scan order.
pub fn extract_boxes(mask: &BinaryMask, min_area: usize) -> Vec<BoundingBox> {
    connected_components(mask)
        .into_iter()
        .filter(|r| r.pixel_count > min_area)
        .map(|r| r.bbox)
        .collect()
}

/// Grows every box by `margin` (clipped to `frame` when given), then
/// replaces intersecting boxes by their enclosing box until no two boxes
/// intersect. The result is sorted.
pub fn inflate_and_merge(boxes: &[BoundingBox], margin: u32, frame: Option<(usize, usize)>) -> Vec<BoundingBox> {
    let mut out: Vec<BoundingBox> = boxes
        .iter()
        .filter_map(|b| {
            let grown = b.inflate(margin);
            match frame {
                Some((w, h)) => grown.clip(w, h),
                None => Some(grown),
            }
        })
        .collect();

    'merge: loop {
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if out[i].intersects(&out[j]) {
                    let other = out.swap_remove(j);
                    out[i] = out[i].union(&other);
                    continue 'merge;
                }
            }
        }
        break;
    }
    out.sort();
    out
}
