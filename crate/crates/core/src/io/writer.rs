use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::detect::FrameDetections;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

use super::annotations::{AnnotationFormat, PlainBoxFormat};

pub const OVERLAY_COLOR: Rgb<u8> = Rgb([255, 0, 0]);

/// Writes `<dir>/<stem>.txt`, creating `dir` if needed. An empty box list
/// still produces an (empty) file.
pub fn write_frame_boxes(dir: &Path, stem: &str, boxes: &[BoundingBox]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let format = PlainBoxFormat;
    fs::write(dir.join(format!("{stem}.{}", format.extension())), format.render(boxes))?;
    Ok(())
}

/// One annotation file per frame, named after `stems[frame_index]`.
pub fn write_detections(detections: &[FrameDetections], stems: &[String], dir: &Path) -> Result<()> {
    for d in detections {
        let stem = stems
            .get(d.frame_index)
            .ok_or_else(|| Error::InvalidParameter(format!("no file name for frame {}", d.frame_index)))?;
        write_frame_boxes(dir, stem, &d.boxes)?;
    }
    Ok(())
}

/// Copy of `frame` with each box outline drawn in `color`, clipped to the
/// image.
pub fn render_overlay(frame: &RgbImage, boxes: &[BoundingBox], color: Rgb<u8>) -> RgbImage {
    let mut out = frame.clone();
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            out.put_pixel(x as u32, y as u32, color);
        }
    };
    for b in boxes {
        let (x0, y0, x1, y1) = (b.x as i64, b.y as i64, b.right() - 1, b.bottom() - 1);
        for x in x0.max(0)..=x1.min(w - 1) {
            put(x, y0);
            put(x, y1);
        }
        for y in y0.max(0)..=y1.min(h - 1) {
            put(x0, y);
            put(x1, y);
        }
    }
    out
}

/// Saves `render_overlay(frame, boxes, OVERLAY_COLOR)` as `<dir>/<stem>.png`.
pub fn write_overlay(dir: &Path, stem: &str, frame: &RgbImage, boxes: &[BoundingBox]) -> Result<()> {
    fs::create_dir_all(dir)?;
    render_overlay(frame, boxes, OVERLAY_COLOR).save(dir.join(format!("{stem}.png")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Diagnostics;
    use crate::io::parse_annotations;

    fn det(frame_index: usize, boxes: Vec<BoundingBox>) -> FrameDetections {
        FrameDetections {
            frame_index,
            boxes,
            diagnostics: Diagnostics {
                a_bg: 0.0,
                inlier_ratio: 1.0,
                t_a: 0.2,
                homography_ok: true,
            },
        }
    }

    #[test]
    fn write_then_parse_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let boxes = vec![BoundingBox::new(3, 4, 5, 6), BoundingBox::new(-1, 0, 2, 2)];
        let stems = vec!["a".to_string(), "b".to_string()];
        write_detections(&[det(0, boxes.clone()), det(1, vec![])], &stems, tmp.path()).unwrap();
        assert_eq!(parse_annotations(&tmp.path().join("a.txt"), 0).unwrap().boxes, boxes);
        let empty = tmp.path().join("b.txt");
        assert!(empty.is_file());
        assert!(parse_annotations(&empty, 1).unwrap().boxes.is_empty());
        assert!(write_detections(&[det(5, vec![])], &stems, tmp.path()).is_err());
    }

    #[test]
    fn unwritable_destination_is_an_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let file = tmp.path().join("f");
        fs::write(&file, "").unwrap();
        assert!(matches!(write_frame_boxes(&file, "x", &[]), Err(Error::Io(_))));
    }

    #[test]
    fn overlay_file_has_frame_dims() {
        let tmp = tempfile::tempdir().unwrap();
        let frame = RgbImage::new(30, 20);
        write_overlay(tmp.path(), "f", &frame, &[BoundingBox::new(1, 1, 5, 5)]).unwrap();
        let back = image::open(tmp.path().join("f.png")).unwrap().to_rgb8();
        assert_eq!(back.dimensions(), (30, 20));
        assert_eq!(*back.get_pixel(1, 1), OVERLAY_COLOR);
    }

    #[test]
    fn overlay_keeps_dims_and_draws_outline() {
        let frame = RgbImage::new(20, 10);
        let out = render_overlay(&frame, &[BoundingBox::new(2, 2, 4, 3), BoundingBox::new(15, 5, 10, 10)], OVERLAY_COLOR);
        assert_eq!(out.dimensions(), frame.dimensions());
        assert_eq!(*out.get_pixel(2, 2), OVERLAY_COLOR);
        assert_eq!(*out.get_pixel(5, 4), OVERLAY_COLOR);
        assert_eq!(*out.get_pixel(3, 3), Rgb([0, 0, 0]));
        assert_eq!(*out.get_pixel(19, 7), Rgb([0, 0, 0]));
        assert_eq!(*out.get_pixel(15, 9), OVERLAY_COLOR);
    }
}
