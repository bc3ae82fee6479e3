use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Boxes annotated (or detected) in one frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameAnnotation {
    pub frame_index: usize,
    pub boxes: Vec<BoundingBox>,
}

/// A text encoding of per-frame box lists.
pub trait AnnotationFormat {
    /// File extension without the dot.
    fn extension(&self) -> &str;

    /// `path` is used for error messages only.
    fn parse(&self, text: &str, path: &Path) -> Result<Vec<BoundingBox>>;

    fn render(&self, boxes: &[BoundingBox]) -> String;
}

/// One box per line as four whitespace-separated integers `x y w h`. Blank
/// lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainBoxFormat;

impl AnnotationFormat for PlainBoxFormat {
    fn extension(&self) -> &str {
        "txt"
    }

    fn parse(&self, text: &str, path: &Path) -> Result<Vec<BoundingBox>> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut boxes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(i + 1, format!("expected 4 fields \"x y w h\", found {}", fields.len())));
            }
            let mut v = [0i64; 4];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| err(i + 1, format!("not an integer: {f:?}")))?;
            }
            let [x, y, w, h] = v;
            if w <= 0 || h <= 0 {
                return Err(err(i + 1, format!("width and height must be positive, got {w}x{h}")));
            }
            let fits = |v: i64| i32::try_from(v).is_ok();
            if !(fits(x) && fits(y) && u32::try_from(w).is_ok() && u32::try_from(h).is_ok()) {
                return Err(err(i + 1, "value out of range".into()));
            }
            boxes.push(BoundingBox::new(x as i32, y as i32, w as u32, h as u32));
        }
        Ok(boxes)
    }

    fn render(&self, boxes: &[BoundingBox]) -> String {
        boxes.iter().map(|b| format!("{b}\n")).collect()
    }
}

/// Reads one annotation file in the plain format.
pub fn parse_annotations(path: &Path, frame_index: usize) -> Result<FrameAnnotation> {
    parse_annotations_with(&PlainBoxFormat, path, frame_index)
}

pub fn parse_annotations_with(
    format: &dyn AnnotationFormat,
    path: &Path,
    frame_index: usize,
) -> Result<FrameAnnotation> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(FrameAnnotation {
        frame_index,
        boxes: format.parse(&text, path)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Vec<BoundingBox>> {
        PlainBoxFormat.parse(text, Path::new("a.txt"))
    }

    #[test]
    fn parses_boxes_comments_and_blanks() {
        assert_eq!(parse("10 20 30 40").unwrap(), vec![BoundingBox::new(10, 20, 30, 40)]);
        assert!(parse("").unwrap().is_empty());
        let text = "# header\n\n  1 2 3 4  \n-5 -6 7 8\n";
        assert_eq!(
            parse(text).unwrap(),
            vec![BoundingBox::new(1, 2, 3, 4), BoundingBox::new(-5, -6, 7, 8)]
        );
    }

    #[test]
    fn reports_line_numbers() {
        match parse("10 20 30") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse("1 2 3 4\n\n1 2 x 4") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("1 2 -3 4"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 2 0 4"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_file_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_annotations(&dir.path().join("nope.txt"), 0),
            Err(Error::NotFound(_))
        ));
    }

    proptest! {
        #[test]
        fn render_then_parse_round_trips(
            raw in prop::collection::vec((-1000i32..1000, -1000i32..1000, 1u32..500, 1u32..500), 0..20),
        ) {
            let boxes: Vec<BoundingBox> = raw.into_iter().map(|(x, y, w, h)| BoundingBox::new(x, y, w, h)).collect();
            prop_assert_eq!(parse(&PlainBoxFormat.render(&boxes)).unwrap(), boxes);
        }
    }
}
