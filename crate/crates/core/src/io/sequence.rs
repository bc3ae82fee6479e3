use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::error::{Error, Result};

use super::annotations::{parse_annotations_with, AnnotationFormat, FrameAnnotation, PlainBoxFormat};

pub const IMAGES_DIR: &str = "images";
pub const ANNOTATIONS_DIR: &str = "annotations";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Order `frame_2` before `frame_10`. Off by default: frames are sorted
    /// by plain byte order of their file names.
    pub natural_sort: bool,
}

/// Frames and annotation files of one sequence directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub name: String,
    pub frame_paths: Vec<PathBuf>,
    /// One entry per frame when the sequence is fully annotated; empty when
    /// there is no annotations directory.
    pub annotation_paths: Vec<PathBuf>,
    pub width: u32,
    pub height: u32,
    pub frame_count: usize,
    /// Problems that do not prevent detection but block evaluation.
    pub warnings: Vec<String>,
}

impl SequenceManifest {
    pub fn has_annotations(&self) -> bool {
        !self.annotation_paths.is_empty()
    }

    /// Evaluation needs one annotation file per frame and no warnings.
    pub fn check_evaluable(&self) -> Result<()> {
        if !self.warnings.is_empty() {
            return Err(Error::Format(format!("{}: {}", self.name, self.warnings.join("; "))));
        }
        if self.annotation_paths.len() != self.frame_count {
            return Err(Error::Format(format!("{}: sequence has no annotations", self.name)));
        }
        Ok(())
    }

    /// File stem of each frame, used to name per-frame outputs.
    pub fn frame_stems(&self) -> Vec<String> {
        self.frame_paths.iter().map(|p| stem(p)).collect()
    }

    pub fn load_frame(&self, index: usize) -> Result<RgbImage> {
        let img = image::open(&self.frame_paths[index])?.to_rgb8();
        if img.dimensions() != (self.width, self.height) {
            return Err(Error::Format(format!(
                "{}: frame is {}x{}, sequence is {}x{}",
                self.frame_paths[index].display(),
                img.width(),
                img.height(),
                self.width,
                self.height
            )));
        }
        Ok(img)
    }

    pub fn load_annotations(&self) -> Result<Vec<FrameAnnotation>> {
        self.load_annotations_with(&PlainBoxFormat)
    }

    pub fn load_annotations_with(&self, format: &dyn AnnotationFormat) -> Result<Vec<FrameAnnotation>> {
        self.check_evaluable()?;
        self.annotation_paths
            .iter()
            .enumerate()
            .map(|(i, p)| parse_annotations_with(format, p, i))
            .collect()
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn is_frame(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Compares digit runs by numeric value and everything else bytewise.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].is_ascii_digit() && b[j].is_ascii_digit() {
            let (si, sj) = (i, j);
            while i < a.len() && a[i].is_ascii_digit() {
                i += 1;
            }
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            let na = trim_zeros(&a[si..i]);
            let nb = trim_zeros(&b[sj..j]);
            let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb));
            if ord != Ordering::Equal {
                return ord;
            }
        } else {
            if a[i] != b[j] {
                return a[i].cmp(&b[j]);
            }
            i += 1;
            j += 1;
        }
    }
    (a.len() - i).cmp(&(b.len() - j)).then_with(|| a.cmp(b))
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let k = d.iter().position(|&c| c != b'0').unwrap_or(d.len());
    &d[k..]
}

pub fn load_sequence(root: &Path) -> Result<SequenceManifest> {
    load_sequence_with(root, LoadOptions::default())
}

/// Scans `<root>/images` for PNG/JPEG frames and pairs each with
/// `<root>/annotations/<stem>.txt` when that directory exists.
pub fn load_sequence_with(root: &Path, options: LoadOptions) -> Result<SequenceManifest> {
    let images = root.join(IMAGES_DIR);
    if !images.is_dir() {
        return Err(Error::NotFound(images));
    }
    let mut frame_paths: Vec<PathBuf> = fs::read_dir(&images)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && is_frame(p))
        .collect();
    if frame_paths.is_empty() {
        return Err(Error::Format(format!("{}: no PNG or JPEG frames", images.display())));
    }
    let name_of = |p: &PathBuf| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if options.natural_sort {
        frame_paths.sort_by(|a, b| natural_cmp(&name_of(a), &name_of(b)));
    } else {
        frame_paths.sort_by_key(name_of);
    }

    let (width, height) = image::image_dimensions(&frame_paths[0])?;
    for p in &frame_paths[1..] {
        let dims = image::image_dimensions(p)?;
        if dims != (width, height) {
            return Err(Error::Format(format!(
                "{}: frame is {}x{}, first frame is {}x{}",
                p.display(),
                dims.0,
                dims.1,
                width,
                height
            )));
        }
    }

    let mut warnings = Vec::new();
    let mut annotation_paths = Vec::new();
    let ann_dir = root.join(ANNOTATIONS_DIR);
    if ann_dir.is_dir() {
        let candidates: Vec<PathBuf> = frame_paths.iter().map(|p| ann_dir.join(format!("{}.txt", stem(p)))).collect();
        let missing = candidates.iter().filter(|p| !p.is_file()).count();
        let present = fs::read_dir(&ann_dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
            .count();
        if missing > 0 {
            warnings.push(format!("{missing} of {} frames have no annotation file", frame_paths.len()));
        } else if present != frame_paths.len() {
            warnings.push(format!(
                "{present} annotation files for {} frames",
                frame_paths.len()
            ));
        }
        if missing == 0 {
            annotation_paths = candidates;
        }
    }

    let name = root
        .canonicalize()
        .ok()
        .as_deref()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string());
    Ok(SequenceManifest {
        name,
        frame_count: frame_paths.len(),
        frame_paths,
        annotation_paths,
        width,
        height,
        warnings,
    })
}
