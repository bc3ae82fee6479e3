//! Sequence directories, annotation files, detection writers and the
//! synthetic sequence generator.
//!
//! A sequence lives in `<seq>/images/*.{png,jpg}` with optional ground truth
//! in `<seq>/annotations/<frame stem>.txt`.

mod annotations;
mod sequence;
mod synth;
mod writer;

pub use annotations::{parse_annotations, parse_annotations_with, AnnotationFormat, FrameAnnotation, PlainBoxFormat};
pub use sequence::{
    load_sequence, load_sequence_with, natural_cmp, LoadOptions, SequenceManifest, ANNOTATIONS_DIR, IMAGES_DIR,
};
pub use synth::{
    synth_generate, synth_stem, write_synth_sequence, CameraMotion, Octave, SpriteConfig, SynthConfig,
    SynthGenerator, SynthSequence,
};
pub use writer::{render_overlay, write_detections, write_frame_boxes, write_overlay, OVERLAY_COLOR};
