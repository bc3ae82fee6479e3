//! Per-frame orchestration and conversion of foreground masks into merged
//! bounding boxes.

mod boxes;
mod pipeline;

pub use boxes::{extract_boxes, inflate_and_merge};
pub use pipeline::{Diagnostics, FrameDebug, FrameDetections, Pipeline, PipelineConfig, StageTimings};
