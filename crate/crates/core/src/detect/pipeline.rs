use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_magnitude, magnitude_weights, DenseFlow, FlowParams};
use crate::foreground::{
    adaptive_threshold, fuse_sv, neighborhood_difference, threshold_mask, weighted_difference, ForegroundParams,
};
use crate::geometry::{BoundingBox, Homography};
use crate::imaging::{morph_open, rgb_to_sv};
use crate::model::{init_model, update_model, warp_model, BackgroundModel, DEFAULT_AGE_MAX};
use crate::plane::{BinaryMask, Plane};
use crate::registration::{register, ImagePyramid, RegistrationParams};

use super::{extract_boxes, inflate_and_merge};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub registration: RegistrationParams,
    pub flow: FlowParams,
    pub foreground: ForegroundParams,
    pub age_max: u16,
    pub morph_radius: usize,
    pub min_area: usize,
    pub margin: u32,
    /// When false the difference image is used unweighted.
    pub flow_weighting: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            registration: RegistrationParams::default(),
            flow: FlowParams::default(),
            foreground: ForegroundParams::default(),
            age_max: DEFAULT_AGE_MAX,
            morph_radius: 1,
            min_area: 5,
            margin: 5,
            flow_weighting: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.registration.lk.validate()?;
        self.registration.ransac.validate()?;
        if self.registration.grid_step == 0 {
            return Err(Error::InvalidParameter("grid_step must be positive".into()));
        }
        self.flow.validate()?;
        self.foreground.validate()?;
        if self.age_max == 0 || self.morph_radius == 0 || self.min_area == 0 {
            return Err(Error::InvalidParameter("age_max, morph_radius and min_area must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub a_bg: f64,
    pub inlier_ratio: f64,
    pub t_a: f64,
    /// False when registration failed and the identity was used instead.
    pub homography_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame_index: usize,
    pub boxes: Vec<BoundingBox>,
    pub diagnostics: Diagnostics,
}

/// Wall time spent in each stage of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub color: Duration,
    pub registration: Duration,
    pub model: Duration,
    pub difference: Duration,
    pub flow: Duration,
    pub mask: Duration,
    pub boxes: Duration,
}

impl StageTimings {
    pub const NAMES: [&'static str; 7] = ["color", "registration", "model", "difference", "flow", "mask", "boxes"];

    pub fn as_array(&self) -> [Duration; 7] {
        [
            self.color,
            self.registration,
            self.model,
            self.difference,
            self.flow,
            self.mask,
            self.boxes,
        ]
    }

    pub fn total(&self) -> Duration {
        self.as_array().iter().sum()
    }

    pub fn accumulate(&mut self, other: &StageTimings) {
        self.color += other.color;
        self.registration += other.registration;
        self.model += other.model;
        self.difference += other.difference;
        self.flow += other.flow;
        self.mask += other.mask;
        self.boxes += other.boxes;
    }
}

/// Intermediate planes of the last processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDebug {
    pub d: Plane<f32>,
    pub d_w: Plane<f32>,
    pub mask: BinaryMask,
}

/// Per-stream detector state. Frames must be fed in order and share one size.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    model: Option<BackgroundModel>,
    prev: Option<ImagePyramid>,
    flow: DenseFlow,
    frame_index: usize,
    timings: StageTimings,
    debug: Option<FrameDebug>,
    keep_debug: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            flow: DenseFlow::new(config.flow)?,
            config,
            model: None,
            prev: None,
            frame_index: 0,
            timings: StageTimings::default(),
            debug: None,
            keep_debug: false,
        })
    }

    /// Retain the difference planes and mask of each frame for inspection.
    pub fn keep_debug(mut self, on: bool) -> Self {
        self.keep_debug = on;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> Option<&BackgroundModel> {
        self.model.as_ref()
    }

    /// Number of frames processed so far.
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn last_timings(&self) -> &StageTimings {
        &self.timings
    }

    pub fn last_debug(&self) -> Option<&FrameDebug> {
        self.debug.as_ref()
    }

    pub fn process_frame(&mut self, frame: &RgbImage) -> Result<FrameDetections> {
        let mut t = StageTimings::default();
        let index = self.frame_index;

        let clock = Instant::now();
        let (s, v) = rgb_to_sv(frame)?;
        t.color = clock.elapsed();

        let (model, prev) = match (self.model.take(), self.prev.take()) {
            (Some(m), Some(p)) => (m, p),
            _ => {
                let clock = Instant::now();
                self.model = Some(init_model(&s, &v)?);
                t.model = clock.elapsed();
                let clock = Instant::now();
                self.prev = Some(ImagePyramid::build(v, self.config.registration.lk.levels)?);
                t.registration = clock.elapsed();
                self.finish(t, None);
                return Ok(FrameDetections {
                    frame_index: index,
                    boxes: Vec::new(),
                    diagnostics: Diagnostics {
                        a_bg: 0.0,
                        inlier_ratio: 0.0,
                        t_a: adaptive_threshold(&self.config.foreground, 0.0),
                        homography_ok: false,
                    },
                });
            }
        };
        if model.dims() != v.dims() {
            let expected = model.dims();
            self.model = Some(model);
            self.prev = Some(prev);
            return Err(Error::DimensionMismatch {
                expected,
                actual: v.dims(),
            });
        }

        let clock = Instant::now();
        let curr = ImagePyramid::build(v.clone(), self.config.registration.lk.levels)?;
        let mut reg_params = self.config.registration;
        reg_params.ransac.seed = reg_params.ransac.seed.wrapping_add(index as u64);
        let (h, a_bg, inlier_ratio, homography_ok) = match register(&prev, &curr, &reg_params) {
            Ok(r) => (r.h, r.a_bg, r.inlier_ratio, true),
            Err(
                Error::InsufficientPoints { .. }
                | Error::DegenerateGeometry
                | Error::UndefinedMotion
                | Error::SingularTransform { .. },
            ) => (Homography::identity(), 0.0, 0.0, false),
            Err(e) => return Err(e),
        };
        t.registration = clock.elapsed();

        let clock = Instant::now();
        let warped = warp_model(&model, &h)?;
        let updated = update_model(&warped, &s, &v, self.config.age_max)?;
        t.model = clock.elapsed();

        let clock = Instant::now();
        let d_s = neighborhood_difference(&s, &warped.mu_s)?;
        let d_v = neighborhood_difference(&v, &warped.mu_v)?;
        let d = fuse_sv(&d_s, &d_v)?;
        t.difference = clock.elapsed();

        let clock = Instant::now();
        let fg = &self.config.foreground;
        let d_w = if self.config.flow_weighting {
            let flow = self.flow.estimate(&updated.mu_v, &v)?;
            let w = magnitude_weights(&flow_magnitude(&flow), fg.t_mag, fg.w_cap)?;
            weighted_difference(&d, &w)?
        } else {
            d.clone()
        };
        t.flow = clock.elapsed();

        let clock = Instant::now();
        let t_a = adaptive_threshold(fg, a_bg);
        let raw = threshold_mask(&d_w, t_a, &updated.age, fg.t_age)?;
        let mask = morph_open(&raw, self.config.morph_radius)?;
        t.mask = clock.elapsed();

        let clock = Instant::now();
        let boxes = inflate_and_merge(
            &extract_boxes(&mask, self.config.min_area),
            self.config.margin,
            Some(v.dims()),
        );
        t.boxes = clock.elapsed();

        self.model = Some(updated);
        self.prev = Some(curr);
        let debug = self.keep_debug.then_some(FrameDebug { d, d_w, mask });
        self.finish(t, debug);
        Ok(FrameDetections {
            frame_index: index,
            boxes,
            diagnostics: Diagnostics {
                a_bg,
                inlier_ratio,
                t_a,
                homography_ok,
            },
        })
    }

    fn finish(&mut self, timings: StageTimings, debug: Option<FrameDebug>) {
        self.timings = timings;
        self.debug = debug;
        self.frame_index += 1;
    }
}
