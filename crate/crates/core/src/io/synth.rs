//! Deterministic synthetic sequences: a value-noise background seen through
//! a scripted camera, with rectangular sprites at exactly known positions.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Homography};

use super::sequence::{ANNOTATIONS_DIR, IMAGES_DIR};
use super::writer::write_frame_boxes;

const LATTICE: usize = 256;

/// Per-frame motion of the background content in image coordinates: a
/// rotation by `rotation` radians and scaling by `zoom` about the frame
/// centre, then a `(tx, ty)` translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraMotion {
    pub tx: f64,
    pub ty: f64,
    pub rotation: f64,
    pub zoom: f64,
}

impl Default for CameraMotion {
    fn default() -> Self {
        Self {
            tx: 0.0,
            ty: 0.0,
            rotation: 0.0,
            zoom: 1.0,
        }
    }
}

/// One value-noise layer: lattice spacing in pixels and peak amplitude in
/// intensity levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Octave {
    pub cell: f64,
    pub amplitude: f32,
}

/// Axis-aligned solid rectangle moving at constant velocity in image
/// coordinates. Its top-left corner in frame `t` is
/// `round(x + t·vx), round(y + t·vy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpriteConfig {
    pub x: f64,
    pub y: f64,
    pub w: u32,
    pub h: u32,
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    pub frame_count: usize,
    pub seed: u64,
    /// Mean background intensity.
    pub base: f32,
    pub octaves: Vec<Octave>,
    /// Standard deviation of per-pixel Gaussian noise, intensity levels.
    pub noise_sigma: f32,
    pub camera: CameraMotion,
    pub sprites: Vec<SpriteConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 360,
            frame_count: 200,
            seed: 1,
            base: 128.0,
            octaves: vec![
                Octave { cell: 53.0, amplitude: 48.0 },
                Octave { cell: 23.0, amplitude: 24.0 },
                Octave { cell: 11.0, amplitude: 10.0 },
            ],
            noise_sigma: 0.0,
            camera: CameraMotion::default(),
            sprites: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 || self.frame_count == 0 {
            return bad("width, height and frame_count must be positive".into());
        }
        if self.octaves.iter().any(|o| !(o.cell > 0.0) || !o.amplitude.is_finite()) {
            return bad("octave cells must be positive and amplitudes finite".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(self.camera.zoom > 0.0) {
            return bad(format!("camera zoom must be positive, got {}", self.camera.zoom));
        }
        for (k, s) in self.sprites.iter().enumerate() {
            if s.w == 0 || s.h == 0 {
                return bad(format!("sprite {k} has zero size"));
            }
            for t in [0, self.frame_count - 1] {
                let b = sprite_box(s, t);
                if b.x < 0 || b.y < 0 || b.right() > self.width as i64 || b.bottom() > self.height as i64 {
                    return bad(format!("sprite {k} leaves the {}x{} frame at frame {t}", self.width, self.height));
                }
            }
        }
        Ok(())
    }
}

fn sprite_box(s: &SpriteConfig, t: usize) -> BoundingBox {
    let x = (s.x + t as f64 * s.vx).round() as i32;
    let y = (s.y + t as f64 * s.vy).round() as i32;
    BoundingBox::new(x, y, s.w, s.h)
}

struct ValueNoise {
    cell: f64,
    amplitude: f32,
    lattice: Vec<f32>,
}

impl ValueNoise {
    fn new(octave: &Octave, rng: &mut ChaCha8Rng) -> Self {
        Self {
            cell: octave.cell,
            amplitude: octave.amplitude,
            lattice: (0..LATTICE * LATTICE).map(|_| rng.random_range(-1.0f32..=1.0)).collect(),
        }
    }

    #[inline]
    fn at(&self, u: f64, v: f64) -> f32 {
        let (u, v) = (u / self.cell, v / self.cell);
        let (fu, fv) = (u.floor(), v.floor());
        let (tu, tv) = (smooth((u - fu) as f32), smooth((v - fv) as f32));
        let wrap = |i: f64| (i as i64).rem_euclid(LATTICE as i64) as usize;
        let (i0, j0) = (wrap(fu), wrap(fv));
        let (i1, j1) = ((i0 + 1) % LATTICE, (j0 + 1) % LATTICE);
        let l = &self.lattice;
        let top = l[j0 * LATTICE + i0] + tu * (l[j0 * LATTICE + i1] - l[j0 * LATTICE + i0]);
        let bottom = l[j1 * LATTICE + i0] + tu * (l[j1 * LATTICE + i1] - l[j1 * LATTICE + i0]);
        self.amplitude * (top + tv * (bottom - top))
    }
}

#[inline]
fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Frames on demand; `frame(t)` is a pure function of the config and `t`.
pub struct SynthGenerator {
    config: SynthConfig,
    layers: Vec<ValueNoise>,
    step: Homography,
}

/// A rendered sequence with one ground-truth box list per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub frames: Vec<RgbImage>,
    pub annotations: Vec<Vec<BoundingBox>>,
}

impl SynthGenerator {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config.octaves.iter().map(|o| ValueNoise::new(o, &mut rng)).collect();
        let c = config.camera;
        let step = Homography::similarity(
            c.rotation,
            c.zoom,
            config.width as f64 / 2.0,
            config.height as f64 / 2.0,
            c.tx,
            c.ty,
        )?;
        Ok(Self { config, layers, step })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn frame_count(&self) -> usize {
        self.config.frame_count
    }

    /// Camera transform taking frame-0 coordinates to frame-`t` coordinates.
    pub fn camera_at(&self, t: usize) -> Result<Homography> {
        let mut m = Homography::identity();
        for _ in 0..t {
            m = self.step.compose(&m)?;
        }
        Ok(m)
    }

    pub fn ground_truth(&self, t: usize) -> Vec<BoundingBox> {
        self.config.sprites.iter().map(|s| sprite_box(s, t)).collect()
    }

    /// Background intensity at a frame-0 location, before quantization.
    pub fn background_at(&self, u: f64, v: f64) -> f32 {
        self.config.base + self.layers.iter().map(|l| l.at(u, v)).sum::<f32>()
    }

    pub fn frame(&self, t: usize) -> Result<(RgbImage, Vec<BoundingBox>)> {
        if t >= self.config.frame_count {
            return Err(Error::InvalidParameter(format!("frame {t} out of range")));
        }
        let (w, h) = (self.config.width, self.config.height);
        let to_world = self.camera_at(t)?.inverse()?;
        let m = *to_world.matrix();
        let noise = if self.config.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(t as u64 + 1);
            let normal = Normal::new(0.0f32, self.config.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
            Some((rng, normal))
        } else {
            None
        };
        let mut noise = noise;

        let mut img = RgbImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = (x as f64, y as f64);
                let q = m[(2, 0)] * xf + m[(2, 1)] * yf + m[(2, 2)];
                let u = (m[(0, 0)] * xf + m[(0, 1)] * yf + m[(0, 2)]) / q;
                let v = (m[(1, 0)] * xf + m[(1, 1)] * yf + m[(1, 2)]) / q;
                let mut value = self.background_at(u, v);
                if let Some((rng, normal)) = noise.as_mut() {
                    value += normal.sample(rng);
                }
                let g = value.round().clamp(0.0, 255.0) as u8;
                img.put_pixel(x, y, Rgb([g, g, g]));
            }
        }

        let boxes = self.ground_truth(t);
        for (s, b) in self.config.sprites.iter().zip(&boxes) {
            for y in b.y as u32..b.bottom() as u32 {
                for x in b.x as u32..b.right() as u32 {
                    img.put_pixel(x, y, Rgb(s.color));
                }
            }
        }
        Ok((img, boxes))
    }
}

/// Renders every frame of `config`.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthSequence> {
    let generator = SynthGenerator::new(config.clone())?;
    let mut frames = Vec::with_capacity(config.frame_count);
    let mut annotations = Vec::with_capacity(config.frame_count);
    for t in 0..config.frame_count {
        let (img, boxes) = generator.frame(t)?;
        frames.push(img);
        annotations.push(boxes);
    }
    Ok(SynthSequence { frames, annotations })
}

/// File stem of synthetic frame `t`.
pub fn synth_stem(t: usize) -> String {
    format!("frame_{t:05}")
}

/// Writes `images/frame_NNNNN.png` and `annotations/frame_NNNNN.txt` under
/// `dir`, streaming one frame at a time.
pub fn write_synth_sequence(config: &SynthConfig, dir: &Path) -> Result<()> {
    let generator = SynthGenerator::new(config.clone())?;
    let images = dir.join(IMAGES_DIR);
    let annotations = dir.join(ANNOTATIONS_DIR);
    std::fs::create_dir_all(&images)?;
    for t in 0..config.frame_count {
        let (img, boxes) = generator.frame(t)?;
        let stem = synth_stem(t);
        img.save(images.join(format!("{stem}.png")))?;
        write_frame_boxes(&annotations, &stem, &boxes)?;
    }
    Ok(())
}
