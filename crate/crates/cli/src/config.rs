//! Flat run configuration: every tunable of the pipeline, the evaluator and
//! the loader under one `key = value` namespace.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use movdet_core::detect::PipelineConfig;
use movdet_core::flow::FlowParams;
use movdet_core::foreground::ForegroundParams;
use movdet_core::io::LoadOptions;
use movdet_core::registration::{LkParams, RansacParams, RegistrationParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid_step: usize,
    pub lk_window: usize,
    pub lk_levels: usize,
    pub lk_max_iterations: usize,
    pub lk_epsilon: f64,
    pub lk_min_eigenvalue: f64,
    pub ransac_threshold: f64,
    pub ransac_max_iterations: usize,
    pub ransac_confidence: f64,
    pub seed: u64,
    pub flow_weighting: bool,
    pub flow_pyr_scale: f64,
    pub flow_levels: usize,
    pub flow_window: usize,
    pub flow_iterations: usize,
    pub flow_poly_n: usize,
    pub flow_poly_sigma: f64,
    pub t_base: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub t_age: u16,
    pub age_max: u16,
    pub t_mag: f64,
    pub w_cap: f64,
    pub morph_radius: usize,
    pub min_area: usize,
    pub margin: u32,
    pub tau: f64,
    pub skip_frames: usize,
    pub natural_sort: bool,
}

/// Where a default value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// A reference constant of the method.
    Reference,
    /// An implementation choice.
    Chosen,
}

/// Every key with its origin and a one-line description, in file order.
pub const KEYS: &[(&str, Origin, &str)] = &[
    ("grid_step", Origin::Chosen, "spacing of tracked grid points, px"),
    ("lk_window", Origin::Chosen, "Lucas-Kanade window side, px (odd)"),
    ("lk_levels", Origin::Chosen, "Lucas-Kanade pyramid levels"),
    ("lk_max_iterations", Origin::Chosen, "Lucas-Kanade iterations per level"),
    ("lk_epsilon", Origin::Chosen, "Lucas-Kanade convergence step, px"),
    ("lk_min_eigenvalue", Origin::Chosen, "minimum normalised gradient eigenvalue"),
    ("ransac_threshold", Origin::Chosen, "RANSAC inlier reprojection error, px"),
    ("ransac_max_iterations", Origin::Chosen, "RANSAC iteration cap"),
    ("ransac_confidence", Origin::Chosen, "RANSAC early-stop confidence"),
    ("seed", Origin::Chosen, "RANSAC seed (frame index is added per frame)"),
    ("flow_weighting", Origin::Reference, "weight the difference by dense-flow magnitude"),
    ("flow_pyr_scale", Origin::Chosen, "dense-flow pyramid scale"),
    ("flow_levels", Origin::Chosen, "dense-flow pyramid levels"),
    ("flow_window", Origin::Chosen, "dense-flow averaging window, px"),
    ("flow_iterations", Origin::Chosen, "dense-flow iterations per level"),
    ("flow_poly_n", Origin::Chosen, "polynomial expansion radius, px"),
    ("flow_poly_sigma", Origin::Chosen, "polynomial expansion Gaussian sigma"),
    ("t_base", Origin::Reference, "base threshold T"),
    ("lambda1", Origin::Reference, "threshold scale lambda1"),
    ("lambda2", Origin::Reference, "threshold growth lambda2 per px/frame of motion"),
    ("t_age", Origin::Reference, "minimum pixel age for detection, frames"),
    ("age_max", Origin::Reference, "age cap, sets the minimum learning rate 1/age_max"),
    ("t_mag", Origin::Reference, "flow magnitude above which differences are amplified, px/frame"),
    ("w_cap", Origin::Chosen, "largest flow weight"),
    ("morph_radius", Origin::Chosen, "opening radius, px"),
    ("min_area", Origin::Reference, "components must have more pixels than this"),
    ("margin", Origin::Chosen, "box enlargement before merging, px"),
    ("tau", Origin::Reference, "overlap ratio (intersection / GT area) for a match"),
    ("skip_frames", Origin::Chosen, "frames excluded from evaluation at the start of each sequence"),
    ("natural_sort", Origin::Chosen, "order frames numerically (frame_2 before frame_10)"),
];

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        let (lk, ransac, flow, fg) = (p.registration.lk, p.registration.ransac, p.flow, p.foreground);
        Self {
            grid_step: p.registration.grid_step,
            lk_window: lk.window,
            lk_levels: lk.levels,
            lk_max_iterations: lk.max_iterations,
            lk_epsilon: short(lk.epsilon),
            lk_min_eigenvalue: short(lk.min_eigenvalue),
            ransac_threshold: ransac.reproj_threshold,
            ransac_max_iterations: ransac.max_iterations,
            ransac_confidence: ransac.confidence,
            seed: ransac.seed,
            flow_weighting: p.flow_weighting,
            flow_pyr_scale: short(flow.pyr_scale),
            flow_levels: flow.levels,
            flow_window: flow.window,
            flow_iterations: flow.iterations,
            flow_poly_n: flow.poly_n,
            flow_poly_sigma: short(flow.poly_sigma),
            t_base: short(fg.t_base),
            lambda1: short(fg.lambda1),
            lambda2: short(fg.lambda2),
            t_age: fg.t_age,
            age_max: p.age_max,
            t_mag: short(fg.t_mag),
            w_cap: short(fg.w_cap),
            morph_radius: p.morph_radius,
            min_area: p.min_area,
            margin: p.margin,
            tau: movdet_core::eval::DEFAULT_TAU,
            skip_frames: 0,
            natural_sort: false,
        }
    }
}

/// Shortest decimal that reads back as the same `f32`, widened to `f64`.
fn short(v: f32) -> f64 {
    v.to_string().parse().expect("formatted f32 parses")
}

impl RunConfig {
    /// Defaults, then the optional config file, then `key=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
            let key = key.trim();
            if !KEYS.iter().any(|(k, ..)| *k == key) {
                return Err(CliError::Usage(format!("unknown configuration key {key:?}")));
            }
            table.insert(key.to_string(), parse_value(value.trim()));
        }
        let config: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Data(e.to_string().trim().to_string()))?;
        config.pipeline()?;
        if !(config.tau > 0.0 && config.tau <= 1.0) {
            return Err(CliError::Data(format!("tau must be in (0, 1], got {}", config.tau)));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serialises")
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let config = PipelineConfig {
            registration: RegistrationParams {
                grid_step: self.grid_step,
                lk: LkParams {
                    window: self.lk_window,
                    levels: self.lk_levels,
                    max_iterations: self.lk_max_iterations,
                    epsilon: self.lk_epsilon as f32,
                    min_eigenvalue: self.lk_min_eigenvalue as f32,
                },
                ransac: RansacParams {
                    reproj_threshold: self.ransac_threshold,
                    max_iterations: self.ransac_max_iterations,
                    confidence: self.ransac_confidence,
                    seed: self.seed,
                },
            },
            flow: FlowParams {
                pyr_scale: self.flow_pyr_scale as f32,
                levels: self.flow_levels,
                window: self.flow_window,
                iterations: self.flow_iterations,
                poly_n: self.flow_poly_n,
                poly_sigma: self.flow_poly_sigma as f32,
            },
            foreground: ForegroundParams {
                t_base: self.t_base as f32,
                lambda1: self.lambda1 as f32,
                lambda2: self.lambda2 as f32,
                t_age: self.t_age,
                t_mag: self.t_mag as f32,
                w_cap: self.w_cap as f32,
            },
            age_max: self.age_max,
            morph_radius: self.morph_radius,
            min_area: self.min_area,
            margin: self.margin,
            flow_weighting: self.flow_weighting,
        };
        config.validate().map_err(|e| CliError::Data(e.to_string()))?;
        Ok(config)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            natural_sort: self.natural_sort,
        }
    }
}

/// A TOML literal when `raw` is one, otherwise the raw text as a string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Table of every key with its default, shown under each command's help.
pub fn help_text() -> String {
    let defaults = toml::Table::try_from(RunConfig::default()).expect("flat config serialises");
    let mut out = String::from(
        "Configuration keys (set in a --config TOML file or with --set KEY=VALUE;\n\
         overrides win over the file, the file wins over defaults).\n\
         'reference' marks reference constants of the method, 'chosen' marks implementation defaults.\n\n",
    );
    for (key, origin, about) in KEYS {
        let value = defaults.get(*key).map(ToString::to_string).unwrap_or_default();
        let origin = match origin {
            Origin::Reference => "reference",
            Origin::Chosen => "chosen",
        };
        let _ = writeln!(out, "  {key:<22} {value:<8} {origin:<10} {about}");
    }
    out
}
