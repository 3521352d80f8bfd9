//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, no sections or nesting.
//! Unknown keys are rejected.

use std::path::PathBuf;

use crate::enhance::FusionMode;
use crate::error::{MflError, Result};
use crate::pipeline::{Method, PipelineConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub method: Method,
    pub seed: u64,
    pub dump_stages: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            method: Method::Adaptive,
            seed: 0,
            dump_stages: None,
            out: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "half_span",
    "image_height",
    "segment_length",
    "interpolation",
    "f_s_extreme",
    "v_extreme",
    "k_base",
    "alpha",
    "gamma",
    "sweep_step",
    "min_area_px",
    "max_foreground_fraction",
    "fusion_mode",
    "method",
    "seed",
    "dump_stages",
    "out",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(MflError::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let value = value.trim().trim_matches('"');
            cfg.set(key.trim(), value).map_err(|e| MflError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting; command-line overrides go through here too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .parse()
                .map_err(|_| MflError::InvalidConfig(format!("`{key}`: cannot parse `{value}`")))
        }
        let p = &mut self.pipeline;
        match key {
            "half_span" => p.preprocess.half_span = num(key, value)?,
            "image_height" => p.preprocess.image_height = num(key, value)?,
            "segment_length" => p.preprocess.segment_length = num(key, value)?,
            "interpolation" => {
                if value != "cubic_spline" {
                    return Err(MflError::InvalidConfig(format!(
                        "`interpolation`: only `cubic_spline` is supported, got `{value}`"
                    )));
                }
            }
            "f_s_extreme" => p.adaptive.f_s_extreme = num(key, value)?,
            "v_extreme" => p.adaptive.v_extreme = num(key, value)?,
            "k_base" => p.adaptive.k_base = num(key, value)?,
            "alpha" => p.adaptive.alpha = num(key, value)?,
            "gamma" => p.adaptive.gamma = num(key, value)?,
            "sweep_step" => p.localize.sweep_step = num(key, value)?,
            "min_area_px" => p.localize.min_area_px = num(key, value)?,
            "max_foreground_fraction" => p.localize.max_foreground_fraction = num(key, value)?,
            "fusion_mode" => p.fusion_mode = value.parse::<FusionMode>()?,
            "method" => self.method = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "dump_stages" => self.dump_stages = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            other => {
                return Err(MflError::InvalidConfig(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        p.adaptive.validate()?;
        if p.preprocess.half_span == 0 || p.preprocess.segment_length < 4 || p.preprocess.image_height < 4 {
            return Err(MflError::InvalidConfig(
                "half_span must be >= 1 and image dimensions >= 4".into(),
            ));
        }
        if !(p.localize.sweep_step > 0.0 && p.localize.sweep_step < 1.0) {
            return Err(MflError::InvalidConfig(format!(
                "sweep_step must lie in (0, 1), got {}",
                p.localize.sweep_step
            )));
        }
        let f = p.localize.max_foreground_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(MflError::InvalidConfig(format!(
                "max_foreground_fraction must lie in (0, 1], got {f}"
            )));
        }
        Ok(())
    }
}
