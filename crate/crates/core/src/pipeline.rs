//! End-to-end detection on one record: preprocessing, pyramid matching,
//! enhancement, fusion and localization.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::enhance::{envelope, fuse, gamma_enhance, FusedImage, FusionMode};
use crate::error::{MflError, Result};
use crate::ingest::{preprocess, MflImage, MflRecord, PreprocessConfig};
use crate::localize::{
    adaptive_threshold, binarize, extract_components, BinaryImage, Detection, LocalizeConfig,
    SegmentFrame, ThresholdScan,
};
use crate::matrix::Matrix;
use crate::pyramid::{build_pyramid, build_template, match_template, PYRAMID_LEVELS};
use crate::scalar::Real;
use crate::ssr::{AdaptiveConfig, SsrContext};

/// Which variant of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Layer 1 only, base kernel, no fusion.
    SingleScale,
    /// All layers with the adapted kernel, flat sum with equal weights.
    UnweightedMultiscale,
    /// Adapted kernel and SSR-driven layer weights.
    Adaptive,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SingleScale, Method::UnweightedMultiscale, Method::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SingleScale => "single_scale",
            Method::UnweightedMultiscale => "unweighted_multiscale",
            Method::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = MflError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single_scale" => Ok(Method::SingleScale),
            "unweighted" | "unweighted_multiscale" => Ok(Method::UnweightedMultiscale),
            "adaptive" => Ok(Method::Adaptive),
            other => Err(MflError::InvalidConfig(format!(
                "method must be single, unweighted or adaptive, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub adaptive: AdaptiveConfig,
    pub localize: LocalizeConfig,
    pub fusion_mode: FusionMode,
}

/// Kernel size, layer weights and fusion mode actually used for a method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodPlan {
    pub kernel_size: usize,
    pub levels: usize,
    pub weights: [f64; 3],
    pub fusion_mode: FusionMode,
}

impl MethodPlan {
    pub fn new(method: Method, ctx: &SsrContext, cfg: &PipelineConfig) -> Self {
        match method {
            Method::SingleScale => Self {
                kernel_size: cfg.adaptive.k_base,
                levels: 1,
                weights: [1.0, 0.0, 0.0],
                fusion_mode: FusionMode::Recursive,
            },
            Method::UnweightedMultiscale => Self {
                kernel_size: ctx.kernel_size,
                levels: PYRAMID_LEVELS,
                weights: [1.0 / 3.0; 3],
                fusion_mode: FusionMode::Flat,
            },
            Method::Adaptive => Self {
                kernel_size: ctx.kernel_size,
                levels: PYRAMID_LEVELS,
                weights: ctx.weights,
                fusion_mode: cfg.fusion_mode,
            },
        }
    }
}

/// Every intermediate image of one segment, for inspection and dumps.
#[derive(Debug, Clone)]
pub struct SegmentStages<T> {
    pub segment_index: usize,
    pub layers: Vec<Matrix<T>>,
    pub responses: Vec<Matrix<T>>,
    pub envelopes: Vec<Matrix<T>>,
    pub fused: FusedImage<T>,
    pub scan: ThresholdScan,
    pub binary: BinaryImage,
}

#[derive(Debug, Clone)]
pub struct SegmentOutcome<T> {
    pub detections: Vec<Detection>,
    pub stages: Option<SegmentStages<T>>,
}

/// Detections for a whole record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordDetections {
    pub record: String,
    pub f_spatial: f64,
    pub mu: f64,
    #[serde(rename = "K_a")]
    pub kernel_size: usize,
    pub method: Method,
    pub segments: usize,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self { config }
    }

    pub fn context<T: Real>(&self, record: &MflRecord<T>) -> Result<SsrContext> {
        SsrContext::new(record.sampling_rate_hz, record.inspection_speed_mps, &self.config.adaptive)
    }

    pub fn detect<T: Real>(&self, record: &MflRecord<T>, method: Method) -> Result<RecordDetections> {
        let (out, _) = self.run(record, method, false)?;
        Ok(out)
    }

    /// Runs the pipeline and keeps every intermediate image.
    pub fn detect_with_stages<T: Real>(
        &self,
        record: &MflRecord<T>,
        method: Method,
    ) -> Result<(RecordDetections, Vec<SegmentStages<T>>)> {
        self.run(record, method, true)
    }

    fn run<T: Real>(
        &self,
        record: &MflRecord<T>,
        method: Method,
        keep_stages: bool,
    ) -> Result<(RecordDetections, Vec<SegmentStages<T>>)> {
        let ctx = self.context(record)?;
        let images = preprocess(record, &self.config.preprocess)?;
        let plan = MethodPlan::new(method, &ctx, &self.config);
        let mut detections = Vec::new();
        let mut stages = Vec::new();
        for img in &images {
            let outcome = self.process_segment(img, &ctx, &plan, keep_stages)?;
            detections.extend(outcome.detections);
            stages.extend(outcome.stages);
        }
        Ok((
            RecordDetections {
                record: record.label.clone(),
                f_spatial: ctx.f_spatial,
                mu: ctx.mu,
                kernel_size: plan.kernel_size,
                method,
                segments: images.len(),
                detections,
            },
            stages,
        ))
    }

    /// Runs matching through localization on one segment image.
    pub fn process_segment<T: Real>(
        &self,
        img: &MflImage<T>,
        ctx: &SsrContext,
        plan: &MethodPlan,
        keep_stages: bool,
    ) -> Result<SegmentOutcome<T>> {
        let gamma = T::lit(self.config.adaptive.gamma);
        let template = build_template::<T>(plan.kernel_size)?;

        let layers: Vec<Matrix<T>> = if plan.levels == 1 {
            vec![img.pixels.clone()]
        } else {
            build_pyramid(img)?.layers.into_iter().collect()
        };

        let mut responses = Vec::new();
        let mut envelopes = Vec::with_capacity(layers.len());
        for layer in &layers {
            let response = match_template(layer, &template)?;
            envelopes.push(envelope(&gamma_enhance(&response, gamma)));
            if keep_stages {
                responses.push(response);
            }
        }

        let weights = plan.weights.map(T::lit);
        let fused = if envelopes.len() == 1 {
            FusedImage {
                pixels: envelopes[0].clone(),
                weights_used: weights,
            }
        } else {
            fuse([&envelopes[0], &envelopes[1], &envelopes[2]], weights, plan.fusion_mode)?
        };

        let scan = adaptive_threshold(&fused, &self.config.localize);
        let frame = SegmentFrame {
            segment_index: img.segment_index,
            origin_sample: img.origin_sample,
            f_spatial: ctx.f_spatial,
        };
        let binary = if scan.is_empty() {
            Matrix::filled(fused.pixels.rows(), fused.pixels.cols(), 0u8)
        } else {
            binarize(&fused, scan.chosen_threshold)
        };
        let detections = extract_components(&binary, &fused.pixels, self.config.localize.min_area_px, &frame);

        let stages = keep_stages.then_some(SegmentStages {
            segment_index: img.segment_index,
            layers,
            responses,
            envelopes,
            fused,
            scan,
            binary,
        });
        Ok(SegmentOutcome { detections, stages })
    }
}
