//! Flaw localization in steel wire ropes from multi-channel magnetic flux
//! leakage (MFL) records.
//!
//! The pipeline turns a raw `M x N` record (axial samples by Hall channels)
//! into located flaw regions:
//!
//! 1. [`ingest`]: detrend, normalize to `[-1, 1]`, spline-interpolate around
//!    the sensor ring and cut into `H x P` images.
//! 2. [`ssr`]: derive the spatial sampling resolution `f_s / v` and from it
//!    the template size and pyramid layer weights.
//! 3. [`pyramid`]: three-layer average pyramid, dark-then-bright template
//!    matching on every layer.
//! 4. [`enhance`]: gamma contrast, axial envelopes, weighted fusion back to
//!    full resolution.
//! 5. [`localize`]: threshold sweep, binarization, connected components.
//!
//! [`synth`] produces records with planted flaws and [`evaluate`] scores
//! detections against them.
//!
//! Image kernels are generic over [`Real`] (`f32` or `f64`); the aliases below
//! pin the common instantiations.
//!
//! ```
//! use mfl_core::{synth, Method, Pipeline};
//!
//! let spec = synth::scenario_spec("optimal_ssr", 3).unwrap();
//! let (record, truths) = synth::generate(&spec).unwrap();
//! let found = Pipeline::default().detect(&record, Method::Adaptive).unwrap();
//! assert_eq!(truths.len(), 4);
//! assert!(!found.detections.is_empty());
//! ```

pub mod config;
pub mod enhance;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod ingest;
pub mod localize;
pub mod matrix;
pub mod pipeline;
pub mod pyramid;
pub mod scalar;
pub mod ssr;
pub mod synth;

pub use config::RunConfig;
pub use enhance::{FusedImage, FusionMode};
pub use error::{MflError, Result};
pub use evaluate::{match_detections, run_ablation, score, Counts, EvalReport, LabeledRecord, Metrics};
pub use ingest::{MflImage, MflRecord, PreprocessConfig};
pub use localize::{Detection, LocalizeConfig, ThresholdScan};
pub use matrix::Matrix;
pub use pipeline::{Method, Pipeline, PipelineConfig, RecordDetections};
pub use pyramid::{FlawTemplate, ImagePyramid};
pub use scalar::Real;
pub use ssr::{AdaptiveConfig, SsrContext};
pub use synth::{GroundTruthFlaw, SynthSpec};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type MflRecord64 = MflRecord<f64>;
pub type MflRecord32 = MflRecord<f32>;
pub type MflImage64 = MflImage<f64>;
pub type MflImage32 = MflImage<f32>;
pub type FusedImage64 = FusedImage<f64>;
pub type FusedImage32 = FusedImage<f32>;
pub type FlawTemplate64 = FlawTemplate<f64>;
pub type FlawTemplate32 = FlawTemplate<f32>;
pub type ImagePyramid64 = ImagePyramid<f64>;
pub type ImagePyramid32 = ImagePyramid<f32>;
