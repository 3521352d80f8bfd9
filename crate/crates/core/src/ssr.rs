//! Spatial sampling resolution (samples per meter of rope) and everything
//! derived from it: the normalized resolution, the adapted kernel size and
//! the pyramid layer weights.

use serde::Serialize;

use crate::error::{MflError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// Sampling rate of the extreme (lowest-resolution) reference condition.
    pub f_s_extreme: f64,
    /// Speed of the extreme reference condition.
    pub v_extreme: f64,
    pub k_base: usize,
    /// Sensitivity of the kernel size to the normalized resolution.
    pub alpha: f64,
    /// Gamma exponent applied to normalized template responses.
    pub gamma: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            f_s_extreme: 250.0,
            v_extreme: 1.5,
            k_base: 5,
            alpha: 5.0,
            gamma: 2.0,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        positive("f_s_extreme", self.f_s_extreme)?;
        positive("v_extreme", self.v_extreme)?;
        positive("alpha", self.alpha)?;
        positive("gamma", self.gamma)?;
        if self.k_base < 2 {
            return Err(MflError::InvalidConfig(format!(
                "k_base must be >= 2, got {}",
                self.k_base
            )));
        }
        Ok(())
    }

    pub fn extreme_ssr(&self) -> f64 {
        self.f_s_extreme / self.v_extreme
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MflError::NonPositiveInput { name, value })
    }
}

fn positive_t<T: Real>(name: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(MflError::NonPositiveInput {
            name,
            value: value.as_f64(),
        })
    }
}

/// Samples per meter: `f_s / v`.
pub fn compute_ssr<T: Real>(f_s: T, v: T) -> Result<T> {
    positive_t("sampling_rate_hz", f_s)?;
    positive_t("inspection_speed_mps", v)?;
    Ok(f_s / v)
}

/// Ratio of the extreme reference resolution to `f_spatial`, clamped to `(0, 1]`.
///
/// Scans denser than the extreme reference give a raw ratio below one and
/// engage the adaptive mechanism; sparser scans clamp to one.
pub fn normalize_ssr<T: Real>(f_spatial: T, cfg: &AdaptiveConfig) -> Result<T> {
    positive_t("f_spatial", f_spatial)?;
    let raw = T::lit(cfg.extreme_ssr()) / f_spatial;
    Ok(raw.min(T::one()))
}

/// `ceil(K_base + alpha * (1 - mu))`
pub fn adaptive_kernel_size<T: Real>(mu: T, cfg: &AdaptiveConfig) -> usize {
    let mu = mu.max(T::zero()).min(T::one());
    let size = T::from_usize_lossy(cfg.k_base) + T::lit(cfg.alpha) * (T::one() - mu);
    // Guard against 5.000000001-style rounding pushing the ceiling up a whole pixel.
    let size = size.as_f64();
    let rounded = size.round();
    let size = if (size - rounded).abs() < 1e-9 { rounded } else { size.ceil() };
    (size as usize).max(cfg.k_base)
}

/// Binomial layer weights `(mu^2, 2 mu (1 - mu), (1 - mu)^2)`, high to low resolution.
pub fn layer_weights<T: Real>(mu: T) -> [T; 3] {
    let rest = T::one() - mu;
    [mu * mu, T::lit(2.0) * mu * rest, rest * rest]
}

/// Number of samples covering an axial distance `d` meters.
pub fn sampling_points<T: Real>(f_spatial: T, d: T) -> T {
    f_spatial * d
}

/// Per-record quantities derived from the acquisition metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsrContext {
    pub f_spatial: f64,
    pub mu: f64,
    #[serde(rename = "K_a")]
    pub kernel_size: usize,
    pub weights: [f64; 3],
    #[serde(skip)]
    pub f_s: f64,
    #[serde(skip)]
    pub v: f64,
}

impl SsrContext {
    pub fn new(f_s: f64, v: f64, cfg: &AdaptiveConfig) -> Result<Self> {
        cfg.validate()?;
        let f_spatial = compute_ssr(f_s, v)?;
        let mu = normalize_ssr(f_spatial, cfg)?;
        Ok(Self {
            f_spatial,
            mu,
            kernel_size: adaptive_kernel_size(mu, cfg),
            weights: layer_weights(mu),
            f_s,
            v,
        })
    }

    /// Converts an axial sample index into meters along the rope.
    pub fn sample_to_meters(&self, sample: f64) -> f64 {
        sample / self.f_spatial
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AdaptiveConfig {
        AdaptiveConfig::default()
    }

    #[test]
    fn ssr_arithmetic() {
        assert!((compute_ssr(250.0f64, 1.5).unwrap() - 166.6667).abs() < 1e-4);
        assert_eq!(compute_ssr(250.0, 0.5).unwrap(), 500.0);
        assert_eq!(compute_ssr(3.7f64, 3.7).unwrap(), 1.0);
        assert!(matches!(
            compute_ssr(0.0, 1.0),
            Err(MflError::NonPositiveInput { name: "sampling_rate_hz", .. })
        ));
        assert!(compute_ssr(250.0, -1.0).is_err());
    }

    #[test]
    fn normalized_ssr() {
        let c = cfg();
        assert!((normalize_ssr(c.extreme_ssr(), &c).unwrap() - 1.0).abs() < 1e-12);
        assert!((normalize_ssr(500.0f64, &c).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(normalize_ssr(100.0, &c).unwrap(), 1.0);
        assert!(normalize_ssr(0.0, &c).is_err());
    }

    #[test]
    fn kernel_sizes() {
        let c = cfg();
        assert_eq!(adaptive_kernel_size(1.0, &c), 5);
        assert_eq!(adaptive_kernel_size(0.3333, &c), 9);
        assert_eq!(adaptive_kernel_size(1e-9, &c), 10);
        assert_eq!(adaptive_kernel_size(0.8f64, &c), 6);
        assert_eq!(adaptive_kernel_size(0.1f64, &c), 10);
    }

    #[test]
    fn weights() {
        assert_eq!(layer_weights(1.0), [1.0, 0.0, 0.0]);
        assert_eq!(layer_weights(0.5), [0.25, 0.5, 0.25]);
    }

    #[test]
    fn sampling_point_counts() {
        let low = sampling_points(250.0f64 / 1.5, 0.02);
        assert!((low - 3.3333333).abs() < 1e-6);
        assert!((sampling_points(500.0f64, 0.02) - 10.0).abs() < 1e-12);
        assert!((sampling_points(37.0f64, 1.0 / 37.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn context_for_presets() {
        let low = SsrContext::new(250.0, 1.2, &cfg()).unwrap();
        assert!((low.f_spatial - 208.333).abs() < 1e-3);
        assert!((low.mu - 0.8).abs() < 1e-9);
        assert_eq!(low.kernel_size, 6);
        let high = SsrContext::new(250.0, 0.15, &cfg()).unwrap();
        assert!((high.mu - 0.1).abs() < 1e-9);
        assert_eq!(high.kernel_size, 10);
        let json = serde_json::to_value(&high).unwrap();
        assert_eq!(json["K_a"], 10);
        assert!(json.get("f_s").is_none());
    }

    #[test]
    fn f32_instantiation() {
        assert_eq!(compute_ssr(250.0f32, 0.5).unwrap(), 500.0);
        assert_eq!(layer_weights(0.5f32), [0.25, 0.5, 0.25]);
    }
}
