//! Raw record handling: detrending, normalization, radial interpolation and
//! segmentation into fixed-size images.

mod spline;

pub use spline::{PeriodicSpline, RadialResampler};

use crate::error::{MflError, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Multi-channel record: `M` axial samples by `N` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MflRecord<T> {
    pub samples: Matrix<T>,
    pub sampling_rate_hz: f64,
    pub inspection_speed_mps: f64,
    pub label: String,
}

impl<T: Real> MflRecord<T> {
    pub fn new(
        samples: Matrix<T>,
        sampling_rate_hz: f64,
        inspection_speed_mps: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            return Err(MflError::NonPositiveInput {
                name: "sampling_rate_hz",
                value: sampling_rate_hz,
            });
        }
        if !(inspection_speed_mps > 0.0 && inspection_speed_mps.is_finite()) {
            return Err(MflError::NonPositiveInput {
                name: "inspection_speed_mps",
                value: inspection_speed_mps,
            });
        }
        if samples.cols() < 2 {
            return Err(MflError::InvalidRecord(format!(
                "need at least 2 channels, got {}",
                samples.cols()
            )));
        }
        if !samples.is_finite() {
            return Err(MflError::InvalidRecord("non-finite sample".into()));
        }
        Ok(Self {
            samples,
            sampling_rate_hz,
            inspection_speed_mps,
            label: label.into(),
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.rows()
    }

    pub fn channel_count(&self) -> usize {
        self.samples.cols()
    }

    pub fn cast<U: Real>(&self) -> MflRecord<U> {
        MflRecord {
            samples: self.samples.cast(),
            sampling_rate_hz: self.sampling_rate_hz,
            inspection_speed_mps: self.inspection_speed_mps,
            label: self.label.clone(),
        }
    }
}

/// One `H x P` image segment: rows are radial positions, columns axial samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MflImage<T> {
    pub pixels: Matrix<T>,
    /// 1-based position of this segment within its record.
    pub segment_index: usize,
    /// 0-based index of the first axial sample of this segment in the record.
    pub origin_sample: usize,
}

impl<T: Copy> MflImage<T> {
    pub fn height(&self) -> usize {
        self.pixels.rows()
    }

    pub fn width(&self) -> usize {
        self.pixels.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    CubicSpline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Half span `L_a` of the centered moving-average trend window (`2 L_a` samples).
    pub half_span: usize,
    pub image_height: usize,
    pub segment_length: usize,
    pub interpolation: Interpolation,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            half_span: 100,
            image_height: 200,
            segment_length: 200,
            interpolation: Interpolation::CubicSpline,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, channel_count: usize) -> Result<()> {
        if self.half_span == 0 {
            return Err(MflError::InvalidConfig("half_span must be >= 1".into()));
        }
        if self.segment_length == 0 {
            return Err(MflError::InvalidConfig("segment_length must be >= 1".into()));
        }
        if self.image_height < channel_count {
            return Err(MflError::InvalidConfig(format!(
                "image_height {} is below the channel count {channel_count}",
                self.image_height
            )));
        }
        Ok(())
    }
}

/// Subtracts a centered moving average over `[m - L_a, m + L_a - 1]` from each channel.
///
/// Near the record ends the window is truncated to the available samples and
/// the divisor shrinks with it.
pub fn detrend<T: Real>(samples: &Matrix<T>, half_span: usize) -> Result<Matrix<T>> {
    let (m_len, n_ch) = samples.dims();
    if half_span == 0 {
        return Err(MflError::InvalidConfig("half_span must be >= 1".into()));
    }
    let required = 2 * half_span;
    if m_len < required {
        return Err(MflError::RecordTooShort {
            samples: m_len,
            required,
        });
    }
    let mut out = Matrix::zeros(m_len, n_ch);
    // Prefix sums in f64 regardless of T; long f32 records would drift otherwise.
    let mut prefix = vec![0.0f64; m_len + 1];
    for n in 0..n_ch {
        for m in 0..m_len {
            prefix[m + 1] = prefix[m] + samples.get(m, n).as_f64();
        }
        for m in 0..m_len {
            let lo = m.saturating_sub(half_span);
            let hi = (m + half_span).min(m_len); // exclusive
            let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            out.set(m, n, T::lit(samples.get(m, n).as_f64() - mean));
        }
    }
    Ok(out)
}

/// Affine map of the global `[min, max]` onto `[-1, 1]`. A flat input maps to zeros.
pub fn normalize<T: Real>(y: &Matrix<T>) -> Matrix<T> {
    let Some((lo, hi)) = y.min_max() else {
        return y.clone();
    };
    if hi <= lo {
        return Matrix::zeros(y.rows(), y.cols());
    }
    let two = T::lit(2.0);
    let span = hi - lo;
    y.map(|v| (two * (v - lo) / span - T::one()).max(-T::one()).min(T::one()))
}

/// Resamples every axial row from `N` channels to `height` values along the ring.
pub fn interpolate_radial<T: Real>(normalized: &Matrix<T>, height: usize) -> Result<Matrix<T>> {
    let (m_len, n_ch) = normalized.dims();
    if n_ch < 2 {
        return Err(MflError::InvalidRecord(format!("need at least 2 channels, got {n_ch}")));
    }
    if height < n_ch {
        return Err(MflError::InvalidConfig(format!(
            "image height {height} is below the channel count {n_ch}"
        )));
    }
    let resampler = RadialResampler::new(n_ch, height);
    let weights: Vec<Vec<T>> = (0..height)
        .map(|h| resampler.weights_for(h).iter().map(|&w| T::lit(w)).collect())
        .collect();
    let mut out = Matrix::zeros(m_len, height);
    let lo = -T::one();
    let hi = T::one();
    for m in 0..m_len {
        let src = normalized.row(m);
        let dst = out.row_mut(m);
        for (d, w) in dst.iter_mut().zip(&weights) {
            let v: T = w.iter().zip(src).map(|(&a, &b)| a * b).sum();
            *d = v.max(lo).min(hi);
        }
    }
    Ok(out)
}

/// Cuts `f` (M x H) into `floor(M / P)` non-overlapping `H x P` images.
pub fn segment<T: Real>(f: &Matrix<T>, segment_length: usize) -> Result<Vec<MflImage<T>>> {
    let m_len = f.rows();
    if segment_length == 0 {
        return Err(MflError::InvalidConfig("segment_length must be >= 1".into()));
    }
    if m_len < segment_length {
        return Err(MflError::RecordTooShort {
            samples: m_len,
            required: segment_length,
        });
    }
    Ok((0..m_len / segment_length)
        .map(|i| {
            let origin = i * segment_length;
            MflImage {
                pixels: f.row_block(origin, origin + segment_length).transpose(),
                segment_index: i + 1,
                origin_sample: origin,
            }
        })
        .collect())
}

/// Full preprocessing chain: detrend, normalize, interpolate, segment.
pub fn preprocess<T: Real>(record: &MflRecord<T>, cfg: &PreprocessConfig) -> Result<Vec<MflImage<T>>> {
    cfg.validate(record.channel_count())?;
    let y = detrend(&record.samples, cfg.half_span)?;
    let normalized = normalize(&y);
    let f = match cfg.interpolation {
        Interpolation::CubicSpline => interpolate_radial(&normalized, cfg.image_height)?,
    };
    segment(&f, cfg.segment_length)
}
