//! Gamma enhancement, axial envelope extraction and SSR-weighted layer fusion.

use std::str::FromStr;

use crate::error::{MflError, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedLayer<T> {
    pub gamma_image: Matrix<T>,
    pub envelope_image: Matrix<T>,
    /// 1-based pyramid level.
    pub layer_index: usize,
}

impl<T: Real> EnhancedLayer<T> {
    pub fn from_response(response: &Matrix<T>, gamma: T, layer_index: usize) -> Self {
        let gamma_image = gamma_enhance(response, gamma);
        let envelope_image = envelope(&gamma_image);
        Self {
            gamma_image,
            envelope_image,
            layer_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedImage<T> {
    pub pixels: Matrix<T>,
    pub weights_used: [T; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// Coarse-to-fine blending `G_j = w_j F_j + (1 - w_j) up(G_{j+1})`.
    #[default]
    Recursive,
    /// Flat weighted sum `w1 F1 + w2 up(F2) + w3 up(up(F3))`.
    Flat,
}

impl FromStr for FusionMode {
    type Err = MflError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursive" => Ok(Self::Recursive),
            "flat" => Ok(Self::Flat),
            other => Err(MflError::InvalidConfig(format!(
                "fusion mode must be `recursive` or `flat`, got `{other}`"
            ))),
        }
    }
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Recursive => "recursive",
            Self::Flat => "flat",
        }
    }
}

/// `(C / max C)^gamma`; an all-zero response stays zero.
pub fn gamma_enhance<T: Real>(response: &Matrix<T>, gamma: T) -> Matrix<T> {
    let max = response.max_value().unwrap_or_else(T::zero);
    if max <= T::zero() {
        return Matrix::zeros(response.rows(), response.cols());
    }
    let unit_gamma = gamma == T::one();
    response.map(|v| {
        let x = (v / max).max(T::zero());
        if unit_gamma {
            x
        } else {
            x.powf(gamma)
        }
    })
}

/// Upper envelope of every column, i.e. around the sensor ring at a fixed
/// axial position.
///
/// Along a line, interior local maxima are joined by straight lines and the
/// outermost maxima are held to the line ends, keeping the pointwise maximum
/// with the input. The fill is repeated until the line no longer changes, so
/// the result has no interior maximum left and the operation is idempotent.
/// Lines without an interior maximum are returned unchanged.
pub fn envelope<T: Real>(e: &Matrix<T>) -> Matrix<T> {
    let mut out = e.clone();
    let mut line = Vec::with_capacity(e.rows());
    let mut scratch = Vec::new();
    let mut peaks = Vec::new();
    for c in 0..e.cols() {
        line.clear();
        line.extend((0..e.rows()).map(|r| e.get(r, c)));
        if envelope_line(&mut line, &mut scratch, &mut peaks) {
            for (r, &v) in line.iter().enumerate() {
                out.set(r, c, v);
            }
        }
    }
    out
}

/// In-place envelope of one line; returns whether it changed.
fn envelope_line<T: Real>(line: &mut [T], scratch: &mut Vec<T>, peaks: &mut Vec<usize>) -> bool {
    let mut changed = false;
    // every pass that changes the line removes at least one maximum
    for _ in 0..=line.len() {
        local_maxima(line, peaks);
        if peaks.is_empty() {
            break;
        }
        scratch.clear();
        scratch.extend_from_slice(line);
        fill_between_peaks(scratch, peaks);
        if scratch.as_slice() == &*line {
            break;
        }
        line.copy_from_slice(scratch);
        changed = true;
    }
    changed
}

/// Indices of strict interior local maxima; a plateau counts once, at its center.
fn local_maxima<T: Real>(line: &[T], peaks: &mut Vec<usize>) {
    peaks.clear();
    let n = line.len();
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && line[j + 1] == line[i] {
            j += 1;
        }
        if j + 1 < n && line[i] > line[i - 1] && line[j] > line[j + 1] {
            peaks.push((i + j) / 2);
        }
        i = j + 1;
    }
}

fn fill_between_peaks<T: Real>(line: &mut [T], peaks: &[usize]) {
    let first = peaks[0];
    let last = peaks[peaks.len() - 1];
    let (head, tail) = (line[first], line[last]);
    for v in &mut line[..first] {
        *v = v.max(head);
    }
    for v in &mut line[last + 1..] {
        *v = v.max(tail);
    }
    for pair in peaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (line[a], line[b]);
        let span = T::from_usize_lossy(b - a);
        for k in a + 1..b {
            let t = T::from_usize_lossy(k - a) / span;
            line[k] = line[k].max(va + (vb - va) * t);
        }
    }
}

/// Bilinear resampling to exact target dimensions (half-pixel centers).
pub fn upsample_bilinear<T: Real>(src: &Matrix<T>, rows: usize, cols: usize) -> Matrix<T> {
    let (sr, sc) = src.dims();
    let axis = |dst_len: usize, src_len: usize| -> Vec<(usize, usize, T)> {
        let scale = src_len as f64 / dst_len as f64;
        (0..dst_len)
            .map(|d| {
                let x = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(src_len - 1);
                (i0, i1, T::lit(x - i0 as f64))
            })
            .collect()
    };
    let ry = axis(rows, sr);
    let cx = axis(cols, sc);
    Matrix::from_fn(rows, cols, |r, c| {
        let (r0, r1, fy) = ry[r];
        let (c0, c1, fx) = cx[c];
        let top = src.get(r0, c0) + (src.get(r0, c1) - src.get(r0, c0)) * fx;
        let bottom = src.get(r1, c0) + (src.get(r1, c1) - src.get(r1, c0)) * fx;
        top + (bottom - top) * fy
    })
}

/// Fuses three envelope images (finest first) into one image at layer-1 resolution.
pub fn fuse<T: Real>(layers: [&Matrix<T>; 3], weights: [T; 3], mode: FusionMode) -> Result<FusedImage<T>> {
    for j in 0..2 {
        let (r, c) = layers[j].dims();
        let (nr, nc) = layers[j + 1].dims();
        if nr != r / 2 || nc != c / 2 {
            return Err(MflError::DimensionMismatch(format!(
                "layer {} is {nr}x{nc}, expected half of {r}x{c}",
                j + 2
            )));
        }
    }
    let (r1, c1) = layers[0].dims();
    let (r2, c2) = layers[1].dims();
    let pixels = match mode {
        FusionMode::Recursive => {
            let g3 = layers[2];
            let g2 = blend(layers[1], &upsample_bilinear(g3, r2, c2), weights[1]);
            blend(layers[0], &upsample_bilinear(&g2, r1, c1), weights[0])
        }
        FusionMode::Flat => {
            let up2 = upsample_bilinear(layers[1], r1, c1);
            let up3 = upsample_bilinear(&upsample_bilinear(layers[2], r2, c2), r1, c1);
            let mut out = layers[0].map(|v| v * weights[0]);
            for ((o, &a), &b) in out.as_mut_slice().iter_mut().zip(up2.as_slice()).zip(up3.as_slice()) {
                *o += weights[1] * a + weights[2] * b;
            }
            out
        }
    };
    Ok(FusedImage {
        pixels,
        weights_used: weights,
    })
}

fn blend<T: Real>(fine: &Matrix<T>, coarse_up: &Matrix<T>, w: T) -> Matrix<T> {
    let rest = T::one() - w;
    let data = fine
        .as_slice()
        .iter()
        .zip(coarse_up.as_slice())
        .map(|(&f, &g)| w * f + rest * g)
        .collect();
    Matrix::from_vec(fine.rows(), fine.cols(), data).expect("blend operands share dimensions")
}
