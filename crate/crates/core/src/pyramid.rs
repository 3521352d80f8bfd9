//! Three-layer image pyramid and flaw template matching.
//!
//! Images are oriented with radial positions along rows and axial samples
//! along columns. Matching pads rows circularly (the sensor ring is closed)
//! and replicates the outermost columns axially.

use crate::error::{MflError, Result};
use crate::ingest::MflImage;
use crate::matrix::Matrix;
use crate::scalar::Real;

pub const PYRAMID_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePyramid<T> {
    /// Layer 0 is the segment itself; each further layer halves both dimensions.
    pub layers: [Matrix<T>; PYRAMID_LEVELS],
    pub segment_index: usize,
}

/// 2x2 average pooling; an odd trailing row or column is dropped.
pub fn downsample<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let quarter = T::lit(0.25);
    Matrix::from_fn(m.rows() / 2, m.cols() / 2, |r, c| {
        let (r2, c2) = (2 * r, 2 * c);
        (m.get(r2, c2) + m.get(r2, c2 + 1) + m.get(r2 + 1, c2) + m.get(r2 + 1, c2 + 1)) * quarter
    })
}

pub fn build_pyramid<T: Real>(img: &MflImage<T>) -> Result<ImagePyramid<T>> {
    let (rows, cols) = img.pixels.dims();
    if rows < 4 || cols < 4 {
        return Err(MflError::ImageTooSmall { rows, cols, min: 4 });
    }
    let l1 = img.pixels.clone();
    let l2 = downsample(&l1);
    let l3 = downsample(&l2);
    Ok(ImagePyramid {
        layers: [l1, l2, l3],
        segment_index: img.segment_index,
    })
}

/// Square dark-then-bright template: left columns -1, right columns +1,
/// and a zero center column when the size is odd.
#[derive(Debug, Clone, PartialEq)]
pub struct FlawTemplate<T> {
    kernel: Matrix<T>,
}

impl<T: Real> FlawTemplate<T> {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(MflError::InvalidConfig(format!(
                "template size must be >= 2, got {size}"
            )));
        }
        let half = size / 2;
        let kernel = Matrix::from_fn(size, size, |_, c| {
            if c < half {
                -T::one()
            } else if size % 2 == 1 && c == half {
                T::zero()
            } else {
                T::one()
            }
        });
        Ok(Self { kernel })
    }

    pub fn size(&self) -> usize {
        self.kernel.rows()
    }

    pub fn kernel(&self) -> &Matrix<T> {
        &self.kernel
    }
}

/// Builds the matching template for an adapted kernel size.
pub fn build_template<T: Real>(size: usize) -> Result<FlawTemplate<T>> {
    FlawTemplate::new(size)
}

/// Absolute template response of one layer, same dimensions as the layer.
pub fn match_template<T: Real>(layer: &Matrix<T>, tmpl: &FlawTemplate<T>) -> Result<Matrix<T>> {
    let mut out = correlate(layer, tmpl.kernel())?;
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
    Ok(out)
}

/// Raw 2-D cross-correlation with circular row padding and replicated columns.
///
/// The kernel anchor is `((kr - 1) / 2, (kc - 1) / 2)`, so
/// `out[r][c] = sum_ab k[a][b] * img[wrap(r + a - ar)][clamp(c + b - ac)]`.
pub fn correlate<T: Real>(layer: &Matrix<T>, kernel: &Matrix<T>) -> Result<Matrix<T>> {
    let (rows, cols) = layer.dims();
    let (kr, kc) = kernel.dims();
    if rows < kr || cols < kc || kr == 0 || kc == 0 {
        return Err(MflError::LayerSmallerThanKernel {
            rows,
            cols,
            kernel: kr.max(kc),
        });
    }
    let (ar, ac) = ((kr - 1) / 2, (kc - 1) / 2);
    let padded = pad(layer, ar, kr - 1 - ar, ac, kc - 1 - ac);
    let pcols = padded.cols();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let dst = out.row_mut(r);
        for a in 0..kr {
            let src = padded.row(r + a);
            for b in 0..kc {
                let k = kernel.get(a, b);
                if k == T::zero() {
                    continue;
                }
                let window = &src[b..b + cols];
                debug_assert!(b + cols <= pcols);
                for (d, &s) in dst.iter_mut().zip(window) {
                    *d += k * s;
                }
            }
        }
    }
    Ok(out)
}

fn pad<T: Real>(m: &Matrix<T>, top: usize, bottom: usize, left: usize, right: usize) -> Matrix<T> {
    let (rows, cols) = m.dims();
    let prow = rows + top + bottom;
    let pcol = cols + left + right;
    Matrix::from_fn(prow, pcol, |r, c| {
        let src_r = (r + rows * (top / rows + 1) - top) % rows;
        let src_c = c.saturating_sub(left).min(cols - 1);
        m.get(src_r, src_c)
    })
}
