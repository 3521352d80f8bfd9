//! Threshold selection, binarization and connected-component localization.

use serde::{Deserialize, Serialize};

use crate::enhance::FusedImage;
use crate::matrix::Matrix;
use crate::scalar::Real;

pub type BinaryImage = Matrix<u8>;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeConfig {
    pub sweep_step: f64,
    pub min_area_px: usize,
    /// Thresholds leaving more than this share of the image white take no
    /// part in plateau selection: the background has merged into one region.
    pub max_foreground_fraction: f64,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            sweep_step: 0.05,
            min_area_px: 4,
            max_foreground_fraction: 0.5,
        }
    }
}

/// Localized flaw region in one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "segment")]
    pub segment_index: usize,
    /// `[axial_start, axial_end, radial_start, radial_end]`, inclusive 0-based pixels.
    /// A component that wraps around the sensor ring has `radial_start > radial_end`.
    #[serde(rename = "box")]
    pub bbox: [usize; 4],
    #[serde(rename = "axial_m")]
    pub axial_position_m: f64,
    /// Mean normalized fused intensity over the component's pixels.
    pub score: f64,
}

impl Detection {
    pub fn axial_start(&self) -> usize {
        self.bbox[0]
    }

    pub fn axial_end(&self) -> usize {
        self.bbox[1]
    }
}

/// Where a segment sits inside its record, for converting pixels to meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFrame {
    pub segment_index: usize,
    pub origin_sample: usize,
    pub f_spatial: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan {
    pub thresholds: Vec<f64>,
    pub region_counts: Vec<usize>,
    pub white_pixels: Vec<usize>,
    pub chosen_threshold: f64,
}

impl ThresholdScan {
    /// Scan of an all-zero image: nothing to threshold.
    pub fn empty() -> Self {
        Self {
            thresholds: Vec::new(),
            region_counts: Vec::new(),
            white_pixels: Vec::new(),
            chosen_threshold: 1.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// `step, 2 step, ...` strictly below one.
pub fn sweep_thresholds(step: f64) -> Vec<f64> {
    let count = ((1.0 - 1e-9) / step).floor() as usize;
    (1..=count).map(|k| k as f64 * step).collect()
}

/// Picks the threshold in the middle of the longest run of equal, nonzero
/// region counts. Ties go to the run at higher thresholds. Thresholds whose
/// white share exceeds `max_foreground_fraction` break runs like a zero count.
pub fn adaptive_threshold<T: Real>(fused: &FusedImage<T>, cfg: &LocalizeConfig) -> ThresholdScan {
    adaptive_threshold_matrix(&fused.pixels, cfg)
}

pub fn adaptive_threshold_matrix<T: Real>(pixels: &Matrix<T>, cfg: &LocalizeConfig) -> ThresholdScan {
    let max = pixels.max_value().unwrap_or_else(T::zero);
    if max <= T::zero() {
        return ThresholdScan::empty();
    }
    let thresholds = sweep_thresholds(cfg.sweep_step);
    let mut binary = Matrix::filled(pixels.rows(), pixels.cols(), 0u8);
    let mut labeler = Labeler::default();
    let mut region_counts = Vec::with_capacity(thresholds.len());
    let mut white_pixels = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        binarize_into(pixels, max, t, &mut binary);
        region_counts.push(labeler.label(&binary));
        white_pixels.push(binary.as_slice().iter().filter(|&&b| b != 0).count());
    }

    let limit = cfg.max_foreground_fraction * pixels.as_slice().len() as f64;
    let key = |i: usize| if white_pixels[i] as f64 <= limit { region_counts[i] } else { 0 };
    // (length, start index) of the best run
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < thresholds.len() {
        let mut j = i;
        while j + 1 < thresholds.len() && key(j + 1) == key(i) {
            j += 1;
        }
        if key(i) > 0 {
            let len = j - i + 1;
            if best.is_none_or(|(l, _)| len >= l) {
                best = Some((len, i));
            }
        }
        i = j + 1;
    }
    let chosen_threshold = match best {
        Some((len, start)) => 0.5 * (thresholds[start] + thresholds[start + len - 1]),
        None => 1.0,
    };
    ThresholdScan {
        thresholds,
        region_counts,
        white_pixels,
        chosen_threshold,
    }
}

/// White (1) where the max-normalized value is at least `t`.
pub fn binarize<T: Real>(fused: &FusedImage<T>, t: f64) -> BinaryImage {
    binarize_matrix(&fused.pixels, t)
}

pub fn binarize_matrix<T: Real>(pixels: &Matrix<T>, t: f64) -> BinaryImage {
    let mut out = Matrix::filled(pixels.rows(), pixels.cols(), 0u8);
    let max = pixels.max_value().unwrap_or_else(T::zero);
    if max > T::zero() {
        binarize_into(pixels, max, t, &mut out);
    }
    out
}

fn binarize_into<T: Real>(pixels: &Matrix<T>, max: T, t: f64, out: &mut BinaryImage) {
    // v / max >= t  <=>  v >= t * max, but division keeps t = 1 exact for the max pixel
    for (o, &v) in out.as_mut_slice().iter_mut().zip(pixels.as_slice()) {
        *o = u8::from((v / max).as_f64() >= t);
    }
}

/// 8-connected labeling; rows wrap around because the sensor ring is closed.
#[derive(Debug, Default)]
struct Labeler {
    parent: Vec<u32>,
    labels: Vec<u32>,
}

impl Labeler {
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let p = parent[x as usize];
            parent[x as usize] = parent[p as usize];
            x = p;
        }
        x
    }

    fn union(parent: &mut [u32], a: u32, b: u32) {
        let ra = Self::find(parent, a);
        let rb = Self::find(parent, b);
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi as usize] = lo;
        }
    }

    /// Labels components; returns their count. `labels` holds `0` for
    /// background and `1..=count` otherwise, ordered by first pixel in raster order.
    fn label(&mut self, binary: &BinaryImage) -> usize {
        let (rows, cols) = binary.dims();
        let n = rows * cols;
        self.parent.clear();
        self.parent.extend(0..n as u32);
        let px = binary.as_slice();
        let on = |r: usize, c: usize| px[r * cols + c] != 0;
        for r in 0..rows {
            for c in 0..cols {
                if !on(r, c) {
                    continue;
                }
                let idx = (r * cols + c) as u32;
                if c + 1 < cols && on(r, c + 1) {
                    Self::union(&mut self.parent, idx, idx + 1);
                }
                // ring closure only makes sense with at least three rows
                let next_row = if r + 1 < rows {
                    Some(r + 1)
                } else if rows > 2 {
                    Some(0)
                } else {
                    None
                };
                if let Some(rn) = next_row {
                    let lo = c.saturating_sub(1);
                    let hi = (c + 1).min(cols - 1);
                    for cn in lo..=hi {
                        if on(rn, cn) {
                            Self::union(&mut self.parent, idx, (rn * cols + cn) as u32);
                        }
                    }
                }
            }
        }
        self.labels.clear();
        self.labels.resize(n, 0);
        let mut root_label = vec![0u32; n];
        let mut count = 0u32;
        for i in 0..n {
            if px[i] == 0 {
                continue;
            }
            let root = Self::find(&mut self.parent, i as u32) as usize;
            if root_label[root] == 0 {
                count += 1;
                root_label[root] = count;
            }
            self.labels[i] = root_label[root];
        }
        count as usize
    }
}

/// Number of 8-connected white regions.
pub fn count_regions(binary: &BinaryImage) -> usize {
    Labeler::default().label(binary)
}

/// Turns every white component of at least `min_area_px` pixels into a
/// detection, sorted by axial start.
pub fn extract_components<T: Real>(
    binary: &BinaryImage,
    intensity: &Matrix<T>,
    min_area_px: usize,
    frame: &SegmentFrame,
) -> Vec<Detection> {
    let (rows, cols) = binary.dims();
    let mut labeler = Labeler::default();
    let count = labeler.label(binary);
    if count == 0 {
        return Vec::new();
    }
    let max = intensity.max_value().unwrap_or_else(T::one);
    let max = if max > T::zero() { max.as_f64() } else { 1.0 };

    struct Acc {
        area: usize,
        sum: f64,
        c0: usize,
        c1: usize,
        rows_hit: Vec<bool>,
    }
    let mut accs: Vec<Acc> = (0..count)
        .map(|_| Acc {
            area: 0,
            sum: 0.0,
            c0: usize::MAX,
            c1: 0,
            rows_hit: vec![false; rows],
        })
        .collect();
    for r in 0..rows {
        for c in 0..cols {
            let l = labeler.labels[r * cols + c];
            if l == 0 {
                continue;
            }
            let a = &mut accs[l as usize - 1];
            a.area += 1;
            a.sum += intensity.get(r, c).as_f64() / max;
            a.c0 = a.c0.min(c);
            a.c1 = a.c1.max(c);
            a.rows_hit[r] = true;
        }
    }
    let mut dets: Vec<Detection> = accs
        .into_iter()
        .filter(|a| a.area >= min_area_px.max(1))
        .map(|a| {
            let (r0, r1) = circular_extent(&a.rows_hit);
            let center = frame.origin_sample as f64 + 0.5 * (a.c0 + a.c1) as f64;
            Detection {
                segment_index: frame.segment_index,
                bbox: [a.c0, a.c1, r0, r1],
                axial_position_m: center / frame.f_spatial,
                score: a.sum / a.area as f64,
            }
        })
        .collect();
    dets.sort_by_key(|d| d.bbox);
    dets
}

/// Tight radial interval of occupied rows on a ring: starts right after the
/// longest run of empty rows.
fn circular_extent(hit: &[bool]) -> (usize, usize) {
    let n = hit.len();
    let first = hit.iter().position(|&h| h).unwrap_or(0);
    let last = hit.iter().rposition(|&h| h).unwrap_or(0);
    // longest interior gap versus the gap that wraps through the seam
    let mut best_gap = (n - 1 - last) + first;
    let mut best = (first, last);
    let mut prev = first;
    for (i, _) in hit.iter().enumerate().skip(first + 1).filter(|(_, h)| **h) {
        let gap = i - prev - 1;
        if gap > best_gap {
            best_gap = gap;
            best = (i, prev);
        }
        prev = i;
    }
    best
}
