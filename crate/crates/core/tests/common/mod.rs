//! Generators and invariant checks shared by the property and acceptance targets.
#![allow(dead_code)]

use mfl_core::enhance::{envelope, fuse, gamma_enhance, upsample_bilinear, FusionMode};
use mfl_core::ingest::{detrend, normalize};
use mfl_core::localize::binarize_matrix;
use mfl_core::pyramid::{build_template, match_template};
use mfl_core::Matrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn matrix(rows: impl Strategy<Value = usize>, cols: impl Strategy<Value = usize>, lo: f64, hi: f64) -> impl Strategy<Value = Matrix<f64>> {
    (rows, cols).prop_flat_map(move |(r, c)| {
        prop::collection::vec(lo..hi, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

/// Nonnegative matrix with some exact repeats, so plateaus and ties occur.
pub fn nonneg_matrix(max_dim: usize) -> impl Strategy<Value = Matrix<f64>> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop_oneof![3 => 0.0..1.0f64, 1 => (0u8..4).prop_map(|k| k as f64 / 4.0)], r * c)
            .prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

/// Record whose channels repeat a zero-mean pattern with a period dividing `2 * half_span`,
/// so the full-window moving average vanishes.
#[derive(Debug, Clone)]
pub struct Trendless {
    pub half_span: usize,
    pub samples: Matrix<f64>,
}

pub fn trendless() -> impl Strategy<Value = Trendless> {
    (1usize..12, 1usize..4, 2usize..5, 4usize..7).prop_flat_map(|(la, divisor_pick, channels, windows)| {
        let window = 2 * la;
        let divisors: Vec<usize> = (1..=window).filter(|d| window % d == 0).collect();
        let period = divisors[divisor_pick % divisors.len()];
        let len = window * windows + la;
        prop::collection::vec(prop::collection::vec(-5.0..5.0f64, period), channels).prop_map(move |bases| {
            let cols: Vec<Vec<f64>> = bases
                .iter()
                .map(|b| {
                    let mean = b.iter().sum::<f64>() / b.len() as f64;
                    (0..len).map(|m| b[m % b.len()] - mean).collect()
                })
                .collect();
            Trendless {
                half_span: la,
                samples: Matrix::from_fn(len, cols.len(), |m, n| cols[n][m]),
            }
        })
    })
}

pub fn check_detrend_idempotent(t: &Trendless) -> Result<(), TestCaseError> {
    let once = detrend(&t.samples, t.half_span).unwrap();
    let twice = detrend(&once, t.half_span).unwrap();
    let margin = 2 * t.half_span;
    for m in margin..t.samples.rows().saturating_sub(margin) {
        for n in 0..t.samples.cols() {
            prop_assert!((twice.get(m, n) - once.get(m, n)).abs() <= 1e-9, "m={m} n={n}");
        }
    }
    Ok(())
}

pub fn check_normalize_order(y: &Matrix<f64>) -> Result<(), TestCaseError> {
    let z = normalize(y);
    let (a, b) = (y.as_slice(), z.as_slice());
    prop_assert!(b.iter().all(|v| (-1.0..=1.0).contains(v)));
    for i in 0..a.len() {
        for j in 0..a.len() {
            if a[i] < a[j] {
                prop_assert!(b[i] <= b[j]);
            }
            if a[i] == a[j] {
                prop_assert_eq!(b[i], b[j]);
            }
        }
    }
    Ok(())
}

pub fn check_template_zero_dc(rows: usize, cols: usize, k: usize, c: f64) -> Result<(), TestCaseError> {
    let layer = Matrix::filled(rows.max(k), cols.max(k), c);
    let resp = match_template(&layer, &build_template(k).unwrap()).unwrap();
    let tol = 1e-12 * (1.0 + c.abs()) * (k * k) as f64;
    prop_assert!(resp.as_slice().iter().all(|v| v.abs() <= tol));
    Ok(())
}

pub fn check_envelope_idempotent(e: &Matrix<f64>) -> Result<(), TestCaseError> {
    let f = envelope(e);
    let ff = envelope(&f);
    for (a, b) in f.as_slice().iter().zip(ff.as_slice()) {
        prop_assert!((a - b).abs() <= 1e-9);
    }
    for (a, b) in f.as_slice().iter().zip(e.as_slice()) {
        prop_assert!(a >= b);
    }
    Ok(())
}

/// Three layers at successive halvings plus weights on the simplex.
pub fn fuse_input() -> impl Strategy<Value = ([Matrix<f64>; 3], [f64; 3])> {
    (1usize..5, 1usize..5, 0.0..1.0f64, 0.0..1.0f64).prop_flat_map(|(r3, c3, a, b)| {
        let (lo, hi) = (a.min(b), a.max(b));
        let weights = [lo, hi - lo, 1.0 - hi];
        (
            matrix(Just(4 * r3 + 1), Just(4 * c3), 0.0, 1.0),
            matrix(Just(2 * r3), Just(2 * c3), 0.0, 1.0),
            matrix(Just(r3), Just(c3), 0.0, 1.0),
        )
            .prop_map(move |(f1, f2, f3)| ([f1, f2, f3], weights))
    })
}

pub fn check_fuse_convex(layers: &[Matrix<f64>; 3], weights: [f64; 3]) -> Result<(), TestCaseError> {
    let (r1, c1) = layers[0].dims();
    let (r2, c2) = layers[1].dims();
    let tol = 1e-12;
    // recursive: every step is a convex blend of its two inputs
    let g2 = fuse_step(&layers[1], &upsample_bilinear(&layers[2], r2, c2), weights[1]);
    let up_g2 = upsample_bilinear(&g2, r1, c1);
    let out = fuse([&layers[0], &layers[1], &layers[2]], weights, FusionMode::Recursive).unwrap();
    prop_assert_eq!(out.pixels.dims(), (r1, c1));
    for i in 0..r1 * c1 {
        let (a, b) = (layers[0].as_slice()[i], up_g2.as_slice()[i]);
        let v = out.pixels.as_slice()[i];
        prop_assert!(v >= a.min(b) - tol && v <= a.max(b) + tol);
    }
    // flat: within the range of the three upsampled layers
    let up2 = upsample_bilinear(&layers[1], r1, c1);
    let up3 = upsample_bilinear(&upsample_bilinear(&layers[2], r2, c2), r1, c1);
    let flat = fuse([&layers[0], &layers[1], &layers[2]], weights, FusionMode::Flat).unwrap();
    for i in 0..r1 * c1 {
        let vals = [layers[0].as_slice()[i], up2.as_slice()[i], up3.as_slice()[i]];
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = flat.pixels.as_slice()[i];
        prop_assert!(v >= lo - tol && v <= hi + tol);
    }
    Ok(())
}

fn fuse_step(fine: &Matrix<f64>, coarse_up: &Matrix<f64>, w: f64) -> Matrix<f64> {
    Matrix::from_fn(fine.rows(), fine.cols(), |r, c| w * fine.get(r, c) + (1.0 - w) * coarse_up.get(r, c))
}

pub fn check_binarize_monotone(img: &Matrix<f64>, t1: f64, t2: f64) -> Result<(), TestCaseError> {
    let (lo, hi) = (t1.min(t2), t1.max(t2));
    let count = |t: f64| binarize_matrix(img, t).as_slice().iter().filter(|&&b| b != 0).count();
    prop_assert!(count(hi) <= count(lo));
    Ok(())
}

pub fn check_gamma_argmax(c: &Matrix<f64>, gamma: f64) -> Result<(), TestCaseError> {
    let e = gamma_enhance(c, gamma);
    let argmax = |m: &Matrix<f64>| {
        let max = m.max_value().unwrap();
        m.as_slice().iter().enumerate().filter(|(_, &v)| v == max).map(|(i, _)| i).collect::<Vec<_>>()
    };
    if c.max_value().unwrap() > 0.0 {
        prop_assert_eq!(argmax(c), argmax(&e));
    }
    prop_assert!(e.as_slice().iter().all(|&v| v >= 0.0));
    Ok(())
}

/// Direct quadruple loop: circular rows, replicated columns, anchor `(k - 1) / 2`.
pub fn naive_correlate(layer: &Matrix<f64>, kernel: &Matrix<f64>) -> Matrix<f64> {
    let (rows, cols) = layer.dims();
    let (kr, kc) = kernel.dims();
    let (ar, ac) = (((kr - 1) / 2) as isize, ((kc - 1) / 2) as isize);
    Matrix::from_fn(rows, cols, |r, c| {
        let mut acc = 0.0;
        for a in 0..kr {
            for b in 0..kc {
                let rr = (r as isize + a as isize - ar).rem_euclid(rows as isize) as usize;
                let cc = (c as isize + b as isize - ac).clamp(0, cols as isize - 1) as usize;
                acc += kernel.get(a, b) * layer.get(rr, cc);
            }
        }
        acc
    })
}
