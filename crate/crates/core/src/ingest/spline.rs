//! Periodic natural cubic spline on unit-spaced knots.
//!
//! The ring of Hall sensors is closed, so the last channel neighbours the
//! first. The spline is periodic with period `N` and passes through every knot.

/// Periodic cubic spline through `values[k]` at coordinate `k`, period `values.len()`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    /// Panics if fewer than two knots are given.
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "periodic spline needs at least two knots");
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let prev = values[(i + n - 1) % n];
                let next = values[(i + 1) % n];
                6.0 * (prev - 2.0 * values[i] + next)
            })
            .collect();
        let second = solve_cyclic(n, &rhs);
        Self {
            values: values.to_vec(),
            second,
        }
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    /// Evaluates at any real coordinate; the coordinate is wrapped into `[0, N)`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let x = x.rem_euclid(n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let t = x - i as f64;
        let j = (i + 1) % n;
        let u = 1.0 - t;
        u * self.values[i]
            + t * self.values[j]
            + ((u * u * u - u) * self.second[i] + (t * t * t - t) * self.second[j]) / 6.0
    }
}

/// Solves the cyclic system `m[i-1] + 4 m[i] + m[i+1] = rhs[i]` (indices mod n).
fn solve_cyclic(n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 4.0;
        row[(i + 1) % n] += 1.0;
        row[(i + n - 1) % n] += 1.0;
        row[n] = rhs[i];
    }
    // Strictly diagonally dominant for n >= 3 and [[4,2],[2,4]] for n = 2,
    // so elimination without pivoting is stable.
    for k in 0..n {
        let pivot = a[k][k];
        for i in (k + 1)..n {
            let factor = a[i][k] / pivot;
            if factor != 0.0 {
                for c in k..=n {
                    a[i][c] -= factor * a[k][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = ((k + 1)..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (a[k][n] - tail) / a[k][k];
    }
    x
}

/// Linear map from `N` channel values to `H` resampled values.
///
/// Output row `h` sits at channel coordinate `h * N / H`. Because the spline is
/// linear in its knot values, the whole resampling is one `H x N` weight matrix.
#[derive(Debug, Clone)]
pub struct RadialResampler {
    channels: usize,
    height: usize,
    weights: Vec<f64>,
}

impl RadialResampler {
    pub fn new(channels: usize, height: usize) -> Self {
        let mut weights = vec![0.0; height * channels];
        let mut unit = vec![0.0; channels];
        for k in 0..channels {
            unit.fill(0.0);
            unit[k] = 1.0;
            let spline = PeriodicSpline::new(&unit);
            for h in 0..height {
                weights[h * channels + k] = spline.eval(Self::coordinate(h, channels, height));
            }
        }
        Self {
            channels,
            height,
            weights,
        }
    }

    /// Channel coordinate of output row `h`.
    pub fn coordinate(h: usize, channels: usize, height: usize) -> f64 {
        h as f64 * channels as f64 / height as f64
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights_for(&self, h: usize) -> &[f64] {
        &self.weights[h * self.channels..(h + 1) * self.channels]
    }
}
