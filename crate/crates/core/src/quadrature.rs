//! Composite trapezoid rules and breakpoint-aligned grids.

use num_complex::Complex64;

/// Trapezoid weights for an increasing, possibly non-uniform grid.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = xs[i] - xs[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    w
}

/// Composite Simpson weights on panels `[x_{2i}, x_{2i+2}]`, each assumed to
/// have its middle node at its midpoint. Needs an even number of intervals.
pub fn simpson_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an even number of intervals");
    let mut w = vec![0.0; n];
    for i in (0..n - 1).step_by(2) {
        let h6 = (xs[i + 2] - xs[i]) / 6.0;
        w[i] += h6;
        w[i + 1] += 4.0 * h6;
        w[i + 2] += h6;
    }
    w
}

pub fn weighted_sum(w: &[f64], ys: &[f64]) -> f64 {
    w.iter().zip(ys).map(|(w, y)| w * y).sum()
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

pub fn trapezoid_complex(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[0] + y[1]) * (0.5 * (x[1] - x[0])))
        .sum()
}

/// Uniform grid of `intervals` steps on `[lo, hi]`, endpoints exact.
pub fn uniform(lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
    assert!(intervals >= 1 && hi > lo);
    let h = (hi - lo) / intervals as f64;
    let mut xs: Vec<f64> = (0..=intervals).map(|i| lo + i as f64 * h).collect();
    xs[intervals] = hi;
    xs
}

/// Uniform grid whose step divides `(b - a) / 2`, so that `a`, the midpoint
/// and `b` are all nodes. Covers at least `[lo, hi]`; the step is the largest
/// such value not exceeding `max_step`.
pub fn aligned_grid(a: f64, b: f64, lo: f64, hi: f64, max_step: f64) -> Vec<f64> {
    assert!(b > a && max_step > 0.0 && lo <= a && hi >= b);
    let half = 0.5 * (b - a);
    let m = (half / max_step).ceil().max(1.0) as i64;
    let h = half / m as f64;
    let j_lo = ((lo - a) / h).floor() as i64;
    let j_hi = ((hi - a) / h).ceil() as i64;
    let xc = 0.5 * (a + b);
    (j_lo..=j_hi)
        .map(|j| match j {
            0 => a,
            j if j == m => xc,
            j if j == 2 * m => b,
            j => a + j as f64 * h,
        })
        .collect()
}

/// Index of the node equal to `x` up to a relative tolerance.
pub fn node_index(xs: &[f64], x: f64) -> Option<usize> {
    let tol = 1e-12 * (1.0 + x.abs());
    let i = xs.partition_point(|&v| v < x - tol);
    (i < xs.len() && (xs[i] - x).abs() <= tol).then_some(i)
}
