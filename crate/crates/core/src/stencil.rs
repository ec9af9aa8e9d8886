//! Fourth-order finite differences and quadrature on uniform samples.
//!
//! Interior nodes use centred five-point stencils; the two nodes nearest each
//! end use one-sided stencils of the same order, so no periodicity is assumed.

use std::ops::{Add, Mul, Sub};

/// Anything that can be linearly combined: `f64` and `Vec4`.
pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>> Sample for T {}

fn combine<T: Sample>(f: &[T], at: usize, offsets: &[isize], weights: &[f64], sign: f64) -> T {
    let dir = sign as isize;
    let pick = |o: isize| f[(at as isize + dir * o) as usize];
    let mut acc = pick(offsets[0]) * (weights[0] * sign);
    for (o, w) in offsets.iter().zip(weights).skip(1) {
        acc = acc + pick(*o) * (w * sign);
    }
    acc
}

/// First derivative at every node. Needs at least five samples.
pub fn d1<T: Sample>(f: &[T], h: f64) -> Vec<T> {
    let n = f.len();
    assert!(n >= 5, "first-derivative stencil needs 5 samples, got {n}");
    let s = 1.0 / (12.0 * h);
    (0..n)
        .map(|i| {
            let v = if i == 0 {
                combine(f, i, &[0, 1, 2, 3, 4], &[-25.0, 48.0, -36.0, 16.0, -3.0], 1.0)
            } else if i == 1 {
                combine(f, i, &[-1, 0, 1, 2, 3], &[-3.0, -10.0, 18.0, -6.0, 1.0], 1.0)
            } else if i == n - 1 {
                // mirrored stencils flip both the offsets and the sign
                combine(f, i, &[0, 1, 2, 3, 4], &[-25.0, 48.0, -36.0, 16.0, -3.0], -1.0)
            } else if i == n - 2 {
                combine(f, i, &[-1, 0, 1, 2, 3], &[-3.0, -10.0, 18.0, -6.0, 1.0], -1.0)
            } else {
                combine(f, i, &[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], 1.0)
            };
            v * s
        })
        .collect()
}

/// Second derivative at every node. Needs at least six samples.
pub fn d2<T: Sample>(f: &[T], h: f64) -> Vec<T> {
    let n = f.len();
    assert!(n >= 6, "second-derivative stencil needs 6 samples, got {n}");
    let s = 1.0 / (12.0 * h * h);
    let edge0 = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    let edge1 = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
    (0..n)
        .map(|i| {
            // second derivatives are even: mirroring keeps the sign
            let mirrored = |offs: &[isize], w: &[f64]| {
                let mut acc = f[(i as isize - offs[0]) as usize] * w[0];
                for (o, c) in offs.iter().zip(w).skip(1) {
                    acc = acc + f[(i as isize - o) as usize] * *c;
                }
                acc
            };
            let v = if i == 0 {
                combine(f, i, &[0, 1, 2, 3, 4, 5], &edge0, 1.0)
            } else if i == 1 {
                combine(f, i, &[-1, 0, 1, 2, 3, 4], &edge1, 1.0)
            } else if i == n - 1 {
                mirrored(&[0, 1, 2, 3, 4, 5], &edge0)
            } else if i == n - 2 {
                mirrored(&[-1, 0, 1, 2, 3, 4], &edge1)
            } else {
                combine(f, i, &[-2, -1, 0, 1, 2], &[-1.0, 16.0, -30.0, 16.0, -1.0], 1.0)
            };
            v * s
        })
        .collect()
}

/// Running integral `F(x_i) = int_{x_0}^{x_i} f`, exact for cubics.
///
/// Each panel uses the cubic through the four nearest samples. Needs at least
/// four samples unless there is at most one panel.
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    if n == 3 {
        // quadratic through all three samples
        out[1] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
        out[2] = h / 3.0 * (f[0] + 4.0 * f[1] + f[2]);
        return out;
    }
    let w = h / 24.0;
    for i in 0..n - 1 {
        let panel = if i == 0 {
            w * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            w * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
        } else {
            w * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + panel;
    }
    out
}

/// Centred difference in time of two slices, `(next - prev) / (2 dt)`.
pub fn central<T: Sample>(prev: T, next: T, dt: f64) -> T {
    (next - prev) * (0.5 / dt)
}
