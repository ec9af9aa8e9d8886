//! Closed-form time derivatives of frames and curvatures.
//!
//! Write `λ = (∂v/∂t)/v`. For a partially null curve (`k3 = 0`) the tangent
//! moves as `∂T/∂t = A N + C B1 + D B2` with
//!
//! ```text
//! A = ∂c2/∂s + k1 c1 - k2 c4,   C = ∂c3/∂s + k2 c2,   D = ∂c4/∂s
//! ```
//!
//! and the metric relations force
//!
//! ```text
//! ∂N/∂t  = -A T + ψ2 B1 + ψ1 B2
//! ∂B1/∂t = -D T - ψ1 N + ψ3 B1
//! ∂B2/∂t = -C T - ψ2 N - ψ3 B2
//! ```
//!
//! Matching `∂t ∂s = ∂s ∂t - λ ∂s` on `T` and `N` gives `k1 ψ1 = ∂D/∂s`,
//! `k1 ψ2 = ∂C/∂s + k2 A`, `∂ψ3/∂s = k2 ψ1` and
//!
//! ```text
//! ∂k1/∂t = ∂A/∂s - k2 D - λ k1
//! ∂k2/∂t = ∂ψ2/∂s + k1 C - k2 ψ3 - λ k2
//! ```
//!
//! `ψ3` is fixed up to a function of `t` by the gauge of `B1`; it is taken as
//! `0` at `u = 0`.
//!
//! For a pseudo null curve with `k1 = 1`, `∂T/∂t = P N + Q B1 + R B2` with
//!
//! ```text
//! P = c1 + ∂c2/∂s + k3 c3,   Q = k2 c2 + ∂c3/∂s - k3 c4,   R = ∂c4/∂s - k2 c3
//! ```
//!
//! and
//!
//! ```text
//! ∂N/∂t  = -R T + ψ2 N + ψ1 B1
//! ∂B1/∂t = -Q T + ψ3 N - ψ1 B2
//! ∂B2/∂t = -P T - ψ3 B1 - ψ2 B2
//! ψ1 = k2 P - k3 R + ∂Q/∂s,   ψ2 = ∂P/∂s + k3 Q - λ,   k2 ψ3 = ∂ψ2/∂s - R + k3 ψ1
//! ∂k2/∂t = ∂ψ1/∂s + ψ2 k2 - λ k2
//! ∂k3/∂t = ∂ψ3/∂s - Q - ψ2 k3 - λ k3
//! ```
//!
//! `N` stays null only while `∂R/∂s = k2 Q`.

use super::{d_ds, stretch, FlowError, Slice, SlicedCoefficients};
use crate::frames::{CurvatureValues, Frame4, FrameKind, DEGENERACY_K1};
use crate::mink4::Vec4;
use crate::stencil;

/// Rates and closed-form ψ's along one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceDynamics {
    /// `(∂v/∂t) / v`.
    pub lambda: Vec<f64>,
    /// `(A, C, D)` for partially null, `(P, Q, R)` for pseudo null curves.
    pub rates: [Vec<f64>; 3],
    pub psi: [Vec<f64>; 3],
    /// `(∂k1/∂t, ∂k2/∂t)` for partially null, `(∂k2/∂t, ∂k3/∂t)` for pseudo null curves.
    pub k_t: [Vec<f64>; 2],
}

impl SliceDynamics {
    pub fn rates_at(&self, i: usize) -> [f64; 3] {
        std::array::from_fn(|k| self.rates[k][i])
    }

    pub fn psi_at(&self, i: usize) -> [f64; 3] {
        std::array::from_fn(|k| self.psi[k][i])
    }
}

/// Tangent rates and `λ` from coefficient values; see the module docs.
pub fn tangent_rates(
    kind: FrameKind,
    c: &SlicedCoefficients,
    curv: &[CurvatureValues],
    speed: &[f64],
) -> ([Vec<f64>; 3], Vec<f64>) {
    let n = speed.len();
    let ds = |slot: usize, i: usize| c.du[slot][i] / speed[i];
    let val = |slot: usize, i: usize| c.value[slot][i];
    let lambda: Vec<f64> = stretch(kind, c, curv, speed).iter().zip(speed).map(|(x, v)| x / v).collect();
    let mut r: [Vec<f64>; 3] = Default::default();
    for i in 0..n {
        let CurvatureValues { k1, k2, k3 } = curv[i];
        let abc = match kind {
            FrameKind::PartiallyNull => [
                ds(1, i) + k1 * val(0, i) - k2 * val(3, i),
                ds(2, i) + k2 * val(1, i),
                ds(3, i),
            ],
            FrameKind::PseudoNull => [
                k1 * val(0, i) + ds(1, i) + k3 * val(2, i),
                k2 * val(1, i) + ds(2, i) - k3 * val(3, i),
                ds(3, i) - k2 * val(2, i),
            ],
        };
        for k in 0..3 {
            r[k].push(abc[k]);
        }
    }
    (r, lambda)
}

/// Closed-form ψ's and curvature rates along a slice.
pub fn slice_dynamics(kind: FrameKind, c: &SlicedCoefficients, slice: &Slice, du: f64) -> Result<SliceDynamics, FlowError> {
    let curv = &slice.curvatures;
    let v = &slice.speed;
    let n = v.len();
    let (rates, lambda) = tangent_rates(kind, c, curv, v);
    let ds = |f: &[f64]| d_ds(f, v, du);
    let k = |sel: fn(&CurvatureValues) -> f64| curv.iter().map(sel).collect::<Vec<f64>>();
    let (k1, k2, k3) = (k(|c| c.k1), k(|c| c.k2), k(|c| c.k3));
    match kind {
        FrameKind::PartiallyNull => {
            if let Some(index) = k1.iter().position(|x| x.abs() < DEGENERACY_K1) {
                return Err(FlowError::DegenerateCurvature { slice: 0, index, k1: k1[index] });
            }
            let [a, cc, d] = &rates;
            let (a_s, c_s, d_s) = (ds(a), ds(cc), ds(d));
            let psi1: Vec<f64> = (0..n).map(|i| d_s[i] / k1[i]).collect();
            let psi2: Vec<f64> = (0..n).map(|i| (c_s[i] + a[i] * k2[i]) / k1[i]).collect();
            let integrand: Vec<f64> = (0..n).map(|i| k2[i] * psi1[i] * v[i]).collect();
            let psi3 = stencil::cumulative_integral(&integrand, du);
            let psi2_s = ds(&psi2);
            let k1_t = (0..n).map(|i| a_s[i] - k2[i] * d[i] - lambda[i] * k1[i]).collect();
            let k2_t = (0..n)
                .map(|i| psi2_s[i] + k1[i] * cc[i] - k2[i] * psi3[i] - lambda[i] * k2[i])
                .collect();
            Ok(SliceDynamics { lambda, rates, psi: [psi1, psi2, psi3], k_t: [k1_t, k2_t] })
        }
        FrameKind::PseudoNull => {
            let [p, q, r] = &rates;
            let (p_s, q_s) = (ds(p), ds(q));
            let psi1: Vec<f64> = (0..n).map(|i| k2[i] * p[i] - k3[i] * r[i] + q_s[i]).collect();
            let psi2: Vec<f64> = (0..n).map(|i| p_s[i] + k3[i] * q[i] - lambda[i]).collect();
            let psi2_s = ds(&psi2);
            // ψ3 is undetermined where k2 vanishes
            let psi3: Vec<f64> = (0..n)
                .map(|i| {
                    if k2[i].abs() < DEGENERACY_K1 {
                        0.0
                    } else {
                        (psi2_s[i] - r[i] + k3[i] * psi1[i]) / k2[i]
                    }
                })
                .collect();
            let (psi1_s, psi3_s) = (ds(&psi1), ds(&psi3));
            let k2_t = (0..n).map(|i| psi1_s[i] + psi2[i] * k2[i] - lambda[i] * k2[i]).collect();
            let k3_t = (0..n)
                .map(|i| psi3_s[i] - q[i] - psi2[i] * k3[i] - lambda[i] * k3[i])
                .collect();
            Ok(SliceDynamics { lambda, rates, psi: [psi1, psi2, psi3], k_t: [k2_t, k3_t] })
        }
    }
}

/// `(∂T/∂t, ∂N/∂t, ∂B1/∂t, ∂B2/∂t)` from tangent rates and ψ's.
pub fn frame_time_derivative(f: &Frame4, rates: [f64; 3], psi: [f64; 3]) -> [Vec4; 4] {
    let [psi1, psi2, psi3] = psi;
    match f.kind {
        FrameKind::PartiallyNull => {
            let [a, c, d] = rates;
            [
                f.n * a + f.b1 * c + f.b2 * d,
                f.t * (-a) + f.b1 * psi2 + f.b2 * psi1,
                f.t * (-d) - f.n * psi1 + f.b1 * psi3,
                f.t * (-c) - f.n * psi2 - f.b2 * psi3,
            ]
        }
        FrameKind::PseudoNull => {
            let [p, q, r] = rates;
            [
                f.n * p + f.b1 * q + f.b2 * r,
                f.t * (-r) + f.n * psi2 + f.b1 * psi1,
                f.t * (-q) + f.n * psi3 - f.b2 * psi1,
                f.t * (-p) - f.b1 * psi3 - f.b2 * psi2,
            ]
        }
    }
}
