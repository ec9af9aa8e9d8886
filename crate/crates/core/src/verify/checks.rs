//! Residuals of the evolution identities on one time slice.

use super::VerifyError;
use crate::flow::{d_ds, slice_coefficients, tangent_rates, CurveGrid, SlicedCoefficients};
use crate::flowfield::FlowCoefficients;
use crate::frames::{frenet_apply, FrameKind};
use crate::mink4::Vec4;
use crate::stencil;

/// Relative size below which a guard denominator excludes a node.
pub const GUARD_RELATIVE: f64 = 1e-6;
/// Fraction of evaluation nodes that must survive the guard.
pub const MIN_SUPPORT: f64 = 0.5;

/// One alternative form of an identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Variant {
    pub tag: &'static str,
    /// Whether this is the form as displayed in the source.
    pub printed: bool,
}

/// An identity measured on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub name: &'static str,
    pub variant: Option<Variant>,
    pub max_abs: f64,
    pub rms: f64,
    /// `max(1, largest term magnitude)` over the evaluation nodes.
    pub scale: f64,
    /// Nodes that passed the guard, and nodes considered.
    pub used: usize,
    pub total: usize,
}

impl Measurement {
    pub fn supported(&self) -> bool {
        self.total > 0 && self.used as f64 >= MIN_SUPPORT * self.total as f64
    }
}

/// Per-node `lhs - rhs` with an optional guard denominator.
struct Identity<'a> {
    name: &'static str,
    variant: Option<Variant>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    guard: Option<&'a [f64]>,
}

fn variant(tag: &'static str, printed: bool) -> Option<Variant> {
    Some(Variant { tag, printed })
}

/// Slice data and derived fields shared by all checks.
///
/// Time derivatives are central differences between the neighbouring
/// slices; `s`-derivatives use the five-point stencils of
/// [`crate::stencil`] divided by the speed.
pub struct Probe<'g> {
    pub grid: &'g CurveGrid,
    pub j: usize,
    /// Nodes at each end excluded from evaluation.
    pub margin: usize,
    coeff: SlicedCoefficients,
    rates: [Vec<f64>; 3],
    lambda: Vec<f64>,
    /// `∂F/∂t` for `T, N, B1, B2`.
    frame_t: Vec<[Vec4; 4]>,
    k_t: [Vec<f64>; 3],
    v_t: Vec<f64>,
    psi: [Vec<f64>; 3],
}

fn central_series<T: stencil::Sample>(a: &[T], b: &[T], dt: f64) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| stencil::central(*x, *y, dt)).collect()
}

impl<'g> Probe<'g> {
    pub fn new(grid: &'g CurveGrid, coeffs: &FlowCoefficients, j: usize, margin: usize) -> Result<Self, VerifyError> {
        if grid.num_t() < 3 {
            return Err(VerifyError::TooFewSlices { need: 3, got: grid.num_t() });
        }
        if j == 0 || j + 1 >= grid.num_t() {
            return Err(VerifyError::NotInterior(j));
        }
        if coeffs.kind != grid.kind {
            return Err(VerifyError::KindMismatch);
        }
        if grid.num_u() <= 2 * margin + 4 {
            return Err(VerifyError::TooFewNodes { margin, got: grid.num_u() });
        }
        let (prev, sl, next) = (&grid.slices[j - 1], &grid.slices[j], &grid.slices[j + 1]);
        let dt = grid.dt;
        let k1: Vec<f64> = sl.curvatures.iter().map(|k| k.k1).collect();
        let coeff = slice_coefficients(coeffs, &grid.u, sl.t, &k1, &sl.speed, grid.du)?;
        let (rates, lambda) = tangent_rates(grid.kind, &coeff, &sl.curvatures, &sl.speed);
        let frame_t: Vec<[Vec4; 4]> = (0..grid.num_u())
            .map(|i| {
                let (a, b) = (prev.frames[i].vectors(), next.frames[i].vectors());
                std::array::from_fn(|k| stencil::central(a[k], b[k], dt))
            })
            .collect();
        let ks = |f: fn(&crate::frames::CurvatureValues) -> f64| {
            let a: Vec<f64> = prev.curvatures.iter().map(f).collect();
            let b: Vec<f64> = next.curvatures.iter().map(f).collect();
            central_series(&a, &b, dt)
        };
        let k_t = [ks(|k| k.k1), ks(|k| k.k2), ks(|k| k.k3)];
        let v_t = central_series(&prev.speed, &next.speed, dt);
        let psi = psi_from(grid, j, &frame_t);
        Ok(Probe { grid, j, margin, coeff, rates, lambda, frame_t, k_t, v_t, psi })
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.margin..self.grid.num_u() - self.margin
    }

    fn ds(&self, f: &[f64]) -> Vec<f64> {
        d_ds(f, &self.grid.slices[self.j].speed, self.grid.du)
    }

    fn curv(&self) -> [Vec<f64>; 3] {
        let c = &self.grid.slices[self.j].curvatures;
        [c.iter().map(|k| k.k1).collect(), c.iter().map(|k| k.k2).collect(), c.iter().map(|k| k.k3).collect()]
    }

    /// Coefficient values and their first and second `s`-derivatives.
    fn coefficient(&self, slot: usize) -> [Vec<f64>; 3] {
        let v = &self.grid.slices[self.j].speed;
        let value = self.coeff.value[slot].clone();
        let first: Vec<f64> = self.coeff.du[slot].iter().zip(v).map(|(d, v)| d / v).collect();
        let second = self.ds(&first);
        [value, first, second]
    }

    /// Extracted `(ψ1, ψ2, ψ3)` on this slice.
    pub fn psi(&self) -> &[Vec<f64>; 3] {
        &self.psi
    }

    fn measure(&self, id: Identity) -> Measurement {
        let range = self.range();
        let total = range.len();
        let cut = id.guard.map(|g| {
            let top = range.clone().map(|i| g[i].abs()).fold(0.0, f64::max);
            GUARD_RELATIVE * top.max(1.0)
        });
        let (mut max_abs, mut sq, mut scale, mut used) = (0.0_f64, 0.0, 1.0_f64, 0);
        for i in range {
            if let (Some(g), Some(cut)) = (id.guard, cut) {
                if g[i].abs() < cut {
                    continue;
                }
            }
            let r = id.lhs[i] - id.rhs[i];
            max_abs = max_abs.max(r.abs());
            sq += r * r;
            scale = scale.max(id.lhs[i].abs()).max(id.rhs[i].abs());
            used += 1;
        }
        let rms = if used > 0 { (sq / used as f64).sqrt() } else { 0.0 };
        Measurement { name: id.name, variant: id.variant, max_abs, rms, scale, used, total }
    }

    /// Vector identity measured component-wise through the largest component.
    fn measure_vec(&self, name: &'static str, variant: Option<Variant>, lhs: &[Vec4], rhs: &[Vec4]) -> Measurement {
        let gap: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| (*a - *b).max_abs()).collect();
        let size: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a.max_abs().max(b.max_abs())).collect();
        let mut m = self.measure(Identity { name, variant, lhs: gap, rhs: vec![0.0; size.len()], guard: None });
        let range = self.range();
        m.scale = range.map(|i| size[i]).fold(1.0, f64::max);
        m
    }

    fn frames(&self) -> &[crate::frames::Frame4] {
        &self.grid.slices[self.j].frames
    }

    /// `∂F/∂t` against the frame evolution equations with extracted ψ's.
    pub fn frame_evolution(&self) -> Vec<Measurement> {
        let [r0, r1, r2] = &self.rates;
        let [p1, p2, p3] = &self.psi;
        let n = self.grid.num_u();
        let f = self.frames();
        let ft = |k: usize| -> Vec<Vec4> { self.frame_t.iter().map(|x| x[k]).collect() };
        let build = |g: &dyn Fn(usize) -> Vec4| -> Vec<Vec4> { (0..n).map(g).collect() };
        match self.grid.kind {
            FrameKind::PartiallyNull => {
                let (a, c, d) = (r0, r1, r2);
                vec![
                    self.measure_vec("pn_frame_T", None, &ft(0), &build(&|i| f[i].n * a[i] + f[i].b1 * c[i] + f[i].b2 * d[i])),
                    self.measure_vec("pn_frame_N", None, &ft(1), &build(&|i| f[i].t * -a[i] + f[i].b1 * p2[i] + f[i].b2 * p1[i])),
                    self.measure_vec("pn_frame_B1", None, &ft(2), &build(&|i| f[i].t * -d[i] - f[i].n * p1[i] + f[i].b1 * p3[i])),
                    self.measure_vec(
                        "pn_frame_B2",
                        variant("-psi3_B2", false),
                        &ft(3),
                        &build(&|i| f[i].t * -c[i] - f[i].n * p2[i] - f[i].b2 * p3[i]),
                    ),
                    self.measure_vec(
                        "pn_frame_B2",
                        variant("+psi3_B2", true),
                        &ft(3),
                        &build(&|i| f[i].t * -c[i] - f[i].n * p2[i] + f[i].b2 * p3[i]),
                    ),
                ]
            }
            FrameKind::PseudoNull => {
                let (p, q, r) = (r0, r1, r2);
                vec![
                    self.measure_vec("psn_frame_T", None, &ft(0), &build(&|i| f[i].n * p[i] + f[i].b1 * q[i] + f[i].b2 * r[i])),
                    self.measure_vec("psn_frame_N", None, &ft(1), &build(&|i| f[i].t * -r[i] + f[i].n * p2[i] + f[i].b1 * p1[i])),
                    self.measure_vec("psn_frame_B1", None, &ft(2), &build(&|i| f[i].t * -q[i] + f[i].n * p3[i] - f[i].b2 * p1[i])),
                    self.measure_vec("psn_frame_B2", None, &ft(3), &build(&|i| f[i].t * -p[i] - f[i].b1 * p3[i] - f[i].b2 * p2[i])),
                ]
            }
        }
    }

    /// `∂k1/∂t = ∂A/∂s - k2 ∂c4/∂s - λ k1` (partially null).
    pub fn k1_evolution(&self) -> Vec<Measurement> {
        if self.grid.kind != FrameKind::PartiallyNull {
            return vec![];
        }
        let [k1, k2, _] = self.curv();
        let a_s = self.ds(&self.rates[0]);
        let d = &self.rates[2];
        let rhs = (0..k1.len()).map(|i| a_s[i] - k2[i] * d[i] - self.lambda[i] * k1[i]).collect();
        vec![self.measure(Identity { name: "pn_k1_evolution", variant: None, lhs: self.k_t[0].clone(), rhs, guard: None })]
    }

    /// The `B2` and `B1` component matchings: `ψ1 k1 = ∂²c4/∂s²` (guarded by
    /// `ψ1`) and `k1 ψ2 = ∂C/∂s + A k2`.
    pub fn psi_balance_pn(&self) -> Vec<Measurement> {
        if self.grid.kind != FrameKind::PartiallyNull {
            return vec![];
        }
        let [k1, k2, _] = self.curv();
        let [p1, p2, _] = &self.psi;
        let n = k1.len();
        let [b1, _, _] = self.coefficient(0);
        let [b2, b2_s, _] = self.coefficient(1);
        let [_, _, b3_ss] = self.coefficient(2);
        let [b4, _, b4_ss] = self.coefficient(3);
        let b2k2_s = self.ds(&(0..n).map(|i| b2[i] * k2[i]).collect::<Vec<_>>());
        let rhs2 = (0..n)
            .map(|i| b3_ss[i] + b2k2_s[i] + b2_s[i] * k2[i] + b1[i] * k1[i] * k2[i] - b4[i] * k2[i] * k2[i])
            .collect();
        vec![
            self.measure(Identity {
                name: "pn_psi1_k1",
                variant: None,
                lhs: (0..n).map(|i| p1[i] * k1[i]).collect(),
                rhs: b4_ss,
                guard: Some(p1),
            }),
            self.measure(Identity {
                name: "pn_psi2_k1",
                variant: None,
                lhs: (0..n).map(|i| p2[i] * k1[i]).collect(),
                rhs: rhs2,
                guard: None,
            }),
        ]
    }
}

/// `(⟨∂N/∂t, B1⟩, ⟨∂N/∂t, B2⟩, ⟨∂B1/∂t, B2⟩)` on slice `j`.
fn psi_from(grid: &CurveGrid, j: usize, frame_t: &[[Vec4; 4]]) -> [Vec<f64>; 3] {
    let f = &grid.slices[j].frames;
    let mut psi: [Vec<f64>; 3] = Default::default();
    for (i, d) in frame_t.iter().enumerate() {
        psi[0].push(d[1].dot(f[i].b1));
        psi[1].push(d[1].dot(f[i].b2));
        psi[2].push(d[2].dot(f[i].b2));
    }
    psi
}

impl Probe<'_> {
    /// `k1 ∂c4/∂s = -∂ψ1/∂s` (guarded by `∂c4/∂s`) and `k2 ψ1 = ∂ψ3/∂s`
    /// (guarded by `ψ1`).
    pub fn psi_curvatures_pn(&self) -> Vec<Measurement> {
        if self.grid.kind != FrameKind::PartiallyNull {
            return vec![];
        }
        let [k1, k2, _] = self.curv();
        let [p1, _, p3] = &self.psi;
        let n = k1.len();
        let [_, b4_s, _] = self.coefficient(3);
        let p1_s = self.ds(p1);
        let p3_s = self.ds(p3);
        vec![
            self.measure(Identity {
                name: "pn_k1_from_psi1",
                variant: None,
                lhs: (0..n).map(|i| k1[i] * b4_s[i]).collect(),
                rhs: p1_s.iter().map(|x| -x).collect(),
                guard: Some(&b4_s),
            }),
            self.measure(Identity {
                name: "pn_k2_from_psi3",
                variant: None,
                lhs: (0..n).map(|i| k2[i] * p1[i]).collect(),
                rhs: p3_s,
                guard: Some(p1),
            }),
        ]
    }

    /// `∂k2/∂t = ∂ψ2/∂s + k1 ∂c3/∂s ± c2 k1 k2 ± ψ3 k2 - λ k2` in all four
    /// sign combinations.
    pub fn k2_evolution_pn(&self) -> Vec<Measurement> {
        if self.grid.kind != FrameKind::PartiallyNull {
            return vec![];
        }
        let [k1, k2, _] = self.curv();
        let [_, p2, p3] = &self.psi;
        let n = k1.len();
        let [b2, _, _] = self.coefficient(1);
        let [_, b3_s, _] = self.coefficient(2);
        let p2_s = self.ds(p2);
        let forms: [(&'static str, bool, f64, f64); 4] = [
            ("-b2k1k2,-psi3k2", true, -1.0, -1.0),
            ("+b2k1k2,-psi3k2", false, 1.0, -1.0),
            ("-b2k1k2,+psi3k2", false, -1.0, 1.0),
            ("+b2k1k2,+psi3k2", false, 1.0, 1.0),
        ];
        forms
            .iter()
            .map(|&(tag, printed, a, b)| {
                let rhs = (0..n)
                    .map(|i| {
                        p2_s[i] + b3_s[i] * k1[i] + a * b2[i] * k1[i] * k2[i] + b * p3[i] * k2[i]
                            - self.lambda[i] * k2[i]
                    })
                    .collect();
                self.measure(Identity {
                    name: "pn_k2_evolution",
                    variant: variant(tag, printed),
                    lhs: self.k_t[1].clone(),
                    rhs,
                    guard: None,
                })
            })
            .collect()
    }

    /// The six pseudo null identities. Two of them are measured in two forms
    /// (`α2 k2` against `α2 k2²`, `ψ2 k3` against `ψ3 k2`) and two under both
    /// readings of the derivative on the left (`s` against `t`). The `-λ`
    /// terms vanish for inextensible flows.
    pub fn pseudo_null_system(&self) -> Vec<Measurement> {
        if self.grid.kind != FrameKind::PseudoNull {
            return vec![];
        }
        let [_, k2, k3] = self.curv();
        let [p1, p2, p3] = &self.psi;
        let n = k2.len();
        let lam = &self.lambda;
        let [a1, a1_s, _] = self.coefficient(0);
        let [a2, a2_s, a2_ss] = self.coefficient(1);
        let [a3, a3_s, a3_ss] = self.coefficient(2);
        let [a4, a4_s, a4_ss] = self.coefficient(3);
        let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a * b).collect() };
        let (a2k2_s, a4k3_s, a3k3_s, a3k2_s) =
            (self.ds(&prod(&a2, &k2)), self.ds(&prod(&a4, &k3)), self.ds(&prod(&a3, &k3)), self.ds(&prod(&a3, &k2)));
        let (k2_s, k3_s) = (self.ds(&k2), self.ds(&k3));
        let (p1_s, p2_s, p3_s) = (self.ds(p1), self.ds(p2), self.ds(p3));
        let col = |g: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..n).map(g).collect() };
        let mut out = vec![
            self.measure(Identity {
                name: "psn_psi1",
                variant: None,
                lhs: p1.clone(),
                rhs: col(&|i| {
                    a3_ss[i] + a2k2_s[i] - a4k3_s[i] - a4_s[i] * k3[i]
                        + a2_s[i] * k2[i]
                        + a1[i] * k2[i]
                        + 2.0 * a3[i] * k3[i] * k2[i]
                }),
                guard: None,
            }),
            self.measure(Identity {
                name: "psn_psi2",
                variant: None,
                lhs: p2.clone(),
                rhs: col(&|i| {
                    a2_ss[i] + a1_s[i] + a3k3_s[i] + a3_s[i] * k3[i] + a2[i] * k2[i] * k3[i] - a4[i] * k3[i] * k3[i]
                        - lam[i]
                }),
                guard: None,
            }),
        ];
        let null_lhs = col(&|i| a4_ss[i] - a3k2_s[i] - a3_s[i] * k2[i] + a4[i] * k2[i] * k3[i]);
        for (tag, printed, pow) in [("-a2k2", true, 1), ("-a2k2^2", false, 2)] {
            out.push(self.measure(Identity {
                name: "psn_null_preservation",
                variant: variant(tag, printed),
                lhs: null_lhs.clone(),
                rhs: col(&|i| a2[i] * k2[i].powi(pow)),
                guard: None,
            }));
        }
        let k3_rhs = col(&|i| p3_s[i] - a3_s[i] - a2[i] * k2[i] + a4[i] * k3[i] - p2[i] * k3[i] - lam[i] * k3[i]);
        for (tag, printed, lhs) in [("d/ds", true, &k3_s), ("d/dt", false, &self.k_t[2])] {
            out.push(self.measure(Identity {
                name: "psn_k3_evolution",
                variant: variant(tag, printed),
                lhs: lhs.clone(),
                rhs: k3_rhs.clone(),
                guard: None,
            }));
        }
        let k2_rhs = col(&|i| p1_s[i] + p2[i] * k2[i] - lam[i] * k2[i]);
        for (tag, printed, lhs) in [("d/ds", true, &k2_s), ("d/dt", false, &self.k_t[1])] {
            out.push(self.measure(Identity {
                name: "psn_k2_evolution",
                variant: variant(tag, printed),
                lhs: lhs.clone(),
                rhs: k2_rhs.clone(),
                guard: None,
            }));
        }
        for (tag, printed, last) in [("+psi2k3", true, prod(p2, &k3)), ("+psi3k2", false, prod(p3, &k2))] {
            out.push(self.measure(Identity {
                name: "psn_psi2_derivative",
                variant: variant(tag, printed),
                lhs: p2_s.clone(),
                rhs: col(&|i| a4_s[i] - a3[i] * k2[i] - p1[i] * k3[i] + last[i]),
                guard: None,
            }));
        }
        out
    }

    /// Inner products fixed by the metric relations.
    pub fn metric_pairings(&self) -> Vec<Measurement> {
        let f = self.frames();
        let n = self.grid.num_u();
        let pair = |a: &dyn Fn(usize) -> Vec4, k: usize| -> Vec<f64> { (0..n).map(|i| a(i).dot(self.frame_t[i][k])).collect() };
        let zero = vec![0.0; n];
        let id = |name, lhs, rhs| self.measure(Identity { name, variant: None, lhs, rhs, guard: None });
        match self.grid.kind {
            FrameKind::PartiallyNull => {
                let neg = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<f64>>();
                vec![
                    id("pn_pairing_N_Nt", pair(&|i| f[i].n, 1), zero.clone()),
                    id("pn_pairing_B1_B1t", pair(&|i| f[i].b1, 2), zero.clone()),
                    id("pn_pairing_B2_B2t", pair(&|i| f[i].b2, 3), zero),
                    id("pn_pairing_T_Nt", pair(&|i| f[i].t, 1), neg(&self.rates[0])),
                    id("pn_pairing_N_B1t", pair(&|i| f[i].n, 2), neg(&self.psi[0])),
                    id("pn_pairing_B1_B2t", pair(&|i| f[i].b1, 3), neg(&self.psi[2])),
                ]
            }
            FrameKind::PseudoNull => vec![
                id("psn_pairing_T_Tt", pair(&|i| f[i].t, 0), zero.clone()),
                id("psn_pairing_N_Nt", pair(&|i| f[i].n, 1), zero.clone()),
                id("psn_pairing_B1_B1t", pair(&|i| f[i].b1, 2), zero.clone()),
                id("psn_pairing_B2_B2t", pair(&|i| f[i].b2, 3), zero),
            ],
        }
    }

    /// `∂t(v F')` from neighbouring slices against `∂u(∂F/∂t)`, where `F'`
    /// is given by the Frenet system with stored curvatures.
    pub fn mixed_partials(&self) -> Vec<Measurement> {
        let g = self.grid;
        let n = g.num_u();
        let scaled = |j: usize| -> Vec<[Vec4; 4]> {
            let sl = &g.slices[j];
            (0..n).map(|i| frenet_apply(&sl.frames[i], sl.curvatures[i]).map(|x| x * sl.speed[i])).collect()
        };
        let (a, b) = (scaled(self.j - 1), scaled(self.j + 1));
        let names = match g.kind {
            FrameKind::PartiallyNull => ["pn_mixed_partial_T", "pn_mixed_partial_N", "pn_mixed_partial_B1", "pn_mixed_partial_B2"],
            FrameKind::PseudoNull => ["psn_mixed_partial_T", "psn_mixed_partial_N", "psn_mixed_partial_B1", "psn_mixed_partial_B2"],
        };
        (0..4)
            .map(|k| {
                let lhs: Vec<Vec4> = (0..n).map(|i| stencil::central(a[i][k], b[i][k], g.dt)).collect();
                let ft: Vec<Vec4> = self.frame_t.iter().map(|x| x[k]).collect();
                let rhs = stencil::d1(&ft, g.du);
                self.measure_vec(names[k], None, &lhs, &rhs)
            })
            .collect()
    }

    /// `∂v/∂t` against its closed form `λ v`.
    pub fn speed_evolution(&self) -> Vec<Measurement> {
        let v = &self.grid.slices[self.j].speed;
        let name = match self.grid.kind {
            FrameKind::PartiallyNull => "pn_speed_evolution",
            FrameKind::PseudoNull => "psn_speed_evolution",
        };
        let rhs = self.lambda.iter().zip(v).map(|(l, v)| l * v).collect();
        vec![self.measure(Identity { name, variant: None, lhs: self.v_t.clone(), rhs, guard: None })]
    }

    /// Every check applicable to the grid's kind, in a fixed order.
    pub fn all(&self) -> Vec<Measurement> {
        let mut out = self.mixed_partials();
        out.extend(self.speed_evolution());
        out.extend(self.metric_pairings());
        out.extend(self.frame_evolution());
        out.extend(self.k1_evolution());
        out.extend(self.psi_balance_pn());
        out.extend(self.psi_curvatures_pn());
        out.extend(self.k2_evolution_pn());
        out.extend(self.pseudo_null_system());
        out
    }
}
