//! Curve families `γ(u, t)` evolving under a frame-decomposed flow
//! `∂γ/∂t = c1 T + c2 N + c3 B1 + c4 B2`.
//!
//! The parameter `u` runs over `[0, l]` with `l` the arclength of the initial
//! curve; `v = |∂γ/∂u|` is the speed and `∂/∂s = (1/v) ∂/∂u`. A flow is
//! inextensible when `v` does not change in time, which happens exactly when
//! [`inextensibility_defect`] vanishes.
//!
//! [`evolve`] steps the family explicitly in `t` (Euler or RK4) in one of two modes.
//! [`EvolutionMode::Position`] moves the positions and re-extracts frames and
//! curvatures from them at every step. [`EvolutionMode::Transport`] advances
//! frames and curvatures with the closed-form evolution equations of
//! [`dynamics`] instead.

pub mod dynamics;
mod io;

pub use dynamics::{frame_time_derivative, slice_dynamics, tangent_rates, SliceDynamics};
pub use io::{read_snapshot, write_drift_csv, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_RECORD_LEN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowfield::{Bindings, Coefficient, FieldError, FlowCoefficients, Var};
use crate::frames::{
    extract_frames_param, integrate_curve, CurvatureValues, Curvatures, Frame4, FrameError,
    FrameKind, GaugePolicy, IntegrateOptions, DEGENERACY_K1,
};
use crate::mink4::Vec4;
use crate::stencil::{self, Sample};

/// Frames whose metric residual exceeds this abort the evolution.
pub const FRAME_RESIDUAL_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid flow problem: {0}")]
    Invalid(String),
    #[error("coefficient c{} at u = {u}, t = {t}: {source}", slot + 1)]
    Coefficient { slot: usize, u: f64, t: f64, source: FieldError },
    #[error("coefficient c{} is defined by quadrature over a slice and has no pointwise value", .0 + 1)]
    NeedsSlice(usize),
    #[error("need at least {need} samples in u, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("tangent is {reason} at slice {slice}, node {index}")]
    DegenerateTangent { slice: usize, index: usize, reason: &'static str },
    #[error("first curvature {k1:e} below threshold at slice {slice}, node {index}")]
    DegenerateCurvature { slice: usize, index: usize, k1: f64 },
    #[error("frame residual {residual:e} exceeds {limit:e} at slice {slice}, node {index}")]
    FrameBlowUp { slice: usize, index: usize, residual: f64, limit: f64 },
    #[error("slice {slice}: {source}")]
    Frame { slice: usize, source: FrameError },
}

impl FlowError {
    /// Problems with the input, as opposed to numerical failures during a run.
    pub fn is_input_error(&self) -> bool {
        matches!(self, FlowError::Invalid(_) | FlowError::NeedsSlice(_) | FlowError::TooFewSamples { .. })
            || matches!(
                self,
                FlowError::Frame {
                    source: FrameError::InvalidFrame { .. } | FrameError::CurvatureConstraint(_),
                    ..
                }
            )
    }
}

/// One time slice of a [`CurveGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub t: f64,
    pub positions: Vec<Vec4>,
    pub frames: Vec<Frame4>,
    pub curvatures: Vec<CurvatureValues>,
    pub speed: Vec<f64>,
}

/// Samples `γ(u_i, t_j)` on a uniform grid, `u_i = i du`, `t_j = j dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveGrid {
    pub kind: FrameKind,
    pub du: f64,
    pub dt: f64,
    pub u: Vec<f64>,
    pub slices: Vec<Slice>,
}

/// Running arclength `s(u)` of one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Arclength {
    pub s: Vec<f64>,
    pub total: f64,
}

/// `∂s/∂t` along one slice, pointwise in `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArclengthRate {
    /// Central difference of the measured `s(u)` across neighbouring slices;
    /// `None` on the first and last slice.
    pub fd: Option<Vec<f64>>,
    /// Integral of [`dv_dt_formula`] from `0` to `u`.
    pub formula: Vec<f64>,
}

/// Total length of each slice relative to the first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftRow {
    pub t: f64,
    pub length: f64,
    pub drift: f64,
}

impl CurveGrid {
    pub fn num_u(&self) -> usize {
        self.u.len()
    }

    pub fn num_t(&self) -> usize {
        self.slices.len()
    }

    /// Speed `v(u_i, t_j)`.
    pub fn speed(&self, i: usize, j: usize) -> f64 {
        self.slices[j].speed[i]
    }

    pub fn arclength(&self, j: usize) -> Arclength {
        let s = stencil::cumulative_integral(&self.slices[j].speed, self.du);
        let total = *s.last().unwrap_or(&0.0);
        Arclength { s, total }
    }

    /// `(1/v) ∂f/∂u` on slice `j`.
    pub fn d_ds<T: Sample>(&self, field: &[T], j: usize) -> Vec<T> {
        d_ds(field, &self.slices[j].speed, self.du)
    }

    pub fn drift_series(&self) -> Vec<DriftRow> {
        let l0 = self.arclength(0).total;
        (0..self.num_t())
            .map(|j| {
                let length = self.arclength(j).total;
                DriftRow { t: self.slices[j].t, length, drift: (length - l0) / l0 }
            })
            .collect()
    }

    pub fn max_frame_residual(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.frames.iter().map(Frame4::max_residual))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn d_ds<T: Sample>(field: &[T], speed: &[f64], du: f64) -> Vec<T> {
    stencil::d1(field, du).into_iter().zip(speed).map(|(d, v)| d * (1.0 / v)).collect()
}

/// Speeds `|∂γ/∂u|` by fourth-order differences. On failure returns the
/// offending node and what was wrong with its tangent.
pub fn speeds(positions: &[Vec4], du: f64) -> Result<Vec<f64>, (usize, &'static str)> {
    stencil::d1(positions, du)
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let q = g.dot(*g);
            if q.abs().sqrt() < DEGENERACY_K1 {
                Err((i, "null or zero"))
            } else if q < 0.0 {
                Err((i, "timelike"))
            } else {
                Ok(q.sqrt())
            }
        })
        .collect()
}

/// Values and `u`-derivatives of the four coefficients along one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicedCoefficients {
    pub value: [Vec<f64>; 4],
    pub du: [Vec<f64>; 4],
}

impl SlicedCoefficients {
    pub fn at(&self, i: usize) -> [f64; 4] {
        std::array::from_fn(|k| self.value[k][i])
    }
}

/// Slot whose speed feeds the tangential stretch: `c2` for partially null
/// curves, `c4` for pseudo null curves.
pub(crate) fn stretch_slot(kind: FrameKind) -> usize {
    match kind {
        FrameKind::PartiallyNull => 1,
        FrameKind::PseudoNull => 3,
    }
}

/// Evaluate the coefficients on slice data. An inextensible `c1` is the
/// cumulative integral of its defining integrand, whose exact value is also
/// its `u`-derivative.
pub fn slice_coefficients(
    coeffs: &FlowCoefficients,
    u: &[f64],
    t: f64,
    k1: &[f64],
    speed: &[f64],
    du: f64,
) -> Result<SlicedCoefficients, FlowError> {
    let n = u.len();
    let mut value: [Vec<f64>; 4] = Default::default();
    let mut deriv: [Vec<f64>; 4] = Default::default();
    for (slot, c) in coeffs.c.iter().enumerate() {
        let Coefficient::Expr(e) = c else { continue };
        let de = e.differentiate(Var::U);
        let (mut vals, mut ders) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for &ui in u {
            let b = Bindings::ut(ui, t);
            let err = |source| FlowError::Coefficient { slot, u: ui, t, source };
            vals.push(e.eval(&b).map_err(err)?);
            ders.push(de.eval(&b).map_err(err)?);
        }
        value[slot] = vals;
        deriv[slot] = ders;
    }
    if coeffs.c[0] == Coefficient::Inextensible {
        let src = stretch_slot(coeffs.kind);
        let integrand: Vec<f64> = (0..n).map(|i| value[src][i] * k1[i] * speed[i]).collect();
        value[0] = stencil::cumulative_integral(&integrand, du);
        deriv[0] = integrand;
    }
    Ok(SlicedCoefficients { value, du: deriv })
}

fn slice_coefficients_of(grid: &CurveGrid, coeffs: &FlowCoefficients, j: usize) -> Result<SlicedCoefficients, FlowError> {
    let sl = &grid.slices[j];
    let k1: Vec<f64> = sl.curvatures.iter().map(|k| k.k1).collect();
    slice_coefficients(coeffs, &grid.u, sl.t, &k1, &sl.speed, grid.du)
}

/// `c1 T + c2 N + c3 B1 + c4 B2`.
pub fn combine_frame(c: [f64; 4], f: &Frame4) -> Vec4 {
    f.t * c[0] + f.n * c[1] + f.b1 * c[2] + f.b2 * c[3]
}

/// Flow velocity at one point. Fails for an inextensible `c1`, which only
/// exists on a whole slice.
pub fn flow_velocity(coeffs: &FlowCoefficients, frame: &Frame4, u: f64, t: f64) -> Result<Vec4, FlowError> {
    let mut c = [0.0; 4];
    for (slot, coef) in coeffs.c.iter().enumerate() {
        let e = coef.as_expr().ok_or(FlowError::NeedsSlice(slot))?;
        c[slot] = e
            .eval(&Bindings::ut(u, t))
            .map_err(|source| FlowError::Coefficient { slot, u, t, source })?;
    }
    Ok(combine_frame(c, frame))
}

fn stretch(kind: FrameKind, c: &SlicedCoefficients, curv: &[CurvatureValues], speed: &[f64]) -> Vec<f64> {
    let src = stretch_slot(kind);
    (0..speed.len()).map(|i| c.du[0][i] - c.value[src][i] * curv[i].k1 * speed[i]).collect()
}

/// Closed form of `∂v/∂t` along slice `j`: `∂c1/∂u - c2 k1 v` for partially
/// null curves, `∂c1/∂u - c4 k1 v` for pseudo null curves (`k1 = 0` gives
/// `∂c1/∂u` for a straight line).
pub fn dv_dt_formula(grid: &CurveGrid, coeffs: &FlowCoefficients, j: usize) -> Result<Vec<f64>, FlowError> {
    let c = slice_coefficients_of(grid, coeffs, j)?;
    let sl = &grid.slices[j];
    Ok(stretch(grid.kind, &c, &sl.curvatures, &sl.speed))
}

/// Pointwise inextensibility defect; the flow is inextensible at a node iff
/// it is zero. Numerically the same quantity as [`dv_dt_formula`].
pub fn inextensibility_defect(grid: &CurveGrid, coeffs: &FlowCoefficients, j: usize) -> Result<Vec<f64>, FlowError> {
    dv_dt_formula(grid, coeffs, j)
}

pub fn arclength_time_derivative(grid: &CurveGrid, coeffs: &FlowCoefficients, j: usize) -> Result<ArclengthRate, FlowError> {
    let formula = stencil::cumulative_integral(&dv_dt_formula(grid, coeffs, j)?, grid.du);
    let fd = (j > 0 && j + 1 < grid.num_t()).then(|| {
        let (a, b) = (grid.arclength(j - 1).s, grid.arclength(j + 1).s);
        a.iter().zip(&b).map(|(x, y)| stencil::central(*x, *y, grid.dt)).collect()
    });
    Ok(ArclengthRate { fd, formula })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    Position,
    Transport,
}

/// Explicit time integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    #[default]
    Euler,
    /// Classical fourth-order Runge-Kutta; position mode re-extracts frames
    /// at every stage.
    Rk4,
}

/// How null frame vectors are scaled across the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullGauge {
    /// Node 0 of each slice is matched to node 0 of the previous slice (the
    /// initial frame for the first), later nodes to their predecessor.
    Continuity,
    /// The timelike component of `B1` is `1` everywhere.
    FirstComponentUnit,
}

/// Everything [`evolve`] needs.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowProblem {
    pub kind: FrameKind,
    pub curvatures: Curvatures,
    pub frame0: Frame4,
    pub p0: Vec4,
    pub coeffs: FlowCoefficients,
    /// Length of the initial curve.
    pub l: f64,
    pub du: f64,
    /// Time horizon.
    pub w: f64,
    pub dt: f64,
    pub mode: EvolutionMode,
    pub gauge: NullGauge,
    pub stepper: Stepper,
}

impl FlowProblem {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Invalid(m));
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad(format!("curve length must be positive, got {}", self.l));
        }
        if !(self.du > 0.0 && self.du.is_finite()) {
            return bad(format!("du must be positive, got {}", self.du));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return bad(format!("time horizon must be non-negative, got {}", self.w));
        }
        if self.dt > self.du {
            return bad(format!("dt = {} exceeds du = {}; explicit stepping needs dt <= du", self.dt, self.du));
        }
        if self.coeffs.kind != self.kind {
            return bad("flow coefficients are for a different curve kind".into());
        }
        if self.coeffs.c[1..].contains(&Coefficient::Inextensible) {
            return Err(FlowError::NeedsSlice(1));
        }
        if self.num_u() < 6 {
            return Err(FlowError::TooFewSamples { need: 6, got: self.num_u() });
        }
        self.curvatures.validate(self.kind).map_err(|source| FlowError::Frame { slice: 0, source })
    }

    pub fn num_u(&self) -> usize {
        (self.l / self.du).round() as usize + 1
    }

    /// Number of time steps, `round(w / dt)`.
    pub fn steps(&self) -> usize {
        (self.w / self.dt).round() as usize
    }

    /// Same problem with both steps divided by `2^r`.
    pub fn refined(&self, r: u32) -> FlowProblem {
        let f = f64::from(2u32.pow(r));
        FlowProblem { du: self.du / f, dt: self.dt / f, ..self.clone() }
    }
}

/// Synthesise the initial curve on the `u` grid. RK4 runs on a sub-grid of
/// step at most `1e-3` so the samples carry no visible integration error.
pub fn initial_curve(p: &FlowProblem) -> Result<crate::frames::FramedCurve, FlowError> {
    let m = p.num_u() - 1;
    let du = p.l / m as f64;
    let sub = (du / 1e-3).ceil().max(1.0) as usize;
    let fine = integrate_curve(p.kind, &p.curvatures, &p.frame0, p.p0, (0.0, p.l), du / sub as f64, IntegrateOptions::default())
        .map_err(|source| FlowError::Frame { slice: 0, source })?;
    Ok(crate::frames::FramedCurve {
        kind: p.kind,
        ds: du,
        s: every(&fine.s, sub),
        positions: every(&fine.positions, sub),
        frames: every(&fine.frames, sub),
        curvatures: every(&fine.curvatures, sub),
    })
}

fn every<T: Clone>(v: &[T], n: usize) -> Vec<T> {
    v.iter().step_by(n).cloned().collect()
}

/// Run the problem for [`FlowProblem::steps`] steps.
pub fn evolve(p: &FlowProblem) -> Result<CurveGrid, FlowError> {
    evolve_steps(p, p.steps())
}

/// Run the problem for a given number of explicit steps.
pub fn evolve_steps(p: &FlowProblem, steps: usize) -> Result<CurveGrid, FlowError> {
    let mut grid = start(p)?;
    for j in 0..steps {
        let next = step(p, &grid, j)?;
        check_residuals(&next, j + 1)?;
        grid.slices.push(next);
    }
    Ok(grid)
}

/// Three slices at `t = -dt, 0, dt`: one step backwards and one forwards
/// from the initial curve, so that the middle slice is the synthesised curve
/// itself. With Euler steps the outer slices are `γ ± dt V`, so central
/// differences at `t = 0` are second order in `dt`.
pub fn evolve_around_start(p: &FlowProblem) -> Result<CurveGrid, FlowError> {
    let mut grid = start(p)?;
    let back = FlowProblem { dt: -p.dt, ..p.clone() };
    let before = step(&back, &grid, 0)?;
    check_residuals(&before, 0)?;
    let after = step(p, &grid, 0)?;
    check_residuals(&after, 2)?;
    grid.slices.insert(0, before);
    grid.slices.push(after);
    Ok(grid)
}

/// Grid holding only the initial slice.
fn start(p: &FlowProblem) -> Result<CurveGrid, FlowError> {
    p.validate()?;
    if p.mode == EvolutionMode::Transport
        && p.kind == FrameKind::PseudoNull
        && p.curvatures.k1 != crate::flowfield::Expr::Const(1.0)
    {
        return Err(FlowError::Invalid("transport mode for pseudo null curves needs k1 = 1".into()));
    }
    let init = initial_curve(p)?;
    let du = init.ds;
    let u: Vec<f64> = (0..init.len()).map(|i| i as f64 * du).collect();
    let first = match p.mode {
        EvolutionMode::Transport => {
            let speed = speeds(&init.positions, du).map_err(|(index, reason)| FlowError::DegenerateTangent { slice: 0, index, reason })?;
            Slice { t: 0.0, positions: init.positions, frames: init.frames, curvatures: init.curvatures, speed }
        }
        EvolutionMode::Position => position_slice(p, 0, 0.0, init.positions, &p.frame0, du)?,
    };
    check_residuals(&first, 0)?;
    Ok(CurveGrid { kind: p.kind, du, dt: p.dt, u, slices: vec![first] })
}

fn check_residuals(sl: &Slice, slice: usize) -> Result<(), FlowError> {
    for (index, f) in sl.frames.iter().enumerate() {
        let residual = f.max_residual();
        if !(residual <= FRAME_RESIDUAL_LIMIT) {
            return Err(FlowError::FrameBlowUp { slice, index, residual, limit: FRAME_RESIDUAL_LIMIT });
        }
    }
    Ok(())
}

fn position_slice(p: &FlowProblem, j: usize, t: f64, positions: Vec<Vec4>, reference: &Frame4, du: f64) -> Result<Slice, FlowError> {
    let speed = speeds(&positions, du).map_err(|(index, reason)| FlowError::DegenerateTangent { slice: j, index, reason })?;
    let gauge = match p.gauge {
        NullGauge::Continuity => GaugePolicy::ReferenceFrame(*reference),
        NullGauge::FirstComponentUnit => GaugePolicy::FirstComponentUnit,
    };
    let fc = extract_frames_param(&positions, 0.0, du, p.kind, gauge).map_err(|source| match source {
        FrameError::Degenerate { index, k1, .. } => FlowError::DegenerateCurvature { slice: j, index, k1 },
        source => FlowError::Frame { slice: j, source },
    })?;
    Ok(Slice { t, positions, frames: fc.frames, curvatures: fc.curvatures, speed })
}

/// Time derivative of a slice's state.
struct Rates {
    positions: Vec<Vec4>,
    /// Transport mode only.
    frames: Vec<[Vec4; 4]>,
    curvatures: Vec<[f64; 2]>,
}

fn rates(p: &FlowProblem, u: &[f64], sl: &Slice, du: f64, slice: usize) -> Result<Rates, FlowError> {
    let k1: Vec<f64> = sl.curvatures.iter().map(|k| k.k1).collect();
    let c = slice_coefficients(&p.coeffs, u, sl.t, &k1, &sl.speed, du)?;
    let positions = (0..u.len()).map(|i| combine_frame(c.at(i), &sl.frames[i])).collect();
    if p.mode == EvolutionMode::Position {
        return Ok(Rates { positions, frames: vec![], curvatures: vec![] });
    }
    let dynm = slice_dynamics(p.kind, &c, sl, du).map_err(|e| match e {
        FlowError::DegenerateCurvature { index, k1, .. } => FlowError::DegenerateCurvature { slice, index, k1 },
        e => e,
    })?;
    let frames = (0..u.len()).map(|i| frame_time_derivative(&sl.frames[i], dynm.rates_at(i), dynm.psi_at(i))).collect();
    let curvatures = (0..u.len()).map(|i| [dynm.k_t[0][i], dynm.k_t[1][i]]).collect();
    Ok(Rates { positions, frames, curvatures })
}

/// `base + dt Σ w_k r_k`, with frames re-extracted in position mode.
fn advance(
    p: &FlowProblem,
    base: &Slice,
    terms: &[(f64, &Rates)],
    dt: f64,
    t: f64,
    slice: usize,
    du: f64,
) -> Result<Slice, FlowError> {
    let m = base.positions.len();
    let combine = |get: &dyn Fn(&Rates) -> Vec4| terms.iter().fold(Vec4::ZERO, |acc, (w, r)| acc + get(r) * (w * dt));
    let positions: Vec<Vec4> = (0..m).map(|i| base.positions[i] + combine(&|r| r.positions[i])).collect();
    if p.mode == EvolutionMode::Position {
        return position_slice(p, slice, t, positions, &base.frames[0], du);
    }
    let mut frames = Vec::with_capacity(m);
    let mut curvatures = Vec::with_capacity(m);
    for i in 0..m {
        let f = base.frames[i].vectors();
        let v: [Vec4; 4] = std::array::from_fn(|k| f[k] + combine(&|r| r.frames[i][k]));
        frames.push(Frame4::from_vectors(p.kind, v));
        let kt: [f64; 2] = std::array::from_fn(|k| terms.iter().map(|(w, r)| w * dt * r.curvatures[i][k]).sum());
        let k = base.curvatures[i];
        curvatures.push(match p.kind {
            FrameKind::PartiallyNull => CurvatureValues::new(k.k1 + kt[0], k.k2 + kt[1], 0.0),
            FrameKind::PseudoNull => CurvatureValues::new(1.0, k.k2 + kt[0], k.k3 + kt[1]),
        });
    }
    let speed =
        speeds(&positions, du).map_err(|(index, reason)| FlowError::DegenerateTangent { slice, index, reason })?;
    Ok(Slice { t, positions, frames, curvatures, speed })
}

fn step(p: &FlowProblem, grid: &CurveGrid, j: usize) -> Result<Slice, FlowError> {
    let cur = &grid.slices[j];
    let (u, du, dt) = (&grid.u[..], grid.du, p.dt);
    let t = cur.t + dt;
    let r1 = rates(p, u, cur, du, j)?;
    match p.stepper {
        Stepper::Euler => advance(p, cur, &[(1.0, &r1)], dt, t, j + 1, du),
        Stepper::Rk4 => {
            let half = cur.t + 0.5 * dt;
            let s2 = advance(p, cur, &[(0.5, &r1)], dt, half, j, du)?;
            let r2 = rates(p, u, &s2, du, j)?;
            let s3 = advance(p, cur, &[(0.5, &r2)], dt, half, j, du)?;
            let r3 = rates(p, u, &s3, du, j)?;
            let s4 = advance(p, cur, &[(1.0, &r3)], dt, t, j, du)?;
            let r4 = rates(p, u, &s4, du, j)?;
            let w = 1.0 / 6.0;
            advance(p, cur, &[(w, &r1), (2.0 * w, &r2), (2.0 * w, &r3), (w, &r4)], dt, t, j + 1, du)
        }
    }
}
