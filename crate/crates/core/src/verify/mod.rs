//! Finite-difference verification of the evolution identities.
//!
//! A verification run takes one Euler step backwards and one forwards from
//! the initial curve on a ladder of grids, each halving `du` and `dt`,
//! and measures every identity on the initial slice. Time derivatives are central differences of stored
//! slices, `s`-derivatives are five-point stencils, and nodes within a fixed
//! physical margin of the ends are excluded because nested one-sided
//! stencils are less accurate there.
//!
//! An identity passes when its residual on the finest grid is at most
//! `residual · scale` and the observed order under halving is at least
//! `order`; residuals below `exact · scale` on every grid pass outright.
//! Identities that divide by a field are checked in cross-multiplied form and
//! skip nodes where the divisor is tiny.

mod checks;
mod report;

pub use checks::{Measurement, Probe, Variant, GUARD_RELATIVE, MIN_SUPPORT};
pub use report::{
    audit, convergence_order, run_verification, Audit, AuditFamily, AuditVariant, CrossCheck, FamilyVerdict,
    OrderError, ResidualReport, Status, Tolerances, VariantPolicy, Verification, VerifyOptions,
};

use thiserror::Error;

use crate::flow::{CurveGrid, FlowError};
use crate::flowfield::FlowCoefficients;
use crate::frames::FrameKind;

/// Coarse-grid nodes excluded at each end of a slice.
pub const DEFAULT_MARGIN: usize = 8;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("need at least {need} time slices, got {got}")]
    TooFewSlices { need: usize, got: usize },
    #[error("slice {0} has no neighbour on both sides")]
    NotInterior(usize),
    #[error("flow coefficients are for a different curve kind than the grid")]
    KindMismatch,
    #[error("{got} nodes leave nothing to evaluate with a margin of {margin}")]
    TooFewNodes { margin: usize, got: usize },
    #[error("need at least {need} refinements, got {got}")]
    TooFewRefinements { need: usize, got: usize },
    #[error("expected a {} grid", .0.name())]
    WrongKind(FrameKind),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

impl VerifyError {
    pub fn is_input_error(&self) -> bool {
        match self {
            VerifyError::Flow(e) => e.is_input_error(),
            VerifyError::TooFewSlices { .. }
            | VerifyError::NotInterior(_)
            | VerifyError::KindMismatch
            | VerifyError::TooFewNodes { .. }
            | VerifyError::TooFewRefinements { .. }
            | VerifyError::WrongKind(_) => true,
        }
    }
}

/// `ψ1 = ⟨∂N/∂t, B1⟩`, `ψ2 = ⟨∂N/∂t, B2⟩`, `ψ3 = ⟨∂B1/∂t, B2⟩` on the
/// interior slices of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiCoefficients {
    /// Slice indices `1..K`.
    pub slices: Vec<usize>,
    pub t: Vec<f64>,
    /// `psi[n][k]` is `ψ(k+1)` along slice `slices[n]`.
    pub psi: Vec<[Vec<f64>; 3]>,
}

/// ψ's from central differences of the stored frames.
pub fn extract_psi(grid: &CurveGrid) -> Result<PsiCoefficients, VerifyError> {
    if grid.num_t() < 3 {
        return Err(VerifyError::TooFewSlices { need: 3, got: grid.num_t() });
    }
    let slices: Vec<usize> = (1..grid.num_t() - 1).collect();
    let t = slices.iter().map(|&j| grid.slices[j].t).collect();
    let psi = slices
        .iter()
        .map(|&j| {
            let sl = &grid.slices[j];
            let mut out: [Vec<f64>; 3] = Default::default();
            for i in 0..grid.num_u() {
                let (a, b) = (&grid.slices[j - 1].frames[i], &grid.slices[j + 1].frames[i]);
                let n_t = crate::stencil::central(a.n, b.n, grid.dt);
                let b1_t = crate::stencil::central(a.b1, b.b1, grid.dt);
                out[0].push(n_t.dot(sl.frames[i].b1));
                out[1].push(n_t.dot(sl.frames[i].b2));
                out[2].push(b1_t.dot(sl.frames[i].b2));
            }
            out
        })
        .collect();
    Ok(PsiCoefficients { slices, t, psi })
}

fn probe_mid<'g>(grid: &'g CurveGrid, coeffs: &FlowCoefficients, kind: Option<FrameKind>) -> Result<Probe<'g>, VerifyError> {
    if let Some(k) = kind {
        if grid.kind != k {
            return Err(VerifyError::WrongKind(k));
        }
    }
    Probe::new(grid, coeffs, grid.num_t().saturating_sub(1) / 2, DEFAULT_MARGIN)
}

/// Frame evolution equations of a partially null grid, both `B2` forms.
pub fn check_frame_evolution_pn(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, Some(FrameKind::PartiallyNull))?.frame_evolution())
}

pub fn check_k1_evolution(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, Some(FrameKind::PartiallyNull))?.k1_evolution())
}

/// `ψ1 k1 = ∂²c4/∂s²` and the matching `ψ2` balance.
pub fn check_psi_balance_pn(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, Some(FrameKind::PartiallyNull))?.psi_balance_pn())
}

/// `k1` from `ψ1` and `k2` from `ψ3`.
pub fn check_psi_curvatures_pn(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, Some(FrameKind::PartiallyNull))?.psi_curvatures_pn())
}

pub fn check_k2_evolution_pn(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, Some(FrameKind::PartiallyNull))?.k2_evolution_pn())
}

pub fn check_pseudo_null_system(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, Some(FrameKind::PseudoNull))?.pseudo_null_system())
}

/// Every check for the grid's kind on its middle slice.
pub fn check_all(grid: &CurveGrid, coeffs: &FlowCoefficients) -> Result<Vec<Measurement>, VerifyError> {
    Ok(probe_mid(grid, coeffs, None)?.all())
}
