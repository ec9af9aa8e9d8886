//! Refinement ladders, pass rules, the variant audit and report output.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{Measurement, Probe, VerifyError};
use crate::flow::{evolve_around_start, CurveGrid, EvolutionMode, FlowProblem, Stepper};

/// Pass thresholds, all relative to an identity's scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub residual: f64,
    pub order: f64,
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: 1e-4, order: 0.8, exact: 1e-8 }
    }
}

/// Which form of a disputed identity must pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantPolicy {
    /// Any form that converges.
    #[default]
    Auto,
    /// The form as displayed in the source.
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Grids in the ladder, at least 3.
    pub refinements: usize,
    /// Coarse-grid nodes excluded at each end.
    pub margin: usize,
    pub tolerances: Tolerances,
    pub variants: VariantPolicy,
    /// Mode of the measured grids; the other mode is the cross-check.
    pub mode: EvolutionMode,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            refinements: 3,
            margin: super::DEFAULT_MARGIN,
            tolerances: Tolerances::default(),
            variants: VariantPolicy::Auto,
            mode: EvolutionMode::Position,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("need at least three residuals")]
    TooFew,
    /// A zero (or non-finite) residual; all-zero ladders are reported as exact.
    #[error("residuals must be positive and finite")]
    NonPositive,
}

/// Mean of `log2(r_k / r_{k+1})` over consecutive grids.
pub fn convergence_order(residuals: &[f64]) -> Result<f64, OrderError> {
    if residuals.len() < 3 {
        return Err(OrderError::TooFew);
    }
    if residuals.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(OrderError::NonPositive);
    }
    let n = residuals.len() - 1;
    Ok((residuals[0] / residuals[n]).log2() / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Exact,
    NotConverged,
    /// Too few nodes survived the divisor guard; not counted as a failure.
    InsufficientSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub variant: Option<String>,
    /// Whether `variant` is the displayed form; absent for undisputed identities.
    pub printed: Option<bool>,
    pub du: Vec<f64>,
    pub dt: Vec<f64>,
    pub ds: Vec<f64>,
    pub max_abs: Vec<f64>,
    pub rms: Vec<f64>,
    pub scale: f64,
    pub order: Option<f64>,
    pub status: Status,
    pub pass: bool,
}

impl ResidualReport {
    fn new(ms: &[&Measurement], grids: &[GridParams], tol: &Tolerances) -> Self {
        let first = ms[0];
        let max_abs: Vec<f64> = ms.iter().map(|m| m.max_abs).collect();
        let scale = ms.last().map_or(1.0, |m| m.scale);
        let order = convergence_order(&max_abs).ok();
        let status = if ms.iter().any(|m| !m.supported()) {
            Status::InsufficientSupport
        } else if max_abs.iter().all(|r| *r <= tol.exact * scale) {
            Status::Exact
        } else if max_abs.last().is_some_and(|r| *r <= tol.residual * scale) && order.is_some_and(|o| o >= tol.order)
        {
            Status::Converged
        } else {
            Status::NotConverged
        };
        ResidualReport {
            name: first.name.to_string(),
            variant: first.variant.map(|v| v.tag.to_string()),
            printed: first.variant.map(|v| v.printed),
            du: grids.iter().map(|g| g.du).collect(),
            dt: grids.iter().map(|g| g.dt).collect(),
            ds: grids.iter().map(|g| g.ds).collect(),
            max_abs,
            rms: ms.iter().map(|m| m.rms).collect(),
            scale,
            order,
            status,
            pass: matches!(status, Status::Converged | Status::Exact),
        }
    }

    fn label(&self) -> String {
        match &self.variant {
            Some(v) => format!("{} [{}]", self.name, v),
            None => self.name.clone(),
        }
    }
}

/// Outcome for an identity measured in several forms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyVerdict {
    pub name: String,
    pub printed: String,
    /// Forms that passed.
    pub passing: Vec<String>,
    pub pass: bool,
}

/// Comparison of the two evolution modes on the coarsest grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub mode: EvolutionMode,
    /// `None` with a message when the other mode could not run.
    pub max_position_gap: Option<f64>,
    pub max_frame_gap: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub kind: String,
    pub mode: EvolutionMode,
    pub variant_policy: VariantPolicy,
    pub tolerances: Tolerances,
    pub reports: Vec<ResidualReport>,
    pub families: Vec<FamilyVerdict>,
    pub cross_check: CrossCheck,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct GridParams {
    du: f64,
    dt: f64,
    ds: f64,
}

fn verify_problem(p: &FlowProblem, mode: EvolutionMode, r: usize) -> FlowProblem {
    FlowProblem { mode, stepper: Stepper::Euler, ..p.refined(r as u32) }
}

fn short_run(p: &FlowProblem) -> Result<CurveGrid, VerifyError> {
    Ok(evolve_around_start(p)?)
}

fn measure_ladder(p: &FlowProblem, opts: &VerifyOptions) -> Result<(Vec<GridParams>, Vec<Vec<Measurement>>), VerifyError> {
    if opts.refinements < 3 {
        return Err(VerifyError::TooFewRefinements { need: 3, got: opts.refinements });
    }
    let runs: Vec<Result<(GridParams, Vec<Measurement>), VerifyError>> = (0..opts.refinements)
        .into_par_iter()
        .map(|r| {
            let q = verify_problem(p, opts.mode, r);
            let g = short_run(&q)?;
            let probe = Probe::new(&g, &q.coeffs, 1, opts.margin << r)?;
            let v = &g.slices[1].speed;
            let ds = g.du * v.iter().sum::<f64>() / v.len() as f64;
            Ok((GridParams { du: g.du, dt: g.dt, ds }, probe.all()))
        })
        .collect();
    let mut grids = Vec::with_capacity(runs.len());
    let mut ms = Vec::with_capacity(runs.len());
    for run in runs {
        let (g, m) = run?;
        grids.push(g);
        ms.push(m);
    }
    Ok((grids, ms))
}

fn reports_from(grids: &[GridParams], ms: &[Vec<Measurement>], tol: &Tolerances) -> Vec<ResidualReport> {
    (0..ms[0].len())
        .map(|k| {
            let column: Vec<&Measurement> = ms.iter().map(|m| &m[k]).collect();
            ResidualReport::new(&column, grids, tol)
        })
        .collect()
}

fn families(reports: &[ResidualReport], policy: VariantPolicy) -> Vec<FamilyVerdict> {
    let mut out: Vec<FamilyVerdict> = Vec::new();
    for r in reports.iter().filter(|r| r.variant.is_some()) {
        let tag = r.variant.clone().unwrap_or_default();
        let idx = match out.iter().position(|f| f.name == r.name) {
            Some(i) => i,
            None => {
                out.push(FamilyVerdict { name: r.name.clone(), printed: String::new(), passing: vec![], pass: false });
                out.len() - 1
            }
        };
        let f = &mut out[idx];
        if r.printed == Some(true) {
            f.printed = tag.clone();
        }
        if r.pass {
            f.passing.push(tag);
        }
    }
    for f in &mut out {
        f.pass = match policy {
            VariantPolicy::Auto => !f.passing.is_empty(),
            VariantPolicy::Printed => f.passing.contains(&f.printed),
        };
    }
    out
}

fn cross_check(p: &FlowProblem, opts: &VerifyOptions, measured: &CurveGrid) -> CrossCheck {
    let other = match opts.mode {
        EvolutionMode::Position => EvolutionMode::Transport,
        EvolutionMode::Transport => EvolutionMode::Position,
    };
    match short_run(&verify_problem(p, other, 0)) {
        Ok(g) => {
            let (a, b) = (&measured.slices[2], &g.slices[2]);
            let pos = a.positions.iter().zip(&b.positions).map(|(x, y)| (*x - *y).max_abs()).fold(0.0, f64::max);
            let frame = a
                .frames
                .iter()
                .zip(&b.frames)
                .flat_map(|(x, y)| (0..4).map(move |k| (x.vectors()[k] - y.vectors()[k]).max_abs()))
                .fold(0.0, f64::max);
            CrossCheck { mode: other, max_position_gap: Some(pos), max_frame_gap: Some(frame), note: None }
        }
        Err(e) => CrossCheck { mode: other, max_position_gap: None, max_frame_gap: None, note: Some(e.to_string()) },
    }
}

/// Measure every identity over the refinement ladder of `p`.
pub fn run_verification(p: &FlowProblem, opts: &VerifyOptions) -> Result<Verification, VerifyError> {
    let (grids, ms) = measure_ladder(p, opts)?;
    let reports = reports_from(&grids, &ms, &opts.tolerances);
    let families = families(&reports, opts.variants);
    let coarse = short_run(&verify_problem(p, opts.mode, 0))?;
    let cross_check = cross_check(p, opts, &coarse);
    let plain_ok = reports
        .iter()
        .filter(|r| r.variant.is_none())
        .all(|r| r.pass || r.status == Status::InsufficientSupport);
    let pass = plain_ok && families.iter().all(|f| f.pass);
    Ok(Verification {
        kind: p.kind.name().to_string(),
        mode: opts.mode,
        variant_policy: opts.variants,
        tolerances: opts.tolerances,
        reports,
        families,
        cross_check,
        pass,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.2}"))
}

impl Verification {
    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
    }

    /// Aligned table: one row per identity and form, finest-grid figures.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        let width = self.reports.iter().map(|r| r.label().len()).max().unwrap_or(8).max(8);
        writeln!(w, "{:<width$}  {:>10}  {:>10}  {:>10}  {:>6}  status", "identity", "max_abs", "rms", "scale", "order")?;
        for r in &self.reports {
            writeln!(
                w,
                "{:<width$}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {:>6}  {}",
                r.label(),
                r.max_abs.last().copied().unwrap_or(0.0),
                r.rms.last().copied().unwrap_or(0.0),
                r.scale,
                fmt_opt(r.order),
                status_word(r.status),
            )?;
        }
        for f in &self.families {
            let passing = if f.passing.is_empty() { "none".to_string() } else { f.passing.join(", ") };
            writeln!(w, "form check {}: printed {}, passing {} -> {}", f.name, f.printed, passing, pass_word(f.pass))?;
        }
        match (self.cross_check.max_position_gap, &self.cross_check.note) {
            (Some(p), _) => writeln!(
                w,
                "{} mode cross-check: position gap {:.3e}, frame gap {:.3e}",
                mode_word(self.cross_check.mode),
                p,
                self.cross_check.max_frame_gap.unwrap_or(0.0)
            )?,
            (None, Some(n)) => writeln!(w, "{} mode cross-check unavailable: {}", mode_word(self.cross_check.mode), n)?,
            (None, None) => {}
        }
        writeln!(w, "overall: {}", pass_word(self.pass))
    }
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::Exact => "exact",
        Status::NotConverged => "FAIL",
        Status::InsufficientSupport => "skipped (insufficient support)",
    }
}

fn pass_word(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn mode_word(m: EvolutionMode) -> &'static str {
    match m {
        EvolutionMode::Position => "position",
        EvolutionMode::Transport => "transport",
    }
}

/// One form of a disputed identity across the audit scenarios.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditVariant {
    pub tag: String,
    pub printed: bool,
    /// Finest-grid-last residual ladders, one per scenario.
    pub residuals: Vec<Vec<f64>>,
    pub orders: Vec<Option<f64>>,
    pub converged: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditFamily {
    pub name: String,
    pub scenarios: Vec<String>,
    pub variants: Vec<AuditVariant>,
    /// The only form converging on every scenario, if there is exactly one.
    pub winner: Option<String>,
    pub printed_wins: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Audit {
    pub refinements: usize,
    pub families: Vec<AuditFamily>,
    pub pass: bool,
}

/// Run every scenario and compare the forms of each disputed identity. A
/// form wins when it converges on all runs and no other form does.
pub fn audit(problems: &[(String, FlowProblem)], opts: &VerifyOptions) -> Result<Audit, VerifyError> {
    let mut fams: Vec<AuditFamily> = Vec::new();
    for (label, p) in problems {
        let (grids, ms) = measure_ladder(p, opts)?;
        for r in reports_from(&grids, &ms, &opts.tolerances).into_iter().filter(|r| r.variant.is_some()) {
            let idx = match fams.iter().position(|f| f.name == r.name) {
                Some(i) => i,
                None => {
                    fams.push(AuditFamily {
                        name: r.name.clone(),
                        scenarios: vec![],
                        variants: vec![],
                        winner: None,
                        printed_wins: false,
                    });
                    fams.len() - 1
                }
            };
            let f = &mut fams[idx];
            if f.scenarios.last() != Some(label) {
                f.scenarios.push(label.clone());
            }
            let tag = r.variant.clone().unwrap_or_default();
            let v = match f.variants.iter().position(|v| v.tag == tag) {
                Some(i) => &mut f.variants[i],
                None => {
                    f.variants.push(AuditVariant {
                        tag,
                        printed: r.printed == Some(true),
                        residuals: vec![],
                        orders: vec![],
                        converged: vec![],
                    });
                    f.variants.last_mut().expect("just pushed")
                }
            };
            v.residuals.push(r.max_abs.clone());
            v.orders.push(r.order);
            v.converged.push(r.pass);
        }
    }
    for f in &mut fams {
        let all: Vec<&AuditVariant> = f.variants.iter().filter(|v| v.converged.iter().all(|c| *c)).collect();
        if let [only] = all[..] {
            f.winner = Some(only.tag.clone());
            f.printed_wins = only.printed;
        }
    }
    let pass = !fams.is_empty() && fams.iter().all(|f| f.winner.is_some());
    Ok(Audit { refinements: opts.refinements, families: fams, pass })
}

impl Audit {
    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
    }

    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        for f in &self.families {
            writeln!(w, "{} ({} scenarios)", f.name, f.scenarios.len())?;
            for v in &f.variants {
                let runs: Vec<&str> = v.converged.iter().map(|c| if *c { "ok" } else { "x" }).collect();
                let mark = if v.printed { " (printed)" } else { "" };
                writeln!(w, "  {:<20} {}{}", v.tag, runs.join(" "), mark)?;
            }
            match &f.winner {
                Some(t) => writeln!(w, "  winner: {}{}", t, if f.printed_wins { " (printed)" } else { " (not the printed form)" })?,
                None => writeln!(w, "  winner: none")?,
            }
        }
        writeln!(w, "overall: {}", pass_word(self.pass))
    }
}

