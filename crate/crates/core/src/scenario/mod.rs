//! Scenario files.
//!
//! A scenario is a flat INI file: `[section]` headers, `key = value` lines,
//! and comments starting with `#` or `;`. Every problem found is collected
//! with its line number before loading fails.
//!
//! ```text
//! [scenario]
//! name = pn_exp_circle
//! seed = 0
//!
//! [curve]
//! kind = partially_null
//! k1 = 1
//! k2 = 2*exp(s)
//!
//! [flow]
//! c1 = inextensible
//! c4 = 0.1
//!
//! [grid]
//! l = 1
//! du = 0.01
//! w = 0.01
//! dt = 0.001
//! ```

mod builtin;
mod ini;
mod random;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use builtin::{builtin, builtin_names, BUILTINS};
pub use ini::{parse_ini, Entry};
pub use random::audit_problems;

use crate::flow::{EvolutionMode, FlowProblem, NullGauge, Stepper};
use crate::flowfield::{parse, Coefficient, Expr, FlowCoefficients};
use crate::frames::{Curvatures, Frame4, FrameKind};
use crate::mink4::Vec4;
use crate::verify::{Tolerances, VariantPolicy, VerifyOptions};

/// Number of random scenarios per audit unless `audit_scenarios` says otherwise.
pub const DEFAULT_AUDIT_SCENARIOS: usize = 3;

/// One problem in a scenario file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    /// 1-based; `None` for keys that are missing altogether.
    pub line: Option<usize>,
    pub message: String,
}

impl Issue {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Issue { line: Some(line), message: message.into() }
    }

    fn missing(message: impl Into<String>) -> Self {
        Issue { line: None, message: message.into() }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown built-in scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("{}", list(.0))]
    Invalid(Vec<Issue>),
}

fn list(issues: &[Issue]) -> String {
    let lines: Vec<String> = issues.iter().map(Issue::to_string).collect();
    lines.join("\n")
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub problem: FlowProblem,
    pub refinements: usize,
    pub out: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub variants: VariantPolicy,
    pub seed: u64,
    pub audit_scenarios: usize,
}

impl Scenario {
    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            refinements: self.refinements,
            tolerances: self.tolerances,
            variants: self.variants,
            mode: self.problem.mode,
            ..VerifyOptions::default()
        }
    }
}

/// Load from a path, or from the built-in table when the path is `builtin:NAME`.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = path.to_string_lossy();
    if let Some(name) = text.strip_prefix("builtin:") {
        let src = builtin(name).ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_string()))?;
        return parse_scenario(src, name);
    }
    let src = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
    parse_scenario(&src, &stem)
}

const KEYS: &[(&str, &[&str])] = &[
    ("scenario", &["name", "seed"]),
    ("curve", &["kind", "k1", "k2", "k3", "frame", "origin"]),
    ("flow", &["c1", "c2", "c3", "c4"]),
    ("grid", &["l", "du", "w", "dt"]),
    ("run", &["mode", "gauge", "stepper", "refinements", "out", "variants", "audit_scenarios"]),
    ("tolerances", &["residual", "order", "exact"]),
];

/// Parse scenario text; `default_name` is used when `[scenario] name` is absent.
pub fn parse_scenario(src: &str, default_name: &str) -> Result<Scenario, ScenarioError> {
    let (entries, mut issues) = parse_ini(src);
    if entries.is_empty() && issues.is_empty() {
        issues.push(Issue::at(1, "empty scenario: no keys found"));
    }
    for e in &entries {
        match KEYS.iter().find(|(s, _)| *s == e.section) {
            None => issues.push(Issue::at(e.line, format!("unknown section [{}]", e.section))),
            Some((_, keys)) if !keys.contains(&e.key.as_str()) => {
                issues.push(Issue::at(e.line, format!("unknown key `{}` in [{}]", e.key, e.section)))
            }
            _ => {}
        }
    }
    let mut r = Reader { entries: &entries, issues };
    let sc = r.build(default_name);
    if r.issues.is_empty() {
        Ok(sc.expect("no issues means every field was read"))
    } else {
        r.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(ScenarioError::Invalid(r.issues))
    }
}

struct Reader<'a> {
    entries: &'a [Entry],
    issues: Vec<Issue>,
}

impl Reader<'_> {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    fn value<T>(&mut self, section: &str, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Option<Option<T>> {
        let e = self.get(section, key)?;
        let line = e.line;
        match f(&e.value) {
            Ok(v) => Some(Some(v)),
            Err(m) => {
                self.issues.push(Issue::at(line, format!("{section}.{key}: {m}")));
                Some(None)
            }
        }
    }

    /// `None` in the outer option means absent, in the inner one invalid.
    fn optional<T>(&mut self, section: &str, key: &str, default: T, f: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        self.value(section, key, f).unwrap_or(Some(default))
    }

    fn required<T>(&mut self, section: &str, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        match self.value(section, key, f) {
            Some(v) => v,
            None => {
                self.issues.push(Issue::missing(format!("missing required key {section}.{key}")));
                None
            }
        }
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.get(section, key).map(|e| e.line)
    }

    fn positive(&mut self, key: &str, v: Option<f64>, allow_zero: bool) -> Option<f64> {
        let v = v?;
        let ok = if allow_zero { v >= 0.0 } else { v > 0.0 };
        if ok && v.is_finite() {
            Some(v)
        } else {
            let bound = if allow_zero { "non-negative" } else { "positive" };
            let line = self.line("grid", key).unwrap_or(0);
            self.issues.push(Issue::at(line, format!("grid.{key} must be {bound}, got {v}")));
            None
        }
    }

    fn build(&mut self, default_name: &str) -> Option<Scenario> {
        let name = self.optional("scenario", "name", default_name.to_string(), |v| Ok(v.to_string()));
        let seed = self.optional("scenario", "seed", 0, |v| v.parse::<u64>().map_err(|e| e.to_string()));
        let kind = self.required("curve", "kind", parse_kind);
        let k1 = self.required("curve", "k1", parse_expr);
        let k2 = self.required("curve", "k2", parse_expr);
        let k3 = self.optional("curve", "k3", Expr::Const(0.0), parse_expr);
        let frame = self.value("curve", "frame", |v| parse_frame(v, kind)).unwrap_or_else(|| kind.map(Frame4::canonical));
        let origin = self.optional("curve", "origin", Vec4::ZERO, |v| {
            let x = parse_reals(v, 4)?;
            Ok(Vec4::new(x[0], x[1], x[2], x[3]))
        });
        let mut c: [Option<Coefficient>; 4] = Default::default();
        for (i, slot) in c.iter_mut().enumerate() {
            let key = format!("c{}", i + 1);
            *slot = self.optional("flow", &key, Coefficient::zero(), |v| {
                let c = Coefficient::parse(v).map_err(|e| e.to_string())?;
                if i > 0 && c == Coefficient::Inextensible {
                    return Err("`inextensible` is only allowed for c1".into());
                }
                Ok(c)
            });
        }
        let real = |v: &str| v.parse::<f64>().map_err(|e| e.to_string());
        let l = self.required("grid", "l", real);
        let l = self.positive("l", l, false);
        let du = self.required("grid", "du", real);
        let du = self.positive("du", du, false);
        let w = self.optional("grid", "w", 0.0, real);
        let w = self.positive("w", w, true);
        let dt = match self.value("grid", "dt", real) {
            Some(v) => self.positive("dt", v, false),
            None => du.map(|d| d / 4.0),
        };
        let mode = self.optional("run", "mode", EvolutionMode::Position, |v| match v {
            "position" => Ok(EvolutionMode::Position),
            "transport" => Ok(EvolutionMode::Transport),
            _ => Err(format!("expected `position` or `transport`, got `{v}`")),
        });
        let gauge = self.optional("run", "gauge", NullGauge::Continuity, |v| match v {
            "continuity" => Ok(NullGauge::Continuity),
            "first_component_unit" => Ok(NullGauge::FirstComponentUnit),
            _ => Err(format!("expected `continuity` or `first_component_unit`, got `{v}`")),
        });
        let stepper = self.optional("run", "stepper", Stepper::Euler, |v| match v {
            "euler" => Ok(Stepper::Euler),
            "rk4" => Ok(Stepper::Rk4),
            _ => Err(format!("expected `euler` or `rk4`, got `{v}`")),
        });
        let refinements = self.optional("run", "refinements", 3, |v| match v.parse::<usize>() {
            Ok(n) if n >= 3 => Ok(n),
            Ok(n) => Err(format!("at least 3 refinements are needed for an order estimate, got {n}")),
            Err(e) => Err(e.to_string()),
        });
        let out = self.optional("run", "out", None, |v| Ok(Some(PathBuf::from(v))));
        let variants = self.optional("run", "variants", VariantPolicy::Auto, parse_variants);
        let audit_scenarios = self.optional("run", "audit_scenarios", DEFAULT_AUDIT_SCENARIOS, |v| match v.parse::<usize>() {
            Ok(0) => Err("need at least one scenario".into()),
            Ok(n) => Ok(n),
            Err(e) => Err(e.to_string()),
        });
        let defaults = Tolerances::default();
        let residual = self.optional("tolerances", "residual", defaults.residual, real);
        let order = self.optional("tolerances", "order", defaults.order, real);
        let exact = self.optional("tolerances", "exact", defaults.exact, real);

        let (kind, k1, k2, k3) = (kind?, k1?, k2?, k3?);
        let curvatures = Curvatures::new(k1, k2, k3);
        if let Err(e) = curvatures.validate(kind) {
            let key = if kind == FrameKind::PartiallyNull { "k3" } else { "k1" };
            self.issues.push(Issue { line: self.line("curve", key), message: e.to_string() });
        }
        let [c1, c2, c3, c4] = c;
        let coeffs = FlowCoefficients { kind, c: [c1?, c2?, c3?, c4?] };
        let (du, dt) = (du?, dt?);
        if dt > du {
            self.issues.push(Issue { line: self.line("grid", "dt"), message: format!("grid.dt = {dt} exceeds grid.du = {du}") });
        }
        let problem = FlowProblem {
            kind,
            curvatures,
            frame0: frame?,
            p0: origin?,
            coeffs,
            l: l?,
            du,
            w: w?,
            dt,
            mode: mode?,
            gauge: gauge?,
            stepper: stepper?,
        };
        if self.issues.is_empty() {
            if let Err(e) = problem.validate() {
                self.issues.push(Issue::missing(e.to_string()));
            }
        }
        Some(Scenario {
            name: name?,
            problem,
            refinements: refinements?,
            out: out?,
            tolerances: Tolerances { residual: residual?, order: order?, exact: exact? },
            variants: variants?,
            seed: seed?,
            audit_scenarios: audit_scenarios?,
        })
    }
}

pub fn parse_kind(v: &str) -> Result<FrameKind, String> {
    match v {
        "partially_null" => Ok(FrameKind::PartiallyNull),
        "pseudo_null" => Ok(FrameKind::PseudoNull),
        _ => Err(format!("expected `partially_null` or `pseudo_null`, got `{v}`")),
    }
}

pub fn parse_variants(v: &str) -> Result<VariantPolicy, String> {
    match v {
        "auto" => Ok(VariantPolicy::Auto),
        "printed" => Ok(VariantPolicy::Printed),
        _ => Err(format!("expected `auto` or `printed`, got `{v}`")),
    }
}

fn parse_expr(v: &str) -> Result<Expr, String> {
    parse(v).map_err(|e| e.to_string())
}

fn parse_reals(v: &str, n: usize) -> Result<Vec<f64>, String> {
    let x: Vec<f64> = v.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if x.len() != n {
        return Err(format!("expected {n} comma-separated reals, got {}", x.len()));
    }
    Ok(x)
}

/// `canonical`, or 16 reals `T, N, B1, B2` row by row.
fn parse_frame(v: &str, kind: Option<FrameKind>) -> Result<Frame4, String> {
    let kind = kind.ok_or("frame needs a valid curve.kind")?;
    if v == "canonical" {
        return Ok(Frame4::canonical(kind));
    }
    let x = parse_reals(v, 16)?;
    let row = |k: usize| Vec4::new(x[4 * k], x[4 * k + 1], x[4 * k + 2], x[4 * k + 3]);
    let f = Frame4::new(kind, row(0), row(1), row(2), row(3));
    let r = f.max_residual();
    if r > 1e-9 {
        return Err(format!("frame violates the {} relations by {r:e}", kind.name()));
    }
    Ok(f)
}
