use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scenario;
use crate::flow::FlowProblem;
use crate::flowfield::{parse, BinaryOp, Coefficient, Expr, FlowCoefficients, Var};
use crate::frames::{Curvatures, FrameKind};

fn num<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo..hi) * 1000.0).round() / 1000.0
}

/// Magnitude in `[lo, hi)` with a random sign.
fn signed<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let x = num(rng, lo, hi);
    if rng.gen_bool(0.5) {
        -x
    } else {
        x
    }
}

fn expr(text: String) -> Expr {
    parse(&text).expect("generated expressions parse")
}

fn bin(op: BinaryOp, l: Expr, r: Expr) -> Expr {
    Expr::binary(op, l, r)
}

/// Smooth partially null flow with `k1 = 1` and a non-vanishing `k2`. The
/// binormal speed `b4 = c0 + c1 sin u + c2 cos u` solves `b4''' = -b4'`,
/// which keeps the first binormal null.
fn partially_null<R: Rng>(rng: &mut R) -> (Curvatures, FlowCoefficients) {
    let k2 = format!("{} + {}*sin(s) + {}*cos(s)", num(rng, 0.8, 1.2), signed(rng, 0.1, 0.3), signed(rng, 0.0, 0.2));
    let b2 = format!("{} + {}*sin(u)", signed(rng, 0.0, 0.2), signed(rng, 0.1, 0.3));
    let b3 = format!("{}*cos(u) + {}", signed(rng, 0.1, 0.3), signed(rng, 0.0, 0.2));
    let b4 = format!("{} + {}*sin(u) + {}*cos(u)", num(rng, 0.3, 0.6), signed(rng, 0.1, 0.3), signed(rng, 0.1, 0.3));
    let k = Curvatures::new(Expr::Const(1.0), expr(k2), Expr::Const(0.0));
    let c = [Coefficient::Inextensible, Coefficient::Expr(expr(b2)), Coefficient::Expr(expr(b3)), Coefficient::Expr(expr(b4))];
    (k, FlowCoefficients { kind: FrameKind::PartiallyNull, c })
}

/// Smooth pseudo null flow with `k1 = 1`. The normal speed `a2` is solved
/// from the null-preservation condition
/// `a4'' - (a3 k2)' - a3' k2 - a2 k2^2 + a4 k2 k3 = 0` on a unit speed curve.
fn pseudo_null<R: Rng>(rng: &mut R) -> (Curvatures, FlowCoefficients) {
    let k2 = expr(format!("{} + {}*sin(s)", num(rng, 0.8, 1.2), signed(rng, 0.1, 0.3)));
    let k3 = expr(format!("{}*cos(s) + {}", signed(rng, 0.2, 0.5), signed(rng, 0.0, 0.2)));
    let a3 = expr(format!("{}*cos(u) + {}", signed(rng, 0.1, 0.3), signed(rng, 0.0, 0.1)));
    let a4 = expr(format!("{} + {}*sin(u)", num(rng, 0.1, 0.3), signed(rng, 0.1, 0.2)));
    let (k2u, k3u) = (k2.rename(Var::S, Var::U), k3.rename(Var::S, Var::U));
    let d = |e: &Expr| e.differentiate(Var::U);
    let a3k2 = bin(BinaryOp::Mul, a3.clone(), k2u.clone());
    let num = bin(
        BinaryOp::Add,
        bin(
            BinaryOp::Sub,
            bin(BinaryOp::Sub, d(&d(&a4)), d(&a3k2)),
            bin(BinaryOp::Mul, d(&a3), k2u.clone()),
        ),
        bin(BinaryOp::Mul, bin(BinaryOp::Mul, a4.clone(), k2u.clone()), k3u),
    );
    let a2 = bin(BinaryOp::Div, num, Expr::powi(k2u, 2));
    let k = Curvatures::new(Expr::Const(1.0), k2, k3);
    let c = [Coefficient::Inextensible, Coefficient::Expr(a2), Coefficient::Expr(a3), Coefficient::Expr(a4)];
    (k, FlowCoefficients { kind: FrameKind::PseudoNull, c })
}

/// `sc.audit_scenarios` random flows of the scenario's kind on its grid,
/// drawn from `sc.seed`. Labels are `name#1`, `name#2`, ...
pub fn audit_problems(sc: &Scenario) -> Vec<(String, FlowProblem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    (1..=sc.audit_scenarios)
        .map(|i| {
            let (curvatures, coeffs) = match sc.problem.kind {
                FrameKind::PartiallyNull => partially_null(&mut rng),
                FrameKind::PseudoNull => pseudo_null(&mut rng),
            };
            let p = FlowProblem { curvatures, coeffs, ..sc.problem.clone() };
            (format!("{}#{i}", sc.name), p)
        })
        .collect()
}
