//! A small expression language for curvature functions and flow coefficients.
//!
//! Expressions are parsed from strings such as `2*exp(s)` or `u^2 - t`, evaluated
//! in double precision and differentiated symbolically. There is no
//! simplifier: derivatives are checked numerically instead.

mod expr;
mod parse;

pub use expr::{BinaryOp, Bindings, Expr, UnaryOp, Var};
pub use parse::parse;

use thiserror::Error;

use crate::frames::FrameKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("malformed number `{text}` at byte {offset}")]
    MalformedNumber { offset: usize, text: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::MalformedNumber { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{op} of {arg} is undefined")]
    Domain { op: &'static str, arg: f64 },
    #[error("non-finite result")]
    NonFinite,
}

/// Free-function form of [`Expr::eval`].
pub fn eval(e: &Expr, bindings: &Bindings) -> Result<f64, FieldError> {
    e.eval(bindings)
}

pub fn differentiate(e: &Expr, var: Var) -> Expr {
    e.differentiate(var)
}

/// One scalar speed of a flow.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Expr(Expr),
    /// Tangential speed chosen so the flow is inextensible:
    /// `c1(u) = int_0^u c2 k1 v du'` for partially null curves and
    /// `c1(u) = int_0^u c4 v du'` for pseudo null curves. Only valid in slot 1.
    Inextensible,
}

impl Coefficient {
    pub fn parse(text: &str) -> Result<Coefficient, ParseError> {
        if text.trim() == "inextensible" {
            Ok(Coefficient::Inextensible)
        } else {
            parse(text).map(Coefficient::Expr)
        }
    }

    pub fn zero() -> Coefficient {
        Coefficient::Expr(Expr::Const(0.0))
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            Coefficient::Expr(e) => Some(e),
            Coefficient::Inextensible => None,
        }
    }
}

impl std::fmt::Display for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Expr(e) => write!(f, "{e}"),
            Coefficient::Inextensible => f.write_str("inextensible"),
        }
    }
}

/// The four scalar speeds of a flow `dγ/dt = c1 T + c2 N + c3 B1 + c4 B2`.
///
/// For partially null curves these are the β's, for pseudo null curves the α's.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowCoefficients {
    pub kind: FrameKind,
    pub c: [Coefficient; 4],
}

impl FlowCoefficients {
    pub fn zero(kind: FrameKind) -> Self {
        FlowCoefficients {
            kind,
            c: [Coefficient::zero(), Coefficient::zero(), Coefficient::zero(), Coefficient::zero()],
        }
    }

    pub fn from_exprs(kind: FrameKind, c: [Expr; 4]) -> Self {
        FlowCoefficients { kind, c: c.map(Coefficient::Expr) }
    }

    /// Parse four strings; slot 1 may be `inextensible`.
    pub fn parse(kind: FrameKind, texts: [&str; 4]) -> Result<Self, ParseError> {
        let mut c = FlowCoefficients::zero(kind).c;
        for (i, (slot, text)) in c.iter_mut().zip(texts).enumerate() {
            *slot = Coefficient::parse(text)?;
            if i > 0 && *slot == Coefficient::Inextensible {
                return Err(ParseError::Syntax {
                    offset: 0,
                    message: "`inextensible` is only allowed for the tangential coefficient".into(),
                });
            }
        }
        Ok(FlowCoefficients { kind, c })
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|c| matches!(c, Coefficient::Expr(Expr::Const(x)) if *x == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            p("2*exp(s)"),
            Expr::binary(BinaryOp::Mul, Expr::Const(2.0), Expr::unary(UnaryOp::Exp, Expr::Var(Var::S)))
        );
        assert_eq!(
            p("u^2 - t"),
            Expr::binary(
                BinaryOp::Sub,
                Expr::binary(BinaryOp::Pow, Expr::Var(Var::U), Expr::Const(2.0)),
                Expr::Var(Var::T)
            )
        );
        let err = parse("sin(q)").unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ binds tighter than unary minus
        assert_eq!(p("-u^2"), Expr::unary(UnaryOp::Neg, p("u^2")));
        // left associative
        assert_eq!(p("u - t - s"), Expr::binary(BinaryOp::Sub, p("u - t"), Expr::Var(Var::S)));
        assert_eq!(p("u / t * s"), Expr::binary(BinaryOp::Mul, p("u / t"), Expr::Var(Var::S)));
        assert_eq!(p("  u+t*s "), Expr::binary(BinaryOp::Add, p("u"), p("t*s")));
        assert_eq!(p("u^-2"), Expr::binary(BinaryOp::Pow, Expr::Var(Var::U), Expr::Const(-2.0)));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse(""), Err(ParseError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("u^t"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("u^1.5"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(u"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("2x"), Err(ParseError::MalformedNumber { offset: 0, .. })));
        assert!(matches!(parse("1.2.3"), Err(ParseError::MalformedNumber { .. })));
        assert!(matches!(parse("u $ t"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("foo(u)"), Err(ParseError::UnknownIdentifier { offset: 0, .. })));
        assert!(matches!(parse("u t"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn numbers() {
        assert_eq!(p("1e-3"), Expr::Const(1e-3));
        assert_eq!(p("2.5E+2"), Expr::Const(250.0));
        assert_eq!(p(".5"), Expr::Const(0.5));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p("2*exp(s)").eval(&Bindings::new().with(Var::S, 0.0)), Ok(2.0));
        assert_eq!(p("u^2 - t").eval(&Bindings::ut(3.0, 4.0)), Ok(5.0));
        assert_eq!(p("1/(u-1)").eval(&Bindings::new().with(Var::U, 1.0)), Err(FieldError::DivisionByZero));
        assert_eq!(p("u + t").eval(&Bindings::new().with(Var::U, 1.0)), Err(FieldError::Unbound("t")));
        assert!(p("sqrt(u)").eval(&Bindings::new().with(Var::U, -1.0)).is_err());
        assert_eq!(p("exp(u)").eval(&Bindings::new().with(Var::U, 1000.0)), Err(FieldError::NonFinite));
        assert_eq!(p("u^-1").eval(&Bindings::new().with(Var::U, 0.0)), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn derivative_examples() {
        let b = Bindings::new().with(Var::S, 0.7).with(Var::U, 3.0).with(Var::T, 4.0);
        let d = p("2*exp(s)").differentiate(Var::S);
        assert!((d.eval(&b).unwrap() - 2.0 * 0.7_f64.exp()).abs() < 1e-14);
        assert_eq!(p("u^2 - t").differentiate(Var::U).eval(&b), Ok(6.0));
        assert_eq!(p("u^2 - t").differentiate(Var::T).eval(&b), Ok(-1.0));
        assert_eq!(p("u^0").differentiate(Var::U), Expr::Const(0.0));
    }

    #[test]
    fn inextensible_keyword() {
        let f = FlowCoefficients::parse(FrameKind::PartiallyNull, ["inextensible", "sin(u)", "0", "t"]).unwrap();
        assert_eq!(f.c[0], Coefficient::Inextensible);
        assert!(!f.is_zero());
        assert!(FlowCoefficients::zero(FrameKind::PseudoNull).is_zero());
    }

    // Random expression trees with non-negative constants; the parser never
    // produces negative literals outside of exponents.
    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| Expr::Const(n as f64 / 8.0)),
            (0.0..10.0f64).prop_map(Expr::Const),
            prop_oneof![Just(Var::U), Just(Var::T), Just(Var::S)].prop_map(Expr::Var),
        ];
        leaf.prop_recursive(7, 64, 2, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(UnaryOp::Neg),
                        Just(UnaryOp::Sin),
                        Just(UnaryOp::Cos),
                        Just(UnaryOp::Exp),
                        Just(UnaryOp::Sinh),
                        Just(UnaryOp::Cosh),
                        Just(UnaryOp::Sqrt)
                    ],
                    inner.clone()
                )
                    .prop_map(|(op, e)| Expr::unary(op, e)),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
                (inner, -3i32..5).prop_map(|(b, n)| Expr::powi(b, n)),
            ]
        })
    }

    /// Largest magnitude among all subexpression values.
    fn max_intermediate(e: &Expr, b: &Bindings) -> f64 {
        let own = e.eval(b).map(f64::abs).unwrap_or(f64::INFINITY);
        match e {
            Expr::Const(_) | Expr::Var(_) => own,
            Expr::Unary(_, a) => own.max(max_intermediate(a, b)),
            Expr::Binary(_, l, r) => own.max(max_intermediate(l, b)).max(max_intermediate(r, b)),
        }
    }

    fn five_point(e: &Expr, b: Bindings, var: Var, h: f64) -> Option<f64> {
        let x = b.get(var)?;
        let f = |k: f64| e.eval(&b.with(var, x + k * h)).ok();
        Some((f(-2.0)? - 8.0 * f(-1.0)? + 8.0 * f(1.0)? - f(2.0)?) / (12.0 * h))
    }

    /// Five-point derivative, or `None` near a singularity: the function must
    /// evaluate across the window and the stencil must agree with itself
    /// under step halving.
    fn resolved_fd(e: &Expr, b: Bindings, var: Var) -> Option<f64> {
        let x = b.get(var)?;
        // rounding in huge intermediates swamps any difference quotient
        if max_intermediate(e, &b) > 1e6 {
            return None;
        }
        let mut ys = Vec::with_capacity(17);
        for k in -8..=8 {
            let y = e.eval(&b.with(var, x + k as f64 * 1.25e-4)).ok()?;
            if y.abs() > 1e6 {
                return None;
            }
            ys.push(y);
        }
        // undersampled oscillation shows up as large fourth differences
        let top = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        let range = ys.iter().fold(f64::MIN, |m, y| m.max(*y)) - ys.iter().fold(f64::MAX, |m, y| m.min(*y));
        let d4 = ys
            .windows(5)
            .map(|w| (w[0] - 4.0 * w[1] + 6.0 * w[2] - 4.0 * w[3] + w[4]).abs())
            .fold(0.0, f64::max);
        if d4 > 1e-3 * range && d4 > 1e-12 * top {
            return None;
        }
        let coarse = five_point(e, b, var, 1e-3)?;
        let fine = five_point(e, b, var, 5e-4)?;
        // Richardson: the fine estimate is off by about (coarse - fine) / 15
        if (coarse - fine).abs() > 1e-6 * fine.abs().max(1.0) {
            return None;
        }
        Some(fine)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            prop_assert!(e.depth() <= 8);
            let text = e.to_string();
            let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert_eq!(back, e);
        }

        #[test]
        fn derivative_matches_central_differences(
            e in arb_expr(),
            pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 100),
            var in prop_oneof![Just(Var::U), Just(Var::T), Just(Var::S)],
        ) {
            let d = e.differentiate(var);
            for (u, t, s) in pts {
                let b = Bindings { u: Some(u), t: Some(t), s: Some(s) };
                let Some(fd) = resolved_fd(&e, b, var) else { continue };
                let Ok(exact) = d.eval(&b) else { continue };
                if exact.abs() > 1e6 {
                    continue;
                }
                let scale = exact.abs().max(1.0);
                prop_assert!((exact - fd).abs() <= 1e-6 * scale, "{e} d/{:?} at {b:?}: {exact} vs {fd}", var);
            }
        }

        #[test]
        fn eval_is_deterministic(e in arb_expr(), u in -2.0..2.0f64, t in -2.0..2.0f64, s in -2.0..2.0f64) {
            let b = Bindings { u: Some(u), t: Some(t), s: Some(s) };
            let (x, y) = (e.eval(&b), e.eval(&b));
            match (x, y) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
