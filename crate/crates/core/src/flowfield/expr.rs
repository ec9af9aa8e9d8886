use std::fmt;

use super::FieldError;

/// Independent variables an expression may mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    U,
    T,
    S,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::T => "t",
            Var::S => "s",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "u" => Some(Var::U),
            "t" => Some(Var::T),
            "s" => Some(Var::S),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sinh,
    Cosh,
    Sqrt,
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Sinh => Some("sinh"),
            UnaryOp::Cosh => Some("cosh"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }

    pub fn from_function_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sinh" => UnaryOp::Sinh,
            "cosh" => UnaryOp::Cosh,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    /// Right operand is always an integer-valued `Const`.
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// Expression tree over `u`, `t` and `s`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Values bound to the variables during evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    pub u: Option<f64>,
    pub t: Option<f64>,
    pub s: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        match var {
            Var::U => self.u = Some(value),
            Var::T => self.t = Some(value),
            Var::S => self.s = Some(value),
        }
        self
    }

    pub fn ut(u: f64, t: f64) -> Self {
        Bindings { u: Some(u), t: Some(t), s: None }
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::U => self.u,
            Var::T => self.t,
            Var::S => self.s,
        }
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn powi(base: Expr, n: i32) -> Expr {
        Expr::binary(BinaryOp::Pow, base, Expr::Const(n as f64))
    }

    /// True when the expression never mentions any variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Unary(_, e) => e.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    pub fn mentions(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Unary(_, e) => e.mentions(var),
            Expr::Binary(_, l, r) => l.mentions(var) || r.mentions(var),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, e) => 1 + e.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Replace every occurrence of `from` by `to`.
    pub fn rename(&self, from: Var, to: Var) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) if *v == from => Expr::Var(to),
            Expr::Var(v) => Expr::Var(*v),
            Expr::Unary(op, e) => Expr::unary(*op, e.rename(from, to)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.rename(from, to), r.rename(from, to)),
        }
    }

    /// Evaluate in IEEE double precision. Any non-finite intermediate is an error.
    pub fn eval(&self, b: &Bindings) -> Result<f64, FieldError> {
        let x = match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => b.get(*v).ok_or(FieldError::Unbound(v.name()))?,
            Expr::Unary(op, e) => {
                let a = e.eval(b)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sinh => a.sinh(),
                    UnaryOp::Cosh => a.cosh(),
                    UnaryOp::Sqrt => {
                        if a < 0.0 {
                            return Err(FieldError::Domain { op: "sqrt", arg: a });
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(b)?;
                let c = r.eval(b)?;
                match op {
                    BinaryOp::Add => a + c,
                    BinaryOp::Sub => a - c,
                    BinaryOp::Mul => a * c,
                    BinaryOp::Div => {
                        if c == 0.0 {
                            return Err(FieldError::DivisionByZero);
                        }
                        a / c
                    }
                    BinaryOp::Pow => {
                        let n = c as i32;
                        if n < 0 && a == 0.0 {
                            return Err(FieldError::DivisionByZero);
                        }
                        a.powi(n)
                    }
                }
            }
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(FieldError::NonFinite)
        }
    }

    /// Symbolic partial derivative. The result is not simplified.
    pub fn differentiate(&self, var: Var) -> Expr {
        use BinaryOp::*;
        use UnaryOp::*;
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, e) => {
                let de = e.differentiate(var);
                let inner = (**e).clone();
                match op {
                    Neg => Expr::unary(Neg, de),
                    Sin => Expr::binary(Mul, Expr::unary(Cos, inner), de),
                    Cos => Expr::unary(Neg, Expr::binary(Mul, Expr::unary(Sin, inner), de)),
                    Exp => Expr::binary(Mul, Expr::unary(Exp, inner), de),
                    Sinh => Expr::binary(Mul, Expr::unary(Cosh, inner), de),
                    Cosh => Expr::binary(Mul, Expr::unary(Sinh, inner), de),
                    Sqrt => Expr::binary(
                        Div,
                        de,
                        Expr::binary(Mul, Expr::Const(2.0), Expr::unary(Sqrt, inner)),
                    ),
                }
            }
            Expr::Binary(op, l, r) => {
                let (lc, rc) = ((**l).clone(), (**r).clone());
                match op {
                    Add => Expr::binary(Add, l.differentiate(var), r.differentiate(var)),
                    Sub => Expr::binary(Sub, l.differentiate(var), r.differentiate(var)),
                    Mul => Expr::binary(
                        Add,
                        Expr::binary(Mul, l.differentiate(var), rc),
                        Expr::binary(Mul, lc, r.differentiate(var)),
                    ),
                    Div => Expr::binary(
                        Div,
                        Expr::binary(
                            Sub,
                            Expr::binary(Mul, l.differentiate(var), rc.clone()),
                            Expr::binary(Mul, lc, r.differentiate(var)),
                        ),
                        Expr::powi(rc, 2),
                    ),
                    Pow => {
                        let n = match **r {
                            Expr::Const(c) => c as i32,
                            _ => unreachable!("exponent is always an integer constant"),
                        };
                        if n == 0 {
                            return Expr::Const(0.0);
                        }
                        Expr::binary(
                            Mul,
                            Expr::binary(Mul, Expr::Const(n as f64), Expr::powi(lc, n - 1)),
                            l.differentiate(var),
                        )
                    }
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Binary(BinaryOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Var(v) => f.write_str(v.name())?,
            Expr::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                e.write_prec(f, 3)?;
            }
            Expr::Unary(op, e) => {
                write!(f, "{}(", op.function_name().unwrap_or("?"))?;
                e.write_prec(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Binary(BinaryOp::Pow, l, r) => {
                l.write_prec(f, 5)?;
                match **r {
                    Expr::Const(c) => write!(f, "^{}", c as i64)?,
                    _ => unreachable!("exponent is always an integer constant"),
                }
            }
            Expr::Binary(op, l, r) => {
                let p = self.precedence();
                l.write_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.write_prec(f, p + 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Prints with the minimum parentheses needed to parse back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}
