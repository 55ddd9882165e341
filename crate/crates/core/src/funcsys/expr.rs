use std::fmt;
use std::sync::Arc;

use crate::interval::{Interval, IntervalError};

use super::EvalError;

/// Node of an expression tree. Variables are 0-based.
#[derive(Debug, Clone)]
pub enum Node {
    /// A literal. `value` is the nearest double; `enclosure` holds the exact
    /// real the literal denotes.
    Const { value: f64, enclosure: Interval },
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Neg(Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, u32),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Log(Expr),
    Sqrt(Expr),
}

/// Immutable, cheaply clonable expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    /// Structural equality. Constants compare by value.
    fn eq(&self, other: &Expr) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        use Node::*;
        match (self.node(), other.node()) {
            (Const { value: a, .. }, Const { value: b, .. }) => a == b,
            (Var(a), Var(b)) => a == b,
            (Add(a, b), Add(c, d))
            | (Sub(a, b), Sub(c, d))
            | (Mul(a, b), Mul(c, d))
            | (Div(a, b), Div(c, d)) => a == c && b == d,
            (Pow(a, k), Pow(b, j)) => k == j && a == b,
            (Neg(a), Neg(b))
            | (Sin(a), Sin(b))
            | (Cos(a), Cos(b))
            | (Exp(a), Exp(b))
            | (Log(a), Log(b))
            | (Sqrt(a), Sqrt(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}

fn exact_sum(a: f64, b: f64) -> Option<f64> {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (err == 0.0 && s.is_finite()).then_some(s)
}

fn exact_product(a: f64, b: f64) -> Option<f64> {
    let p = a * b;
    if !p.is_finite() {
        return None;
    }
    // fused multiply-add recovers the rounding error of the product
    (a.mul_add(b, -p) == 0.0).then_some(p)
}

impl Expr {
    fn wrap(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Constant known to be exactly representable.
    pub fn constant(value: f64) -> Expr {
        Expr::wrap(Node::Const {
            value,
            enclosure: Interval::point(value),
        })
    }

    /// Constant standing for an exact real inside `enclosure`.
    pub fn constant_enclosed(value: f64, enclosure: Interval) -> Expr {
        debug_assert!(enclosure.contains(value) || !value.is_finite());
        Expr::wrap(Node::Const { value, enclosure })
    }

    pub fn var(i: usize) -> Expr {
        Expr::wrap(Node::Var(i))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    /// Value of an exactly known constant.
    pub fn as_exact_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const { value, enclosure } if enclosure.is_point() => Some(*value),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<(f64, Interval)> {
        match self.node() {
            Node::Const { value, enclosure } => Some((*value, *enclosure)),
            _ => None,
        }
    }

    fn is_exact(&self, v: f64) -> bool {
        self.as_exact_const() == Some(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_exact(0.0) {
            return b;
        }
        if b.is_exact(0.0) {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_exact_const(), b.as_exact_const()) {
            if let Some(s) = exact_sum(x, y) {
                return Expr::constant(s);
            }
        }
        Expr::wrap(Node::Add(a, b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_exact(0.0) {
            return a;
        }
        if a.is_exact(0.0) {
            return Expr::neg(b);
        }
        if let (Some(x), Some(y)) = (a.as_exact_const(), b.as_exact_const()) {
            if let Some(s) = exact_sum(x, -y) {
                return Expr::constant(s);
            }
        }
        Expr::wrap(Node::Sub(a, b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const { value, enclosure } => Expr::constant_enclosed(-value, -*enclosure),
            Node::Neg(inner) => inner.clone(),
            Node::Mul(c, x) if c.as_const().is_some() => Expr::mul(Expr::neg(c.clone()), x.clone()),
            _ => Expr::wrap(Node::Neg(a)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_exact(0.0) || b.is_exact(0.0) {
            return Expr::zero();
        }
        if a.is_exact(1.0) {
            return b;
        }
        if b.is_exact(1.0) {
            return a;
        }
        if a.is_exact(-1.0) {
            return Expr::neg(b);
        }
        if b.is_exact(-1.0) {
            return Expr::neg(a);
        }
        if let Some(x) = a.as_exact_const() {
            if let Some(y) = b.as_exact_const() {
                if let Some(p) = exact_product(x, y) {
                    return Expr::constant(p);
                }
            }
            // c1 * (c2 * e) -> (c1*c2) * e
            if let Node::Mul(c, e) = b.node() {
                if let Some(p) = c.as_exact_const().and_then(|y| exact_product(x, y)) {
                    return Expr::mul(Expr::constant(p), e.clone());
                }
            }
        }
        Expr::wrap(Node::Mul(a, b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_exact(1.0) {
            return a;
        }
        if a.is_exact(0.0) && b.as_exact_const().is_none_or(|v| v != 0.0) {
            return Expr::zero();
        }
        if let (Some(x), Some(y)) = (a.as_exact_const(), b.as_exact_const()) {
            if y != 0.0 {
                let q = x / y;
                if q.is_finite() && exact_product(q, y) == Some(x) {
                    return Expr::constant(q);
                }
            }
        }
        Expr::wrap(Node::Div(a, b))
    }

    /// Quotient of two constants as a single constant with a sound enclosure.
    pub fn const_quotient(a: (f64, Interval), b: (f64, Interval)) -> Result<Expr, IntervalError> {
        let enclosure = a.1.div(b.1)?;
        let value = (a.0 / b.0).clamp(enclosure.lo(), enclosure.hi());
        Ok(if enclosure.is_point() {
            Expr::constant(enclosure.lo())
        } else {
            Expr::constant_enclosed(value, enclosure)
        })
    }

    pub fn pow(a: Expr, k: u32) -> Expr {
        match k {
            0 => Expr::one(),
            1 => a,
            _ => {
                if let Some(x) = a.as_exact_const() {
                    let mut acc = Some(1.0);
                    for _ in 0..k {
                        acc = acc.and_then(|v| exact_product(v, x));
                    }
                    if let Some(v) = acc {
                        return Expr::constant(v);
                    }
                }
                Expr::wrap(Node::Pow(a, k))
            }
        }
    }

    pub fn sin(a: Expr) -> Expr {
        if a.is_exact(0.0) {
            return Expr::zero();
        }
        Expr::wrap(Node::Sin(a))
    }

    pub fn cos(a: Expr) -> Expr {
        if a.is_exact(0.0) {
            return Expr::one();
        }
        Expr::wrap(Node::Cos(a))
    }

    pub fn exp(a: Expr) -> Expr {
        if a.is_exact(0.0) {
            return Expr::one();
        }
        Expr::wrap(Node::Exp(a))
    }

    pub fn log(a: Expr) -> Expr {
        if a.is_exact(1.0) {
            return Expr::zero();
        }
        Expr::wrap(Node::Log(a))
    }

    pub fn sqrt(a: Expr) -> Expr {
        if a.is_exact(0.0) || a.is_exact(1.0) {
            return a;
        }
        Expr::wrap(Node::Sqrt(a))
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        use Node::*;
        match self.node() {
            Const { .. } => None,
            Var(i) => Some(*i),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Neg(a) | Pow(a, _) | Sin(a) | Cos(a) | Exp(a) | Log(a) | Sqrt(a) => a.max_var(),
        }
    }

    /// Whether the expression is a polynomial in its variables (division
    /// only by constants).
    pub fn is_polynomial(&self) -> bool {
        use Node::*;
        match self.node() {
            Const { .. } | Var(_) => true,
            Add(a, b) | Sub(a, b) | Mul(a, b) => a.is_polynomial() && b.is_polynomial(),
            Div(a, b) => a.is_polynomial() && b.max_var().is_none(),
            Neg(a) | Pow(a, _) => a.is_polynomial(),
            Sin(a) | Cos(a) | Exp(a) | Log(a) | Sqrt(a) => a.max_var().is_none(),
        }
    }

    /// Symbolic partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        use Node::*;
        match self.node() {
            Const { .. } => Expr::zero(),
            Var(j) => {
                if *j == i {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Add(a, b) => Expr::add(a.diff(i), b.diff(i)),
            Sub(a, b) => Expr::sub(a.diff(i), b.diff(i)),
            Neg(a) => Expr::neg(a.diff(i)),
            Mul(a, b) => Expr::add(
                Expr::mul(a.diff(i), b.clone()),
                Expr::mul(a.clone(), b.diff(i)),
            ),
            Div(a, b) => {
                let db = b.diff(i);
                let da = a.diff(i);
                if db.is_exact(0.0) {
                    Expr::div(da, b.clone())
                } else {
                    Expr::div(
                        Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                        Expr::pow(b.clone(), 2),
                    )
                }
            }
            Pow(a, k) => Expr::mul(
                Expr::mul(Expr::constant(*k as f64), Expr::pow(a.clone(), k - 1)),
                a.diff(i),
            ),
            Sin(a) => Expr::mul(a.diff(i), Expr::cos(a.clone())),
            Cos(a) => Expr::neg(Expr::mul(a.diff(i), Expr::sin(a.clone()))),
            Exp(a) => Expr::mul(a.diff(i), self.clone()),
            Log(a) => Expr::div(a.diff(i), a.clone()),
            Sqrt(a) => Expr::div(a.diff(i), Expr::mul(Expr::constant(2.0), self.clone())),
        }
    }

    /// Replaces variable `i` by the constant `t`, folding where exact.
    pub fn substitute(&self, i: usize, t: f64) -> Expr {
        self.map_vars(&|j| (j == i).then(|| Expr::constant(t)))
    }

    /// Rebuilds the tree with every variable `j` replaced by `f(j)` when it
    /// returns `Some`.
    pub fn map_vars(&self, f: &dyn Fn(usize) -> Option<Expr>) -> Expr {
        use Node::*;
        match self.node() {
            Const { .. } => self.clone(),
            Var(j) => f(*j).unwrap_or_else(|| self.clone()),
            Add(a, b) => Expr::add(a.map_vars(f), b.map_vars(f)),
            Sub(a, b) => Expr::sub(a.map_vars(f), b.map_vars(f)),
            Mul(a, b) => Expr::mul(a.map_vars(f), b.map_vars(f)),
            Div(a, b) => Expr::div(a.map_vars(f), b.map_vars(f)),
            Neg(a) => Expr::neg(a.map_vars(f)),
            Pow(a, k) => Expr::pow(a.map_vars(f), *k),
            Sin(a) => Expr::sin(a.map_vars(f)),
            Cos(a) => Expr::cos(a.map_vars(f)),
            Exp(a) => Expr::exp(a.map_vars(f)),
            Log(a) => Expr::log(a.map_vars(f)),
            Sqrt(a) => Expr::sqrt(a.map_vars(f)),
        }
    }

    /// Plain floating-point evaluation.
    pub fn eval_point(&self, p: &[f64]) -> Result<f64, EvalError> {
        use Node::*;
        let v = match self.node() {
            Const { value, .. } => *value,
            Var(j) => *p.get(*j).ok_or(EvalError::Arity {
                expected: j + 1,
                got: p.len(),
            })?,
            Add(a, b) => a.eval_point(p)? + b.eval_point(p)?,
            Sub(a, b) => a.eval_point(p)? - b.eval_point(p)?,
            Mul(a, b) => a.eval_point(p)? * b.eval_point(p)?,
            Div(a, b) => {
                let d = b.eval_point(p)?;
                if d == 0.0 {
                    return Err(EvalError::Domain("division by zero"));
                }
                a.eval_point(p)? / d
            }
            Neg(a) => -a.eval_point(p)?,
            Pow(a, k) => a.eval_point(p)?.powi(*k as i32),
            Sin(a) => a.eval_point(p)?.sin(),
            Cos(a) => a.eval_point(p)?.cos(),
            Exp(a) => a.eval_point(p)?.exp(),
            Log(a) => {
                let x = a.eval_point(p)?;
                if x <= 0.0 {
                    return Err(EvalError::Domain("log of a non-positive value"));
                }
                x.ln()
            }
            Sqrt(a) => {
                let x = a.eval_point(p)?;
                if x < 0.0 {
                    return Err(EvalError::Domain("sqrt of a negative value"));
                }
                x.sqrt()
            }
        };
        if v.is_nan() {
            return Err(EvalError::Domain("undefined value"));
        }
        Ok(v)
    }

    /// Natural interval extension: each node evaluated with interval
    /// arithmetic.
    pub fn eval_interval(&self, b: &[Interval]) -> Result<Interval, EvalError> {
        use Node::*;
        Ok(match self.node() {
            Const { enclosure, .. } => *enclosure,
            Var(j) => *b.get(*j).ok_or(EvalError::Arity {
                expected: j + 1,
                got: b.len(),
            })?,
            Add(x, y) => x.eval_interval(b)? + y.eval_interval(b)?,
            Sub(x, y) => x.eval_interval(b)? - y.eval_interval(b)?,
            Mul(x, y) => x.eval_interval(b)? * y.eval_interval(b)?,
            Div(x, y) => x.eval_interval(b)?.div(y.eval_interval(b)?)?,
            Neg(x) => -x.eval_interval(b)?,
            Pow(x, k) => x.eval_interval(b)?.powi(*k),
            Sin(x) => x.eval_interval(b)?.sin(),
            Cos(x) => x.eval_interval(b)?.cos(),
            Exp(x) => x.eval_interval(b)?.exp(),
            Log(x) => x.eval_interval(b)?.ln()?,
            Sqrt(x) => x.eval_interval(b)?.sqrt()?,
        })
    }

    /// Infix rendering using `names` for variables (falls back to `x1`,
    /// `x2`, ...). The output parses back to an equal tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.names, 0)
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    use Node::*;
    match e.node() {
        Const { value, .. } if value.is_sign_negative() => PREC_UNARY,
        Const { .. } | Var(_) | Sin(_) | Cos(_) | Exp(_) | Log(_) | Sqrt(_) => PREC_ATOM,
        Add(..) | Sub(..) => PREC_ADD,
        Mul(..) | Div(..) => PREC_MUL,
        Neg(_) => PREC_UNARY,
        Pow(..) => PREC_POW,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &[String], min: u8) -> fmt::Result {
    use Node::*;
    let p = precedence(e);
    if p < min {
        write!(f, "(")?;
        write_expr(f, e, names, 0)?;
        return write!(f, ")");
    }
    let call = |f: &mut fmt::Formatter<'_>, name: &str, a: &Expr| -> fmt::Result {
        write!(f, "{name}(")?;
        write_expr(f, a, names, 0)?;
        write!(f, ")")
    };
    match e.node() {
        Const { value, .. } => {
            if *value == 0.0 {
                write!(f, "0")
            } else {
                write!(f, "{value}")
            }
        }
        Var(i) => match names.get(*i) {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "x{}", i + 1),
        },
        Add(a, b) | Sub(a, b) => {
            write_expr(f, a, names, PREC_ADD)?;
            write!(f, " {} ", if matches!(e.node(), Add(..)) { "+" } else { "-" })?;
            write_expr(f, b, names, PREC_MUL)
        }
        Mul(a, b) | Div(a, b) => {
            write_expr(f, a, names, PREC_MUL)?;
            write!(f, "{}", if matches!(e.node(), Mul(..)) { "*" } else { "/" })?;
            write_expr(f, b, names, PREC_UNARY)
        }
        Neg(a) => {
            write!(f, "-")?;
            write_expr(f, a, names, PREC_UNARY)
        }
        Pow(a, k) => {
            write_expr(f, a, names, PREC_ATOM)?;
            write!(f, "^{k}")
        }
        Sin(a) => call(f, "sin", a),
        Cos(a) => call(f, "cos", a),
        Exp(a) => call(f, "exp", a),
        Log(a) => call(f, "log", a),
        Sqrt(a) => call(f, "sqrt", a),
    }
}
