//! Square systems of nonlinear functions: expressions, parsing, evaluation,
//! Jacobians and face restriction.

pub mod expr;
pub mod file;
pub mod parse;
pub mod poly;
pub mod tape;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::interval::{Interval, IntervalError, IntervalMatrix, NBox};

pub use expr::{Expr, Node};
pub use parse::{parse_expr, ParseError};
pub use tape::Tape;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("interval evaluation failed: {0}")]
    Interval(#[from] IntervalError),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("equation {equation}: {source}")]
    Parse {
        equation: usize,
        #[source]
        source: ParseError,
    },
    #[error("system is not square: {vars} variables, {equations} equations")]
    NotSquare { vars: usize, equations: usize },
    #[error("a system needs at least one variable")]
    Empty,
    #[error("duplicate variable name '{0}'")]
    DuplicateVar(String),
    #[error("invalid variable name '{0}'")]
    BadVarName(String),
    #[error("expression refers to variable {index} but the system has {n}")]
    VarOutOfRange { index: usize, n: usize },
    #[error("variable {0} is already fixed")]
    AlreadyFixed(usize),
    #[error("variable index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("restriction would leave no free variable")]
    NoFreeVariable,
    #[error("expected {expected} per-variable entries, got {got}")]
    ArityMismatch { expected: usize, got: usize },
}

/// The midpoint Jacobian is singular or too badly conditioned to invert.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("midpoint Jacobian is not invertible (reciprocal condition {rcond:e})")]
pub struct NotInvertible {
    pub rcond: f64,
}

/// Reciprocal condition estimate below which a matrix counts as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// A square system `G = (g_1, ..., g_n)` in `n` variables that can be
/// evaluated on points and boxes.
pub trait SquareSystem: Sync {
    fn dim(&self) -> usize;

    fn eval_box(&self, b: &[Interval]) -> Result<Vec<Interval>, EvalError>;

    fn jacobian_box(&self, b: &[Interval]) -> Result<IntervalMatrix, EvalError>;

    fn eval_point(&self, p: &[f64]) -> Result<Vec<f64>, EvalError>;

    fn jacobian_point(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError>;
}

/// `n` expressions in `n` named variables together with their symbolic
/// Jacobian.
#[derive(Debug, Clone)]
pub struct FuncSystem {
    names: Vec<String>,
    exprs: Vec<Expr>,
    jac: Vec<Expr>,
    values: Tape,
    jac_tape: Tape,
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !["sin", "cos", "exp", "log", "sqrt"].contains(&s)
}

impl FuncSystem {
    pub fn new(names: Vec<String>, exprs: Vec<Expr>) -> Result<Self, SystemError> {
        let n = names.len();
        if n == 0 {
            return Err(SystemError::Empty);
        }
        if exprs.len() != n {
            return Err(SystemError::NotSquare {
                vars: n,
                equations: exprs.len(),
            });
        }
        for (i, name) in names.iter().enumerate() {
            if !valid_name(name) {
                return Err(SystemError::BadVarName(name.clone()));
            }
            if names[..i].contains(name) {
                return Err(SystemError::DuplicateVar(name.clone()));
            }
        }
        for e in &exprs {
            if let Some(index) = e.max_var().filter(|&i| i >= n) {
                return Err(SystemError::VarOutOfRange { index, n });
            }
        }
        let jac: Vec<Expr> = exprs
            .iter()
            .flat_map(|e| (0..n).map(move |j| e.diff(j)))
            .collect();
        Ok(FuncSystem {
            values: Tape::compile(&exprs, n),
            jac_tape: Tape::compile(&jac, n),
            names,
            exprs,
            jac,
        })
    }

    /// System in variables `x1, ..., xn`.
    pub fn from_exprs(exprs: Vec<Expr>) -> Result<Self, SystemError> {
        let names = (1..=exprs.len()).map(|i| format!("x{i}")).collect();
        FuncSystem::new(names, exprs)
    }

    pub fn parse<S: AsRef<str>, T: AsRef<str>>(vars: &[S], equations: &[T]) -> Result<Self, SystemError> {
        let names: Vec<String> = vars.iter().map(|s| s.as_ref().to_string()).collect();
        if let Some(bad) = names.iter().find(|s| !valid_name(s)) {
            return Err(SystemError::BadVarName(bad.clone()));
        }
        let exprs = equations
            .iter()
            .enumerate()
            .map(|(i, t)| {
                parse_expr(t.as_ref(), &names).map_err(|source| SystemError::Parse {
                    equation: i + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        FuncSystem::new(names, exprs)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    /// Symbolic Jacobian entry `d f_i / d x_j`.
    pub fn partial(&self, i: usize, j: usize) -> &Expr {
        &self.jac[i * self.names.len() + j]
    }

    /// The equations rendered as infix strings.
    pub fn equations(&self) -> Vec<String> {
        self.exprs
            .iter()
            .map(|e| e.display(&self.names).to_string())
            .collect()
    }

    pub fn is_polynomial(&self) -> bool {
        self.exprs.iter().all(Expr::is_polynomial)
    }

    /// Fixes ambient coordinate `i` at `t`.
    pub fn restrict(&self, i: usize, t: f64) -> Result<RestrictedSystem<'_>, SystemError> {
        RestrictedSystem::new(self).restrict(i, t)
    }

    /// The dimension, after checking that `len` per-variable entries match it.
    pub fn dim_checked(&self, len: usize) -> Result<usize, SystemError> {
        let n = self.names.len();
        if len == n {
            Ok(n)
        } else {
            Err(SystemError::ArityMismatch { expected: n, got: len })
        }
    }

    pub fn eval_nbox(&self, b: &NBox) -> Result<Vec<Interval>, EvalError> {
        self.eval_box(b.dims())
    }
}

impl SquareSystem for FuncSystem {
    fn dim(&self) -> usize {
        self.names.len()
    }

    fn eval_box(&self, b: &[Interval]) -> Result<Vec<Interval>, EvalError> {
        self.values.eval_interval(b)
    }

    fn jacobian_box(&self, b: &[Interval]) -> Result<IntervalMatrix, EvalError> {
        let n = self.dim();
        let v = self.jac_tape.eval_interval(b)?;
        let mut m = IntervalMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, v[i * n + j]);
            }
        }
        Ok(m)
    }

    fn eval_point(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.values.eval_point(p)
    }

    fn jacobian_point(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dim();
        let v = self.jac_tape.eval_point(p)?;
        Ok(DMatrix::from_row_slice(n, n, &v))
    }
}

/// A system with some ambient coordinates fixed. With `k` coordinates fixed
/// out of `n`, it presents the first `n - k` functions of the base system as
/// a system in the remaining free variables (in increasing index order).
pub struct RestrictedSystem<'a> {
    base: &'a dyn SquareSystem,
    fixed: Vec<Option<f64>>,
}

impl<'a> RestrictedSystem<'a> {
    /// Wraps `base` with nothing fixed.
    pub fn new(base: &'a dyn SquareSystem) -> Self {
        RestrictedSystem {
            fixed: vec![None; base.dim()],
            base,
        }
    }

    /// Fixes ambient coordinate `i` at `t`. The result shares the base
    /// system; restrictions never nest.
    pub fn restrict(&self, i: usize, t: f64) -> Result<RestrictedSystem<'a>, SystemError> {
        let n = self.fixed.len();
        if i >= n {
            return Err(SystemError::IndexOutOfRange { index: i, n });
        }
        if self.fixed[i].is_some() {
            return Err(SystemError::AlreadyFixed(i));
        }
        if self.free_count() == 1 {
            return Err(SystemError::NoFreeVariable);
        }
        let mut fixed = self.fixed.clone();
        fixed[i] = Some(t);
        Ok(RestrictedSystem {
            base: self.base,
            fixed,
        })
    }

    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_none()).count()
    }

    /// Ambient indices of the free variables.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&i| self.fixed[i].is_none()).collect()
    }

    pub fn fixed(&self) -> &[Option<f64>] {
        &self.fixed
    }

    fn embed_box(&self, b: &[Interval]) -> Result<Vec<Interval>, EvalError> {
        if b.len() != self.free_count() {
            return Err(EvalError::Arity {
                expected: self.free_count(),
                got: b.len(),
            });
        }
        let mut it = b.iter();
        Ok(self
            .fixed
            .iter()
            .map(|f| match f {
                Some(t) => Interval::point(*t),
                None => *it.next().expect("length checked"),
            })
            .collect())
    }

    fn embed_point(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        if p.len() != self.free_count() {
            return Err(EvalError::Arity {
                expected: self.free_count(),
                got: p.len(),
            });
        }
        let mut it = p.iter();
        Ok(self
            .fixed
            .iter()
            .map(|f| f.unwrap_or_else(|| *it.next().expect("length checked")))
            .collect())
    }
}

impl SquareSystem for RestrictedSystem<'_> {
    fn dim(&self) -> usize {
        self.free_count()
    }

    fn eval_box(&self, b: &[Interval]) -> Result<Vec<Interval>, EvalError> {
        let mut v = self.base.eval_box(&self.embed_box(b)?)?;
        v.truncate(self.free_count());
        Ok(v)
    }

    fn jacobian_box(&self, b: &[Interval]) -> Result<IntervalMatrix, EvalError> {
        let j = self.base.jacobian_box(&self.embed_box(b)?)?;
        let k = self.free_count();
        Ok(j.select(&(0..k).collect::<Vec<_>>(), &self.free_indices()))
    }

    fn eval_point(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut v = self.base.eval_point(&self.embed_point(p)?)?;
        v.truncate(self.free_count());
        Ok(v)
    }

    fn jacobian_point(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let j = self.base.jacobian_point(&self.embed_point(p)?)?;
        let free = self.free_indices();
        Ok(DMatrix::from_fn(free.len(), free.len(), |r, c| j[(r, free[c])]))
    }
}

/// Floating-point inverse of `m`, refused when the reciprocal condition
/// number in the 1-norm falls below [`RCOND_THRESHOLD`].
pub fn invert_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>, NotInvertible> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NotInvertible { rcond: 0.0 });
    }
    let inv = m.clone().try_inverse().ok_or(NotInvertible { rcond: 0.0 })?;
    let norm1 = |a: &DMatrix<f64>| {
        a.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let rcond = 1.0 / (norm1(m) * norm1(&inv));
    if !(rcond >= RCOND_THRESHOLD) || inv.iter().any(|v| !v.is_finite()) {
        return Err(NotInvertible {
            rcond: if rcond.is_nan() { 0.0 } else { rcond },
        });
    }
    Ok(inv)
}

/// Inverse of the Jacobian at the box midpoint.
pub fn invert_midpoint_jacobian(
    sys: &dyn SquareSystem,
    b: &NBox,
) -> Result<DMatrix<f64>, NotInvertible> {
    let j = sys
        .jacobian_point(&b.midpoint())
        .map_err(|_| NotInvertible { rcond: 0.0 })?;
    invert_matrix(&j)
}
