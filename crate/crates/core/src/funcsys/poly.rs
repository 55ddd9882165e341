//! Sparse multivariate polynomials with interval coefficients.

use std::collections::BTreeMap;

use crate::interval::Interval;

use super::expr::{Expr, Node};

/// Exponent vector of a monomial.
pub type Monomial = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, Interval>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Interval) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, Interval::ONE);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, Interval)>) -> Self {
        let mut p = Poly::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars);
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Interval)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Monomial, c: Interval) {
        let slot = self.terms.entry(e.clone()).or_insert(Interval::ZERO);
        *slot = *slot + c;
        if *slot == Interval::ZERO {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -*c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Monomial = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, *c1 * *c2);
            }
        }
        out
    }

    pub fn scale(&self, c: Interval) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), *v * c);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::constant(self.nvars, Interval::ONE);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Expands `e` when it is a polynomial; `None` otherwise.
    pub fn from_expr(e: &Expr, nvars: usize) -> Option<Poly> {
        use Node::*;
        Some(match e.node() {
            Const { enclosure, .. } => Poly::constant(nvars, *enclosure),
            Var(i) => {
                if *i >= nvars {
                    return None;
                }
                Poly::var(nvars, *i)
            }
            Add(a, b) => Poly::from_expr(a, nvars)?.add(&Poly::from_expr(b, nvars)?),
            Sub(a, b) => Poly::from_expr(a, nvars)?.sub(&Poly::from_expr(b, nvars)?),
            Mul(a, b) => Poly::from_expr(a, nvars)?.mul(&Poly::from_expr(b, nvars)?),
            Neg(a) => Poly::from_expr(a, nvars)?.neg(),
            Pow(a, k) => Poly::from_expr(a, nvars)?.pow(*k),
            Div(a, b) => {
                if b.max_var().is_some() {
                    return None;
                }
                let d = b.eval_interval(&[]).ok()?;
                Poly::from_expr(a, nvars)?.scale(d.recip().ok()?)
            }
            Sin(_) | Cos(_) | Exp(_) | Log(_) | Sqrt(_) => {
                if e.max_var().is_some() {
                    return None;
                }
                Poly::constant(nvars, e.eval_interval(&[]).ok()?)
            }
        })
    }

    /// Expression form, highest total degree first. Inexact coefficients
    /// keep their enclosure.
    pub fn to_expr(&self) -> Expr {
        let mut terms: Vec<(&Monomial, &Interval)> = self.terms.iter().collect();
        terms.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then_with(|| b.0.cmp(a.0))
        });
        let mut acc: Option<Expr> = None;
        for (e, c) in terms {
            let negative = c.hi() < 0.0;
            let c = if negative { -*c } else { *c };
            let coef = if c.is_point() {
                Expr::constant(c.lo())
            } else {
                Expr::constant_enclosed(c.mid(), c)
            };
            let mut mono: Option<Expr> = None;
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let f = Expr::pow(Expr::var(i), k);
                mono = Some(match mono {
                    None => f,
                    Some(m) => Expr::mul(m, f),
                });
            }
            let term = match mono {
                None => coef,
                Some(m) => Expr::mul(coef, m),
            };
            acc = Some(match (acc, negative) {
                (None, false) => term,
                (None, true) => Expr::neg(term),
                (Some(a), false) => Expr::add(a, term),
                (Some(a), true) => Expr::sub(a, term),
            });
        }
        acc.unwrap_or_else(Expr::zero)
    }

    pub fn eval_interval(&self, b: &[Interval]) -> Interval {
        self.terms.iter().fold(Interval::ZERO, |acc, (e, c)| {
            let m = e
                .iter()
                .zip(b)
                .fold(*c, |m, (&k, x)| if k == 0 { m } else { m * x.powi(k) });
            acc + m
        })
    }

    /// Univariate interval polynomial in variable `var` obtained by
    /// evaluating every other variable on `b` (entries of `b` at `var` are
    /// ignored). Coefficient `k` multiplies `x_var^k`.
    pub fn collapse(&self, b: &[Interval], var: usize) -> Vec<Interval> {
        let mut coeffs = vec![Interval::ZERO; self.degree_in(var) as usize + 1];
        for (e, c) in &self.terms {
            let mut m = *c;
            for (i, &k) in e.iter().enumerate() {
                if i != var && k > 0 {
                    m = m * b[i].powi(k);
                }
            }
            let slot = &mut coeffs[e[var] as usize];
            *slot = *slot + m;
        }
        coeffs
    }

    /// `x_i^{d_i} * p(.., 1/x_i, ..)` for every flagged `i`, with `d_i` the
    /// degree of `p` in `x_i`.
    pub fn invert_vars(&self, flags: &[bool]) -> Poly {
        let degs: Vec<u32> = (0..self.nvars).map(|i| self.degree_in(i)).collect();
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let e2 = e
                        .iter()
                        .enumerate()
                        .map(|(i, &k)| if flags[i] { degs[i] - k } else { k })
                        .collect();
                    (e2, *c)
                })
                .collect(),
        }
    }

    /// `p(c_1 x_1, ..., c_n x_n)`.
    pub fn scale_vars(&self, c: &[f64]) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            let f = e
                .iter()
                .zip(c)
                .fold(*v, |acc, (&k, &ci)| acc * Interval::point(ci).powi(k));
            out.add_term(e.clone(), f);
        }
        out
    }
}
