//! Seeded random polynomial systems for benchmarks.
//!
//! `NiDj` names a system of `i` polynomials in `i` variables of total
//! degree `j`. Each polynomial has `terms` distinct monomials of total
//! degree at most `j` and nonzero integer coefficients in `[-coeff, coeff]`.
//! The first monomial always has degree exactly `j`, so the family degree
//! is attained, and a constant term is always present; without it every
//! polynomial vanishes at the origin and the system gets a planted,
//! usually singular, root there. `multiNiDj` builds `f_1 = f g` and
//! `f_k = df_1/dx_k` from two random polynomials, which plants singular roots where `f = g = 0`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcsys::poly::{Monomial, Poly};
use crate::funcsys::FuncSystem;
use crate::interval::Interval;

/// Terms per polynomial used by the multiple-root family.
pub const MULTI_TERMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub vars: usize,
    pub degree: u32,
    pub multi: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("cannot parse family '{0}'; expected NiDj or multiNiDj")]
    BadFamily(String),
    #[error("family needs at least one variable and degree at least 1")]
    Degenerate,
    #[error("multiple-root family needs at least 2 variables and degree at least 2")]
    MultiTooSmall,
    #[error("terms and coefficient bound must be at least 1")]
    BadParameters,
}

impl FromStr for Family {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GenerateError::BadFamily(s.to_string());
        let (multi, rest) = match s.strip_prefix("multi") {
            Some(r) => (true, r),
            None => (false, s),
        };
        let rest = rest.strip_prefix('N').ok_or_else(bad)?;
        let (i, j) = rest.split_once('D').ok_or_else(bad)?;
        let vars: usize = i.parse().map_err(|_| bad())?;
        let degree: u32 = j.parse().map_err(|_| bad())?;
        if vars == 0 || degree == 0 {
            return Err(GenerateError::Degenerate);
        }
        if multi && (vars < 2 || degree < 2) {
            return Err(GenerateError::MultiTooSmall);
        }
        Ok(Family { vars, degree, multi })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.multi {
            write!(f, "multi")?;
        }
        write!(f, "N{}D{}", self.vars, self.degree)
    }
}

/// All exponent vectors in `n` variables with total degree at most `d`,
/// in lexicographic order.
fn monomials(n: usize, d: u32) -> Vec<Monomial> {
    fn rec(n: usize, left: u32, cur: &mut Monomial, out: &mut Vec<Monomial>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::with_capacity(n), &mut out);
    out
}

fn coefficient(rng: &mut ChaCha8Rng, bound: i64) -> f64 {
    let k = rng.gen_range(1..=bound);
    (if rng.gen_bool(0.5) { k } else { -k }) as f64
}

/// One random polynomial with `terms` distinct monomials (fewer if the
/// degree does not allow that many): one of degree exactly `degree`, the
/// constant, and the rest drawn uniformly.
pub fn random_poly(rng: &mut ChaCha8Rng, n: usize, degree: u32, terms: usize, coeff: i64) -> Poly {
    let mut all = monomials(n, degree);
    let top: Vec<usize> = (0..all.len())
        .filter(|&k| all[k].iter().sum::<u32>() == degree)
        .collect();
    let first = all.swap_remove(top[rng.gen_range(0..top.len())]);
    let mut picked = vec![first];
    if terms >= 2 {
        // all[0] is the constant monomial
        picked.push(all.swap_remove(0));
    }
    let rest_count = terms.saturating_sub(picked.len()).min(all.len());
    let (rest, _) = all.partial_shuffle(rng, rest_count);
    picked.extend(rest.iter().cloned());
    Poly::from_terms(
        n,
        picked
            .into_iter()
            .map(|e| (e, Interval::point(coefficient(rng, coeff)))),
    )
}

/// Deterministic system for `family` with the given seed.
pub fn generate(family: Family, terms: usize, coeff: i64, seed: u64) -> Result<FuncSystem, GenerateError> {
    if terms == 0 || coeff < 1 {
        return Err(GenerateError::BadParameters);
    }
    let n = family.vars;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let polys: Vec<Poly> = if family.multi {
        let df = family.degree / 2;
        let f = random_poly(&mut rng, n, df, MULTI_TERMS.min(terms), coeff);
        let g = random_poly(&mut rng, n, family.degree - df, MULTI_TERMS.min(terms), coeff);
        let f1 = f.mul(&g);
        let e1 = f1.to_expr();
        std::iter::once(f1)
            .chain((1..n).map(|k| Poly::from_expr(&e1.diff(k), n).expect("derivative of a polynomial")))
            .collect()
    } else {
        (0..n)
            .map(|_| random_poly(&mut rng, n, family.degree, terms, coeff))
            .collect()
    };
    Ok(FuncSystem::from_exprs(polys.iter().map(Poly::to_expr).collect()).expect("generated system is square"))
}
