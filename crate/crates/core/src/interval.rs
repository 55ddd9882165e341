//! Outward-rounded interval arithmetic over `f64`, axis-aligned boxes and
//! interval matrices.
//!
//! Every operation widens its floating-point result by one ulp in the
//! outward direction unless the result is known to be exact (additions are
//! checked with an error-free transformation, products by zero or one are
//! exact). The rounding state is never touched, so everything here is safe to
//! use from any number of threads.

use std::fmt;
use std::ops::{Add, Deref, DerefMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("division by an interval containing zero: {0}")]
    DivisionByZero(Interval),
    #[error("{op} is undefined on {arg}")]
    Domain { op: &'static str, arg: Interval },
    #[error("invalid interval bounds [{0}, {1}]")]
    InvalidBounds(f64, f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot split a box of zero width")]
    ZeroWidth,
    #[error("a box needs at least one dimension")]
    EmptyBox,
}

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_nan() {
        return f64::NEG_INFINITY;
    }
    if s.is_infinite() {
        return if s > 0.0 && a.is_finite() && b.is_finite() {
            f64::MAX
        } else {
            s
        };
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_nan() {
        return f64::INFINITY;
    }
    if s.is_infinite() {
        return if s < 0.0 && a.is_finite() && b.is_finite() {
            f64::MIN
        } else {
            s
        };
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Error-free product `a * b = p + e` (Dekker), valid away from overflow and
/// underflow.
#[inline]
fn two_prod_err(a: f64, b: f64, p: f64) -> f64 {
    const SPLIT: f64 = 134217729.0; // 2^27 + 1
    let split = |x: f64| {
        let c = SPLIT * x;
        let hi = c - (c - x);
        (hi, x - hi)
    };
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// Whether the error-free transformations are trustworthy for these
/// magnitudes.
#[inline]
fn safe_range(a: f64, b: f64, r: f64) -> bool {
    const LO: f64 = 1e-280;
    const HI: f64 = 1e280;
    let (a, b, r) = (a.abs(), b.abs(), r.abs());
    a < HI && b < HI && r < HI && r > LO && a > LO && b > LO
}

/// Rounds `r` down and up given the sign of the exact residual `exact - r`.
#[inline]
fn by_residual(r: f64, err: f64) -> (f64, f64) {
    if err > 0.0 {
        (r, r.next_up())
    } else if err < 0.0 {
        (r.next_down(), r)
    } else {
        (r, r)
    }
}

/// Product rounded both ways. Returns `(down, up)`.
#[inline]
fn mul_round(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 || b == 0.0 {
        return (0.0, 0.0);
    }
    let p = a * b;
    if p.is_nan() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    if a.abs() == 1.0 || b.abs() == 1.0 {
        return (p, p);
    }
    if p.is_infinite() {
        let finite = a.is_finite() && b.is_finite();
        return if p > 0.0 {
            (if finite { f64::MAX } else { p }, p)
        } else {
            (p, if finite { f64::MIN } else { p })
        };
    }
    if safe_range(a, b, p) {
        return by_residual(p, two_prod_err(a, b, p));
    }
    (p.next_down(), p.next_up())
}

#[inline]
fn div_round(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 {
        return (0.0, 0.0);
    }
    let q = a / b;
    if q.is_nan() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    if b.abs() == 1.0 {
        return (q, q);
    }
    if q.is_infinite() {
        return (if q > 0.0 { f64::MAX } else { q }, if q < 0.0 { f64::MIN } else { q });
    }
    if safe_range(q, b, a) {
        // a - q*b is exactly representable; its sign relative to b gives
        // the direction of the exact quotient.
        let p = q * b;
        let rem = (a - p) - two_prod_err(q, b, p);
        let err = if b > 0.0 { rem } else { -rem };
        return by_residual(q, err);
    }
    (q.next_down(), q.next_up())
}

/// Widens a libm result by two ulps each way; libm transcendental functions
/// are accurate to within one ulp.
#[inline]
fn libm_bounds(v: f64) -> (f64, f64) {
    (v.next_down().next_down(), v.next_up().next_up())
}

/// A closed real interval `[lo, hi]`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = IntervalError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::try_new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Panics when `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        Self::try_new(lo, hi).expect("invalid interval")
    }

    pub fn try_new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(IntervalError::InvalidBounds(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    /// Smallest interval holding both `a` and `b`.
    pub fn spanning(a: f64, b: f64) -> Self {
        Interval::new(a.min(b), a.max(b))
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        if m.is_finite() {
            m.clamp(self.lo, self.hi)
        } else if self.lo.is_finite() {
            self.lo
        } else if self.hi.is_finite() {
            self.hi
        } else {
            0.0
        }
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn sign(&self) -> Sign {
        if self.lo > 0.0 {
            Sign::Pos
        } else if self.hi < 0.0 {
            Sign::Neg
        } else {
            Sign::Indeterminate
        }
    }

    pub fn div(self, rhs: Interval) -> Result<Interval, IntervalError> {
        if rhs.contains_zero() {
            return Err(IntervalError::DivisionByZero(rhs));
        }
        let cands = [
            div_round(self.lo, rhs.lo),
            div_round(self.lo, rhs.hi),
            div_round(self.hi, rhs.lo),
            div_round(self.hi, rhs.hi),
        ];
        Ok(Self::from_rounded(&cands))
    }

    pub fn recip(self) -> Result<Interval, IntervalError> {
        Interval::ONE.div(self)
    }

    fn from_rounded(cands: &[(f64, f64)]) -> Interval {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(d, u) in cands {
            lo = lo.min(d);
            hi = hi.max(u);
        }
        Interval { lo, hi }
    }

    /// Square with the even-power tightening `[-a, b]^2 = [0, max(a, b)^2]`.
    pub fn sqr(self) -> Interval {
        let (mlo, mhi) = if self.lo >= 0.0 {
            (self.lo, self.hi)
        } else if self.hi <= 0.0 {
            (-self.hi, -self.lo)
        } else {
            (0.0, self.mag())
        };
        Interval {
            lo: mul_round(mlo, mlo).0,
            hi: mul_round(mhi, mhi).1,
        }
    }

    /// Non-negative integer power, evaluated by repeated squaring.
    pub fn powi(self, k: u32) -> Interval {
        match k {
            0 => Interval::ONE,
            1 => self,
            _ => {
                if k % 2 == 0 {
                    self.sqr().powi(k / 2)
                } else {
                    // Odd powers are monotone.
                    let lo = Interval::point(self.lo).pow_by_squaring(k).lo;
                    let hi = Interval::point(self.hi).pow_by_squaring(k).hi;
                    Interval { lo, hi }
                }
            }
        }
    }

    fn pow_by_squaring(self, k: u32) -> Interval {
        let mut acc = Interval::ONE;
        let mut base = self;
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    pub fn sqrt(self) -> Result<Interval, IntervalError> {
        if self.lo < 0.0 {
            return Err(IntervalError::Domain { op: "sqrt", arg: self });
        }
        let lo = match self.lo {
            0.0 | 1.0 => self.lo,
            x => x.sqrt().next_down().max(0.0),
        };
        let hi = match self.hi {
            0.0 | 1.0 => self.hi,
            x => x.sqrt().next_up(),
        };
        Ok(Interval { lo, hi })
    }

    pub fn exp(self) -> Interval {
        let lo = if self.lo == f64::NEG_INFINITY {
            0.0
        } else {
            libm_bounds(self.lo.exp()).0.max(0.0)
        };
        let hi = libm_bounds(self.hi.exp()).1;
        Interval { lo, hi }
    }

    pub fn ln(self) -> Result<Interval, IntervalError> {
        if self.lo <= 0.0 {
            return Err(IntervalError::Domain { op: "log", arg: self });
        }
        let lo = if self.lo == 1.0 { 0.0 } else { libm_bounds(self.lo.ln()).0 };
        let hi = if self.hi == 1.0 { 0.0 } else { libm_bounds(self.hi.ln()).1 };
        Ok(Interval { lo, hi })
    }

    pub fn sin(self) -> Interval {
        use std::f64::consts::{FRAC_PI_2, TAU};
        if !self.lo.is_finite() || !self.hi.is_finite() || self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let a = libm_bounds(self.lo.sin());
        let b = libm_bounds(self.hi.sin());
        let mut lo = a.0.min(b.0);
        let mut hi = a.1.max(b.1);
        if hits_phase(self.lo, self.hi, FRAC_PI_2) {
            hi = 1.0;
        }
        if hits_phase(self.lo, self.hi, -FRAC_PI_2) {
            lo = -1.0;
        }
        Interval {
            lo: lo.max(-1.0),
            hi: hi.min(1.0),
        }
    }

    pub fn cos(self) -> Interval {
        use std::f64::consts::{PI, TAU};
        if !self.lo.is_finite() || !self.hi.is_finite() || self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let a = libm_bounds(self.lo.cos());
        let b = libm_bounds(self.hi.cos());
        let mut lo = a.0.min(b.0);
        let mut hi = a.1.max(b.1);
        if hits_phase(self.lo, self.hi, 0.0) {
            hi = 1.0;
        }
        if hits_phase(self.lo, self.hi, PI) {
            lo = -1.0;
        }
        Interval {
            lo: lo.max(-1.0),
            hi: hi.min(1.0),
        }
    }
}

/// Whether `[lo, hi]` may contain `phase + 2kπ` for some integer `k`.
/// Errs on the side of `true` near the boundary.
fn hits_phase(lo: f64, hi: f64, phase: f64) -> bool {
    use std::f64::consts::TAU;
    let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    let k = ((lo - phase) / TAU).ceil();
    for kk in [k - 1.0, k, k + 1.0] {
        let c = phase + kk * TAU;
        if c >= lo - slack && c <= hi + slack {
            return true;
        }
    }
    false
}

impl Add for Interval {
    type Output = Interval;

    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;

    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, -rhs.hi),
            hi: add_up(self.hi, -rhs.lo),
        }
    }
}

impl Neg for Interval {
    type Output = Interval;

    #[inline]
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;

    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        if self.lo >= 0.0 && rhs.lo >= 0.0 {
            return Interval {
                lo: mul_round(self.lo, rhs.lo).0,
                hi: mul_round(self.hi, rhs.hi).1,
            };
        }
        let cands = [
            mul_round(self.lo, rhs.lo),
            mul_round(self.lo, rhs.hi),
            mul_round(self.hi, rhs.lo),
            mul_round(self.hi, rhs.hi),
        ];
        Interval::from_rounded(&cands)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;

    fn mul(self, rhs: f64) -> Interval {
        self * Interval::point(rhs)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;

    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

/// Sign of a set of reals: strictly positive, strictly negative, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
    Indeterminate,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
            Sign::Indeterminate => 0,
        }
    }

    pub fn is_strict(self) -> bool {
        self != Sign::Indeterminate
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
            Sign::Indeterminate => Sign::Indeterminate,
        }
    }

    /// Common strict sign of all values, if there is one.
    pub fn common<I: IntoIterator<Item = Sign>>(signs: I) -> Sign {
        let mut acc: Option<Sign> = None;
        for s in signs {
            if !s.is_strict() {
                return Sign::Indeterminate;
            }
            match acc {
                None => acc = Some(s),
                Some(prev) if prev != s => return Sign::Indeterminate,
                _ => {}
            }
        }
        acc.unwrap_or(Sign::Indeterminate)
    }
}

/// An ordered list of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalVector(pub Vec<Interval>);

impl Deref for IntervalVector {
    type Target = Vec<Interval>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for IntervalVector {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl From<Vec<Interval>> for IntervalVector {
    fn from(v: Vec<Interval>) -> Self {
        IntervalVector(v)
    }
}

impl FromIterator<Interval> for IntervalVector {
    fn from_iter<T: IntoIterator<Item = Interval>>(iter: T) -> Self {
        IntervalVector(iter.into_iter().collect())
    }
}

/// `u` and `v` are matched when no entry contains zero and all products
/// `u_i * v_i` carry the same strict sign.
pub fn matched(u: &[Interval], v: &[Interval]) -> Result<bool, IntervalError> {
    if u.len() != v.len() {
        return Err(IntervalError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let signs = u.iter().zip(v).map(|(a, b)| {
        let (sa, sb) = (a.sign(), b.sign());
        if !sa.is_strict() || !sb.is_strict() {
            Sign::Indeterminate
        } else if sa == sb {
            Sign::Pos
        } else {
            Sign::Neg
        }
    });
    Ok(Sign::common(signs).is_strict())
}

/// Which endpoint of a dimension a face sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Face of an n-D box: the remaining (n-1)-D box plus the fixed coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFace {
    pub boxed: Option<NBox>,
    pub index: usize,
    pub value: f64,
}

/// Axis-aligned box `[a_1, b_1] x ... x [a_n, b_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NBox {
    dims: Vec<Interval>,
}

impl NBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self, IntervalError> {
        if dims.is_empty() {
            return Err(IntervalError::EmptyBox);
        }
        Ok(NBox { dims })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, IntervalError> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::try_new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        NBox::new(dims)
    }

    /// The box `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        NBox::new(vec![Interval::new(lo, hi); n]).expect("n >= 1")
    }

    /// Degenerate box holding a single point.
    pub fn point(p: &[f64]) -> Self {
        NBox::new(p.iter().map(|&x| Interval::point(x)).collect()).expect("point dimension >= 1")
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn dims_mut(&mut self) -> &mut [Interval] {
        &mut self.dims
    }

    pub fn width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }

    /// Index of the widest dimension; ties go to the lowest index.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for (i, d) in self.dims.iter().enumerate() {
            if d.width() > self.dims[best].width() {
                best = i;
            }
        }
        best
    }

    /// All `2^n` vertices. Vertex `k` takes the upper endpoint in dimension
    /// `i` when bit `i` of `k` is set.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        (0..1usize << self.dim()).map(|mask| self.vertex(mask as u64)).collect()
    }

    pub fn vertex(&self, mask: u64) -> Vec<f64> {
        self.dims
            .iter()
            .enumerate()
            .map(|(i, d)| if mask >> i & 1 == 1 { d.hi } else { d.lo })
            .collect()
    }

    /// The face `x_i = a_i` (left) or `x_i = b_i` (right), as an (n-1)-D box
    /// with the dropped coordinate recorded. For a 1-D box the remaining box
    /// is `None`.
    pub fn face(&self, i: usize, side: Side) -> BoxFace {
        let value = match side {
            Side::Left => self.dims[i].lo,
            Side::Right => self.dims[i].hi,
        };
        let rest: Vec<Interval> = self
            .dims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, d)| *d)
            .collect();
        BoxFace {
            boxed: NBox::new(rest).ok(),
            index: i,
            value,
        }
    }

    /// Same box with dimension `i` collapsed onto `value`.
    pub fn with_fixed(&self, i: usize, value: f64) -> NBox {
        let mut b = self.clone();
        b.dims[i] = Interval::point(value);
        b
    }

    pub fn with_dim(&self, i: usize, iv: Interval) -> NBox {
        let mut b = self.clone();
        b.dims[i] = iv;
        b
    }

    /// Bisects the widest dimension at its midpoint.
    pub fn split(&self) -> Result<(NBox, NBox), IntervalError> {
        if self.width() <= 0.0 {
            return Err(IntervalError::ZeroWidth);
        }
        Ok(self.split_dim(self.widest_dim()))
    }

    pub fn split_dim(&self, i: usize) -> (NBox, NBox) {
        let d = self.dims[i];
        let m = d.mid();
        (
            self.with_dim(i, Interval::new(d.lo, m)),
            self.with_dim(i, Interval::new(m, d.hi)),
        )
    }

    /// Bisects every dimension `depth` times, giving `2^(n*depth)` boxes.
    pub fn presplit(&self, depth: usize) -> Vec<NBox> {
        let mut boxes = vec![self.clone()];
        for _ in 0..depth {
            for i in 0..self.dim() {
                boxes = boxes
                    .into_iter()
                    .flat_map(|b| {
                        if b.dims[i].width() > 0.0 {
                            let (l, r) = b.split_dim(i);
                            vec![l, r]
                        } else {
                            vec![b]
                        }
                    })
                    .collect();
            }
        }
        boxes
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.dims.iter().zip(p).all(|(d, &x)| d.contains(x))
    }

    pub fn contains_box(&self, other: &NBox) -> bool {
        self.dims
            .iter()
            .zip(&other.dims)
            .all(|(a, b)| a.contains_interval(b))
    }

    /// Whether the closed boxes share at least one point.
    pub fn touches(&self, other: &NBox) -> bool {
        self.dims
            .iter()
            .zip(&other.dims)
            .all(|(a, b)| a.lo <= b.hi && b.lo <= a.hi)
    }

    /// Whether the open interiors overlap.
    pub fn interiors_overlap(&self, other: &NBox) -> bool {
        self.dims
            .iter()
            .zip(&other.dims)
            .all(|(a, b)| a.lo < b.hi && b.lo < a.hi)
    }

    pub fn hull(&self, other: &NBox) -> NBox {
        NBox {
            dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect(),
        }
    }

    pub fn intersect(&self, other: &NBox) -> Option<NBox> {
        let dims = self
            .dims
            .iter()
            .zip(&other.dims)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()?;
        Some(NBox { dims })
    }

    /// Grows every dimension by `r` on both sides.
    pub fn inflate(&self, r: f64) -> NBox {
        NBox {
            dims: self
                .dims
                .iter()
                .map(|d| Interval::new((d.lo - r).next_down(), (d.hi + r).next_up()))
                .collect(),
        }
    }

    /// Box of half-width `r` around `p`.
    pub fn around(p: &[f64], r: f64) -> NBox {
        NBox::point(p).inflate(r)
    }

    /// Lexicographic order on lower endpoints, then upper endpoints.
    pub fn canonical_cmp(&self, other: &NBox) -> std::cmp::Ordering {
        for (a, b) in self.dims.iter().zip(&other.dims) {
            match a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl fmt::Display for NBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

/// Row-major matrix of intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntervalMatrix {
            rows,
            cols,
            data: vec![Interval::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Interval::ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Interval>>) -> Result<Self, IntervalError> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if nr == 0 || nc == 0 {
            return Err(IntervalError::EmptyBox);
        }
        let mut data = Vec::with_capacity(nr * nc);
        for r in rows {
            if r.len() != nc {
                return Err(IntervalError::DimensionMismatch {
                    expected: nc,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(IntervalMatrix {
            rows: nr,
            cols: nc,
            data,
        })
    }

    pub fn from_bounds(rows: &[&[(f64, f64)]]) -> Self {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&(a, b)| Interval::new(a, b)).collect())
            .collect();
        Self::from_rows(rows).expect("rectangular bounds")
    }

    /// Degenerate interval matrix with the given real entries.
    pub fn from_real(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, Interval::point(m[(i, j)]));
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Interval {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Interval) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Interval] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Midpoint matrix.
    pub fn mid(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).mid())
    }

    /// Sub-matrix on the given rows and columns (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> IntervalMatrix {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    /// `real * self`, with the real matrix taken as exact.
    pub fn left_mul_real(&self, m: &DMatrix<f64>) -> IntervalMatrix {
        assert_eq!(m.ncols(), self.rows);
        let mut out = Self::zeros(m.nrows(), self.cols);
        for i in 0..m.nrows() {
            for j in 0..self.cols {
                let mut acc = Interval::ZERO;
                for k in 0..self.rows {
                    acc = acc + self.get(k, j) * m[(i, k)];
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn mul(&self, rhs: &IntervalMatrix) -> IntervalMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = Interval::ZERO;
                for k in 0..self.cols {
                    acc = acc + self.get(i, k) * rhs.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Interval]) -> Vec<Interval> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Interval::ZERO, |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn contains_real(&self, m: &DMatrix<f64>) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j).contains(m[(i, j)])))
    }
}

/// Determinants of every square sub-matrix built from the first `k` rows and
/// any `k` columns, for `k = 1..=max_order`. Entry `mask` holds the minor on
/// the columns whose bits are set in `mask` (its order is the popcount).
#[derive(Debug, Clone)]
pub struct LeadingMinors {
    cols: usize,
    values: Vec<Option<Interval>>,
}

impl LeadingMinors {
    /// Computes all leading-row-block minors up to `max_order` by expansion
    /// along the last row of each block, reusing the minors of the previous
    /// order. Stops early (returning `Err(order)`) at the first order that
    /// has a minor containing zero when `stop_on_zero` is set.
    pub fn compute(
        m: &IntervalMatrix,
        max_order: usize,
        stop_on_zero: bool,
    ) -> Result<LeadingMinors, (usize, LeadingMinors)> {
        let n = m.ncols();
        assert!(n <= 24, "too many columns for subset enumeration");
        let max_order = max_order.min(m.nrows()).min(n);
        let mut values: Vec<Option<Interval>> = vec![None; 1 << n];
        values[0] = Some(Interval::ONE);
        let mut by_order: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
        for mask in 1u32..(1 << n) {
            by_order[mask.count_ones() as usize].push(mask);
        }
        for k in 1..=max_order {
            let row = k - 1;
            let mut failed = false;
            for &mask in &by_order[k] {
                let mut acc = Interval::ZERO;
                let mut pos = 0usize;
                for c in 0..n {
                    if mask >> c & 1 == 0 {
                        continue;
                    }
                    let sub = values[(mask & !(1 << c)) as usize].expect("lower order minor");
                    let term = m.get(row, c) * sub;
                    acc = if (row + pos) % 2 == 0 { acc + term } else { acc - term };
                    pos += 1;
                }
                if acc.contains_zero() {
                    failed = true;
                }
                values[mask as usize] = Some(acc);
            }
            if failed && stop_on_zero {
                return Err((k, LeadingMinors { cols: n, values }));
            }
        }
        Ok(LeadingMinors { cols: n, values })
    }

    /// Minor on the column set `cols` (sorted or not) of the leading
    /// `cols.len()` rows.
    pub fn get(&self, cols: &[usize]) -> Option<Interval> {
        let mask = cols.iter().fold(0usize, |m, &c| m | 1 << c);
        self.values.get(mask).copied().flatten()
    }

    pub fn get_mask(&self, mask: usize) -> Option<Interval> {
        self.values.get(mask).copied().flatten()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// All computed minors of order `k`, keyed by column mask.
    pub fn of_order(&self, k: usize) -> Vec<(usize, Interval)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask.count_ones() as usize == k)
            .filter_map(|(mask, v)| v.map(|v| (mask, v)))
            .collect()
    }
}

/// Interval enclosure of the determinant of a square interval matrix.
pub fn det(m: &IntervalMatrix) -> Interval {
    assert_eq!(m.nrows(), m.ncols(), "determinant of a non-square matrix");
    let n = m.nrows();
    let minors = match LeadingMinors::compute(m, n, false) {
        Ok(v) => v,
        Err((_, v)) => v,
    };
    minors.get_mask((1 << n) - 1).expect("full minor")
}
