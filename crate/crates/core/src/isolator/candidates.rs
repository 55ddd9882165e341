//! Sleeve-polynomial pruning of the start box.
//!
//! The first `n - 1` dimensions are cut into a grid. On every cell each
//! equation collapses to a polynomial in the last variable with interval
//! coefficients, which lies between a lower and an upper real polynomial.
//! Only the ranges where that sleeve can contain zero survive.

use thiserror::Error;

use crate::funcsys::poly::Poly;
use crate::funcsys::{FuncSystem, SquareSystem};
use crate::interval::{Interval, NBox};

/// Bisection depth used to locate sleeve zero ranges inside a cell.
pub const SLEEVE_DEPTH: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CandidateError {
    #[error("equation {0} is not a polynomial; sleeve candidates need polynomials")]
    NotPolynomial(usize),
}

/// Horner evaluation of a real-coefficient polynomial on an interval.
fn horner(coeffs: &[f64], x: Interval) -> Interval {
    coeffs
        .iter()
        .rev()
        .fold(Interval::ZERO, |acc, &c| acc * x + c)
}

/// Lower and upper bounding polynomials of an interval polynomial on the
/// half line `x >= 0` (`negative = false`) or `x <= 0`.
fn bounds(coeffs: &[Interval], negative: bool) -> (Vec<f64>, Vec<f64>) {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if negative && k % 2 == 1 {
                (c.hi(), c.lo())
            } else {
                (c.lo(), c.hi())
            }
        })
        .unzip()
}

/// Can the sleeve contain zero somewhere on `x`? `x` must not straddle 0.
fn sleeve_may_vanish(coeffs: &[Interval], x: Interval) -> bool {
    let (lo, hi) = bounds(coeffs, x.hi() <= 0.0);
    horner(&lo, x).lo() <= 0.0 && horner(&hi, x).hi() >= 0.0
}

/// Closed ranges inside `x` where the sleeve may vanish, merged when
/// adjacent.
fn sleeve_ranges(coeffs: &[Interval], x: Interval, depth: u32) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    let mut stack = Vec::new();
    if x.lo() < 0.0 && x.hi() > 0.0 {
        stack.push((Interval::new(0.0, x.hi()), 0));
        stack.push((Interval::new(x.lo(), 0.0), 0));
    } else {
        stack.push((x, 0));
    }
    while let Some((piece, d)) = stack.pop() {
        if !sleeve_may_vanish(coeffs, piece) {
            continue;
        }
        if d >= depth || piece.width() == 0.0 {
            match out.last_mut() {
                Some(last) if last.hi() >= piece.lo() => *last = last.hull(&piece),
                _ => out.push(piece),
            }
            continue;
        }
        let m = piece.mid();
        stack.push((Interval::new(m, piece.hi()), d + 1));
        stack.push((Interval::new(piece.lo(), m), d + 1));
    }
    out
}

/// Intersection of two sorted lists of closed ranges.
fn intersect_ranges(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        if let Some(x) = a[i].intersect(&b[j]) {
            out.push(x);
        }
        if a[i].hi() < b[j].hi() {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Cells of a `grid`-per-dimension split of the first `n - 1` dimensions.
fn grid_cells(b: &NBox, grid: usize) -> Vec<NBox> {
    let n = b.dim();
    let mut cells = vec![b.clone()];
    for d in 0..n.saturating_sub(1) {
        let iv = b.dims()[d];
        let cuts: Vec<f64> = (0..=grid)
            .map(|k| match k {
                0 => iv.lo(),
                k if k == grid => iv.hi(),
                k => iv.lo() + iv.width() * (k as f64 / grid as f64),
            })
            .collect();
        cells = cells
            .into_iter()
            .flat_map(|c| {
                cuts.windows(2)
                    .map(|w| c.with_dim(d, Interval::new(w[0], w[1])))
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    cells
}

/// Sub-boxes of `b` that may hold zeros of `f`; every zero in `b` lies in
/// one of them.
pub fn candidates(f: &FuncSystem, b: &NBox, grid: usize) -> Result<Vec<NBox>, CandidateError> {
    let n = f.dim();
    let polys = f
        .exprs()
        .iter()
        .enumerate()
        .map(|(i, e)| Poly::from_expr(e, n).ok_or(CandidateError::NotPolynomial(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let last = n - 1;
    let mut out = Vec::new();
    for cell in grid_cells(b, grid.max(1)) {
        let mut ranges = vec![b.dims()[last]];
        for p in &polys {
            let coeffs = p.collapse(cell.dims(), last);
            let mine = sleeve_ranges(&coeffs, b.dims()[last], SLEEVE_DEPTH);
            ranges = intersect_ranges(&ranges, &mine);
            if ranges.is_empty() {
                break;
            }
        }
        out.extend(ranges.into_iter().map(|r| cell.with_dim(last, r)));
    }
    Ok(out)
}
