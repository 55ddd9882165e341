//! Opposite-monotone and strong-monotone matrix tests, the random S-M
//! rotation and the midpoint preconditioner.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcsys::{invert_midpoint_jacobian, EvalError, NotInvertible, SquareSystem};
use crate::interval::{matched, Interval, IntervalMatrix, LeadingMinors, NBox};

/// Signed cofactors `(-1)^(i+n) det(M_{n,i})` of the last row.
pub fn last_row_cofactors(m: &IntervalMatrix) -> Vec<Interval> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "cofactors of a non-square matrix");
    if n == 1 {
        return vec![Interval::ONE];
    }
    let minors = match LeadingMinors::compute(m, n - 1, false) {
        Ok(v) | Err((_, v)) => v,
    };
    let full = (1usize << n) - 1;
    (0..n)
        .map(|i| {
            let d = minors.get_mask(full & !(1 << i)).expect("order n-1 minor");
            // 0-based (i + n - 1) has the parity of 1-based (i + n)
            if (i + n - 1) % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

/// The last-row cofactors are matched with the last row.
pub fn is_om_matrix(m: &IntervalMatrix) -> bool {
    let n = m.nrows();
    let cof = last_row_cofactors(m);
    matched(&cof, m.row(n - 1)).expect("equal lengths")
}

/// Every determinant built from the first `i` rows and any `i` columns
/// excludes zero, for all `i`.
pub fn is_sm_matrix(m: &IntervalMatrix) -> bool {
    assert_eq!(m.nrows(), m.ncols(), "S-M test of a non-square matrix");
    LeadingMinors::compute(m, m.nrows(), true).is_ok()
}

/// Outcome of checking a system for strong monotonicity on a box.
#[derive(Debug, Clone)]
pub enum SmCheck {
    /// Passed; carries the interval Jacobian on the box.
    Verified(IntervalMatrix),
    /// Some leading-block minor of this order contains zero.
    NotSm { order: usize },
    /// The Jacobian could not be evaluated on the box.
    Eval(EvalError),
}

impl SmCheck {
    pub fn passed(&self) -> bool {
        matches!(self, SmCheck::Verified(_))
    }
}

pub fn check_sm_system(sys: &dyn SquareSystem, b: &NBox) -> SmCheck {
    let j = match sys.jacobian_box(b.dims()) {
        Ok(j) => j,
        Err(e) => return SmCheck::Eval(e),
    };
    match LeadingMinors::compute(&j, j.nrows(), true) {
        Ok(_) => SmCheck::Verified(j),
        Err((order, _)) => SmCheck::NotSm { order },
    }
}

pub fn is_sm_system(sys: &dyn SquareSystem, b: &NBox) -> bool {
    check_sm_system(sys, b).passed()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotationError {
    #[error("no S-M rotation found in {0} draws; try a larger scale")]
    Exhausted(usize),
    #[error("scale {scale} must be at least the dimension {n}")]
    ScaleTooSmall { scale: f64, n: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Real S-M matrix with dominant alternating diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SMRotation {
    pub v: Vec<Vec<f64>>,
    pub scale: f64,
    pub seed: u64,
    /// See [`sm_margin`].
    pub margin: f64,
}

impl SMRotation {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.v.len();
        DMatrix::from_fn(n, n, |i, j| self.v[i][j])
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }
}

/// Draw budget for [`make_sm_rotation`].
pub const ROTATION_RETRIES: usize = 1000;

/// Number of S-M draws compared by [`make_sm_rotation`].
pub const ROTATION_CANDIDATES: usize = 64;

/// Default rotation scale for dimension `n`.
pub fn default_scale(n: usize) -> f64 {
    n.max(3) as f64
}

/// Largest `t` (to about 1e-9, capped at 1) such that `V (I + E)` stays
/// S-M for every `E` with entries in `[-t, t]`.
///
/// Near a simple root the preconditioned Jacobian is `V (I + E)` with `E`
/// shrinking with the box, so a larger margin lets certification happen
/// on larger boxes.
pub fn sm_margin(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    let passes = |t: f64| {
        let mut e = IntervalMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                e.set(i, j, e.get(i, j) + Interval::new(-t, t));
            }
        }
        is_sm_matrix(&e.left_mul_real(v))
    };
    if !passes(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if passes(hi) {
        return hi;
    }
    while hi - lo > 1e-9 {
        let t = 0.5 * (lo + hi);
        if passes(t) {
            lo = t;
        } else {
            hi = t;
        }
    }
    lo
}

/// Draws `V` with `V_ii = (-1)^i N` (0-based `i`) and off-diagonal entries
/// uniform in `[-1, 1]`, and keeps the draw with the largest
/// [`sm_margin`] among the first [`ROTATION_CANDIDATES`] that pass the S-M
/// test. With `randomize_signs`, draws after the first also pick random
/// diagonal signs.
pub fn make_sm_rotation(
    n: usize,
    scale: f64,
    seed: u64,
    randomize_signs: bool,
) -> Result<SMRotation, RotationError> {
    if n == 0 {
        return Err(RotationError::ZeroDimension);
    }
    if scale < n as f64 {
        return Err(RotationError::ScaleTooSmall { scale, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<SMRotation> = None;
    let mut accepted = 0;
    for attempt in 0..ROTATION_RETRIES {
        let mut v = vec![vec![0.0; n]; n];
        for (i, row) in v.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                if i == j {
                    let positive = if randomize_signs && attempt > 0 {
                        rng.gen_bool(0.5)
                    } else {
                        i % 2 == 0
                    };
                    *x = if positive { scale } else { -scale };
                } else {
                    *x = rng.gen_range(-1.0..=1.0);
                }
            }
        }
        let mut rot = SMRotation {
            v,
            scale,
            seed,
            margin: 0.0,
        };
        let m = rot.matrix();
        if !is_sm_matrix(&IntervalMatrix::from_real(&m)) {
            continue;
        }
        rot.margin = sm_margin(&m);
        if best.as_ref().is_none_or(|b| rot.margin > b.margin) {
            best = Some(rot);
        }
        accepted += 1;
        if accepted == ROTATION_CANDIDATES {
            break;
        }
    }
    best.ok_or(RotationError::Exhausted(ROTATION_RETRIES))
}

/// `G = M F` for a real matrix `M`; `J_G = M J_F`, formed numerically.
pub struct PrecondSystem<'a> {
    base: &'a dyn SquareSystem,
    m: DMatrix<f64>,
    origin: Option<NBox>,
}

impl<'a> PrecondSystem<'a> {
    pub fn new(base: &'a dyn SquareSystem, m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), base.dim());
        assert_eq!(m.ncols(), base.dim());
        PrecondSystem {
            base,
            m,
            origin: None,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// The box whose midpoint Jacobian built the matrix, if any.
    pub fn origin(&self) -> Option<&NBox> {
        self.origin.as_ref()
    }

    pub fn base(&self) -> &dyn SquareSystem {
        self.base
    }
}

impl SquareSystem for PrecondSystem<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval_box(&self, b: &[Interval]) -> Result<Vec<Interval>, EvalError> {
        let f = self.base.eval_box(b)?;
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                (0..n).fold(Interval::ZERO, |acc, k| acc + f[k] * self.m[(i, k)])
            })
            .collect())
    }

    fn jacobian_box(&self, b: &[Interval]) -> Result<IntervalMatrix, EvalError> {
        Ok(self.base.jacobian_box(b)?.left_mul_real(&self.m))
    }

    fn eval_point(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        let f = nalgebra::DVector::from_vec(self.base.eval_point(p)?);
        Ok((&self.m * f).iter().copied().collect())
    }

    fn jacobian_point(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        Ok(&self.m * self.base.jacobian_point(p)?)
    }
}

/// `G = V J_F(m(B))^{-1} F`.
pub fn precondition<'a>(
    base: &'a dyn SquareSystem,
    b: &NBox,
    v: &DMatrix<f64>,
) -> Result<PrecondSystem<'a>, NotInvertible> {
    let inv = invert_midpoint_jacobian(base, b)?;
    Ok(PrecondSystem {
        base,
        m: v * inv,
        origin: Some(b.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcsys::FuncSystem;
    use crate::interval::det;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    fn om_example() -> IntervalMatrix {
        IntervalMatrix::from_bounds(&[
            &[(1.0, 2.0), (3.0, 4.0), (-1.0, 1.0)],
            &[(3.0, 4.0), (-1.0, 1.0), (5.0, 6.0)],
            &[(1.0, 2.0), (-2.0, -1.0), (-2.0, -1.0)],
        ])
    }

    fn sm_example() -> IntervalMatrix {
        IntervalMatrix::from_bounds(&[
            &[(3.0, 4.0), (1.0, 2.0), (1.0, 2.0)],
            &[(1.0, 2.0), (3.0, 4.0), (-2.0, -1.0)],
            &[(1.0, 2.0), (-2.0, -1.0), (-2.0, -1.0)],
        ])
    }

    fn real(rows: &[&[f64]]) -> IntervalMatrix {
        let n = rows.len();
        IntervalMatrix::from_real(&DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
    }

    #[test]
    fn om_examples() {
        let m = om_example();
        let cof = last_row_cofactors(&m);
        assert!(cof[0].contains_interval(&iv(14.0, 25.0)), "{cof:?}");
        assert!(cof[1].contains_interval(&iv(-16.0, -1.0)));
        assert!(cof[2].contains_interval(&iv(-18.0, -7.0)));
        assert!(is_om_matrix(&m));
        assert!(!is_om_matrix(&IntervalMatrix::identity(3)));
        assert!(is_om_matrix(&real(&[&[2.0, 1.0], &[1.0, -2.0]])));
    }

    #[test]
    fn sm_examples() {
        let m = sm_example();
        let minors = LeadingMinors::compute(&m, 3, false).unwrap();
        assert!(minors.get(&[0, 2]).unwrap().contains_interval(&iv(-12.0, -4.0)));
        assert!(minors.get(&[1, 2]).unwrap().contains_interval(&iv(-12.0, -4.0)));
        assert!(minors.get(&[0, 1]).unwrap().contains_interval(&iv(5.0, 15.0)));
        assert!(det(&m).contains_interval(&iv(-72.0, -16.0)));
        assert!(is_sm_matrix(&m));
        assert!(!is_sm_matrix(&IntervalMatrix::identity(3)));

        let v3 = real(&[&[3.0, 1.0, 1.0], &[1.0, -3.0, 1.0], &[1.0, 1.0, 3.0]]);
        let mv = LeadingMinors::compute(&v3, 3, false).unwrap();
        assert!(mv.get(&[0, 1]).unwrap().contains(-10.0));
        assert!(mv.get(&[0, 2]).unwrap().contains(2.0));
        assert!(mv.get(&[1, 2]).unwrap().contains(4.0));
        assert!(det(&v3).contains(-28.0));
        assert!(is_sm_matrix(&v3));
    }

    #[test]
    fn rotation_examples() {
        for seed in 0..20 {
            let r = make_sm_rotation(2, 2.0, seed, false).unwrap();
            assert_eq!((r.v[0][0], r.v[1][1]), (2.0, -2.0));
            assert!(r.v[0][1].abs() <= 1.0 && r.v[1][0].abs() <= 1.0);
        }
        let r1 = make_sm_rotation(1, 3.0, 7, false).unwrap();
        assert_eq!(r1.v, vec![vec![3.0]]);
        assert_eq!(
            make_sm_rotation(3, 3.0, 5, false),
            make_sm_rotation(3, 3.0, 5, false)
        );
        assert!(make_sm_rotation(4, 3.0, 0, false).is_err());
    }

    #[test]
    fn linear_system_preconditions_to_v() {
        let f = FuncSystem::parse(&["x", "y"], &["2*x + y - 1", "x - 3*y"]).unwrap();
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, -2.0]);
        let b = NBox::cube(2, -1.0, 1.0);
        let g = precondition(&f, &b, &v).unwrap();
        let j = g.jacobian_point(&[0.3, 0.4]).unwrap();
        assert!((j - &v).iter().all(|e| e.abs() < 1e-14));
        assert!(is_sm_system(&g, &b));
    }

    #[test]
    fn example4_is_sm() {
        let f = FuncSystem::parse(
            &["x", "y", "z"],
            &["x - y + z", "y^2 + x + y + 2*z", "x^2 + y*z - 3*x - y + z"],
        )
        .unwrap();
        assert!(is_sm_system(&f, &NBox::cube(3, -0.1, 0.1)));
        let g = FuncSystem::parse(&["x", "y"], &["x^2 - y", "x^2 + y"]).unwrap();
        assert!(!is_sm_system(&g, &NBox::cube(2, -1.0, 1.0)));
    }
}
