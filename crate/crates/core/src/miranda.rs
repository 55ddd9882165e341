//! Miranda-style box certification, used as a baseline against the S-M
//! pipeline.
//!
//! `G = J_F(m(B))^{-1} F`. The box is accepted when every `g_i` has strict
//! and opposite signs on the two faces normal to `x_i` (existence) and the
//! interval determinant of `J_G(B)` excludes zero (uniqueness). Face signs
//! come from evaluating `g_i` itself on the face, with no derivative
//! information. For polynomial systems `G` is expanded first, so linear
//! systems are evaluated exactly; otherwise `g_i` is the interval linear
//! combination of the `f_k` enclosures.

use nalgebra::DMatrix;

use crate::criterion::PrecondSystem;
use crate::funcsys::poly::Poly;
use crate::funcsys::{invert_midpoint_jacobian, FuncSystem, SquareSystem};
use crate::interval::{det, Interval, NBox, Side, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirandaOutcome {
    Unique,
    NotInvertible,
    Fail,
}

enum Preconditioned<'a> {
    Expanded(Vec<Poly>),
    Lazy(PrecondSystem<'a>),
}

impl Preconditioned<'_> {
    fn face_sign(&self, i: usize, face: &NBox) -> Sign {
        match self {
            Preconditioned::Expanded(g) => g[i].eval_interval(face.dims()).sign(),
            Preconditioned::Lazy(g) => g
                .eval_box(face.dims())
                .map_or(Sign::Indeterminate, |v| v[i].sign()),
        }
    }
}

/// The baseline test for one system. Polynomial systems are converted to
/// coefficient form once, so each box only pays for the linear combination.
pub struct MirandaTest<'a> {
    f: &'a FuncSystem,
    polys: Option<Vec<Poly>>,
}

impl<'a> MirandaTest<'a> {
    pub fn new(f: &'a FuncSystem) -> Self {
        let n = f.dim();
        let polys = f.exprs().iter().map(|e| Poly::from_expr(e, n)).collect();
        MirandaTest { f, polys }
    }

    fn expand(&self, m: &DMatrix<f64>) -> Option<Vec<Poly>> {
        let polys = self.polys.as_ref()?;
        let n = polys.len();
        Some(
            (0..n)
                .map(|i| {
                    polys
                        .iter()
                        .enumerate()
                        .fold(Poly::zero(n), |acc, (k, p)| acc.add(&p.scale(Interval::point(m[(i, k)]))))
                })
                .collect(),
        )
    }

    pub fn certify(&self, b: &NBox) -> MirandaOutcome {
        let Ok(m) = invert_midpoint_jacobian(self.f, b) else {
            return MirandaOutcome::NotInvertible;
        };
        let expanded = self.expand(&m);
        let g = PrecondSystem::new(self.f, m);
        let Ok(jac) = g.jacobian_box(b.dims()) else {
            return MirandaOutcome::Fail;
        };
        if det(&jac).contains_zero() {
            return MirandaOutcome::Fail;
        }
        let g = match expanded {
            Some(p) => Preconditioned::Expanded(p),
            None => Preconditioned::Lazy(g),
        };
        for i in 0..b.dim() {
            let face = |side| match side {
                Side::Left => b.with_fixed(i, b.dims()[i].lo()),
                Side::Right => b.with_fixed(i, b.dims()[i].hi()),
            };
            let l = g.face_sign(i, &face(Side::Left));
            let r = g.face_sign(i, &face(Side::Right));
            if !(l.is_strict() && r == l.flip()) {
                return MirandaOutcome::Fail;
            }
        }
        MirandaOutcome::Unique
    }
}

pub fn miranda_certify(f: &FuncSystem, b: &NBox) -> MirandaOutcome {
    MirandaTest::new(f).certify(b)
}
