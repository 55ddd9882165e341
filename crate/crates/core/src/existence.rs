//! Recursive face-restriction existence test for systems that are strongly
//! monotone on a box.
//!
//! Everything works in the ambient coordinates of the system: fixing a
//! coordinate collapses that dimension of the box to an endpoint, and a box
//! with `k` free dimensions is paired with the first `k` functions.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::funcsys::{invert_matrix, SquareSystem};
use crate::interval::{Interval, IntervalMatrix, NBox, Side, Sign};

/// A face `x_dim = value` of the queried box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceIndex {
    pub dim: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExistenceOutcome {
    /// Exactly one zero; for boxes of dimension two or more, the faces where
    /// the curve of the first `n - 1` functions enters and leaves.
    Unique { faces: Option<[FaceIndex; 2]> },
    Empty,
    Unknown,
}

impl ExistenceOutcome {
    pub fn is_unique(&self) -> bool {
        matches!(self, ExistenceOutcome::Unique { .. })
    }
}

enum Res {
    Unique(Option<[FaceIndex; 2]>),
    Empty,
    Unknown,
}

struct Engine<'a> {
    g: &'a dyn SquareSystem,
    n: usize,
    /// Jacobian of `g` on the outermost box; encloses the Jacobian on every
    /// sub-box.
    jac: IntervalMatrix,
    eps_b: f64,
    vertices: RefCell<HashMap<Vec<u64>, Option<Vec<Interval>>>>,
}

fn free_dims(n: usize, fixed: u64) -> Vec<usize> {
    (0..n).filter(|&i| fixed >> i & 1 == 0).collect()
}

fn free_width(bx: &[Interval], free: &[usize]) -> f64 {
    free.iter().map(|&i| bx[i].width()).fold(0.0, f64::max)
}

fn point_box(p: &[f64]) -> Vec<Interval> {
    p.iter().map(|&x| Interval::point(x)).collect()
}

impl Engine<'_> {
    fn values_at(&self, p: &[f64]) -> Option<Vec<Interval>> {
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        if let Some(v) = self.vertices.borrow().get(&key) {
            return v.clone();
        }
        let v = self.g.eval_box(&point_box(p)).ok();
        self.vertices.borrow_mut().insert(key, v.clone());
        v
    }

    /// Sign of `g_j` over all vertices of `bx` (free dimensions only).
    fn vertex_sign(&self, bx: &[Interval], free: &[usize], j: usize) -> Sign {
        let mut p: Vec<f64> = bx.iter().map(Interval::lo).collect();
        let mut acc: Option<Sign> = None;
        for mask in 0u64..(1 << free.len()) {
            for (b, &d) in free.iter().enumerate() {
                p[d] = if mask >> b & 1 == 1 { bx[d].hi() } else { bx[d].lo() };
            }
            let s = match self.values_at(&p) {
                Some(v) => v[j].sign(),
                None => Sign::Indeterminate,
            };
            if !s.is_strict() || acc.is_some_and(|a| a != s) {
                return Sign::Indeterminate;
            }
            acc = Some(s);
        }
        acc.unwrap_or(Sign::Indeterminate)
    }

    /// Enclosure of `g_j` on `bx`: natural extension intersected with the
    /// mean-value form around the midpoint.
    fn enclose(&self, bx: &[Interval], free: &[usize], j: usize, jac: &IntervalMatrix) -> Option<Interval> {
        let c: Vec<f64> = bx.iter().map(Interval::mid).collect();
        let mean_value = self.g.eval_box(&point_box(&c)).ok().map(|gc| {
            free.iter().fold(gc[j], |acc, &l| {
                acc + jac.get(j, l) * (bx[l] - Interval::point(c[l]))
            })
        });
        let natural = self.g.eval_box(bx).ok().map(|v| v[j]);
        match (mean_value, natural) {
            (Some(a), Some(b)) => Some(a.intersect(&b).unwrap_or(a)),
            (a, b) => a.or(b),
        }
    }

    /// Sign of `g_j` on the whole of `bx`, using vertex values when every
    /// partial derivative in the free dimensions is sign-definite.
    fn sign_on(&self, bx: &[Interval], free: &[usize], j: usize, jac: &IntervalMatrix) -> Sign {
        if free.iter().all(|&l| !jac.get(j, l).contains_zero()) {
            let s = self.vertex_sign(bx, free, j);
            if s.is_strict() {
                return s;
            }
        }
        self.enclose(bx, free, j, jac).map_or(Sign::Indeterminate, |v| v.sign())
    }

    fn exist(&self, bx: &[Interval], fixed: u64) -> Res {
        let free = free_dims(self.n, fixed);
        let k = free.len();
        if k == 1 {
            let d = free[0];
            let mut p: Vec<f64> = bx.iter().map(Interval::lo).collect();
            let lo = self.values_at(&p).map_or(Sign::Indeterminate, |v| v[0].sign());
            p[d] = bx[d].hi();
            let hi = self.values_at(&p).map_or(Sign::Indeterminate, |v| v[0].sign());
            return match (lo.is_strict() && hi.is_strict(), lo == hi) {
                (false, _) => Res::Unknown,
                (true, false) => Res::Unique(None),
                (true, true) => Res::Empty,
            };
        }

        let mut hits: Vec<(usize, Side, Vec<Interval>)> = Vec::with_capacity(2);
        'faces: for &d in &free {
            for side in [Side::Left, Side::Right] {
                let mut face = bx.to_vec();
                let t = match side {
                    Side::Left => bx[d].lo(),
                    Side::Right => bx[d].hi(),
                };
                face[d] = Interval::point(t);
                let face_free: Vec<usize> = free.iter().copied().filter(|&l| l != d).collect();
                let excluded = (0..k - 1)
                    .any(|j| self.sign_on(&face, &face_free, j, &self.jac).is_strict());
                if excluded {
                    continue;
                }
                match self.exist(&face, fixed | 1 << d) {
                    Res::Unknown => return Res::Unknown,
                    Res::Empty => {}
                    Res::Unique(_) => {
                        hits.push((d, side, face));
                        if hits.len() == 2 {
                            break 'faces;
                        }
                    }
                }
            }
        }
        debug_assert!(hits.len() <= 2);

        match hits.len() {
            0 => Res::Empty,
            1 => Res::Unknown,
            _ => {
                let last = k - 1;
                let mut signs = [Sign::Indeterminate; 2];
                for (slot, (d, _, face)) in signs.iter_mut().zip(&hits) {
                    *slot = self.face_root_sign(face, fixed | 1 << d, last);
                }
                if !signs[0].is_strict() || !signs[1].is_strict() {
                    return Res::Unknown;
                }
                if signs[0] == signs[1] {
                    return Res::Empty;
                }
                let faces = [0, 1].map(|i| FaceIndex {
                    dim: hits[i].0,
                    value: hits[i].2[hits[i].0].lo(),
                });
                Res::Unique(Some(faces))
            }
        }
    }

    /// Sign of `g_j` at the unique zero of the leading subsystem inside the
    /// face `bx`, shrinking the enclosure of that zero as needed.
    fn face_root_sign(&self, bx: &[Interval], fixed: u64, j: usize) -> Sign {
        let free = free_dims(self.n, fixed);
        let mut x = bx.to_vec();
        let mut jac = self.jac.clone();
        let max_steps = 64 * free.len().max(1) + 64;
        for _ in 0..max_steps {
            let s = self.sign_on(&x, &free, j, &jac);
            if s.is_strict() {
                return s;
            }
            if free_width(&x, &free) <= self.eps_b {
                return Sign::Indeterminate;
            }
            match self.refine_step(&x, fixed) {
                Some(nx) => x = nx,
                None => return Sign::Indeterminate,
            }
            if let Ok(j_local) = self.g.jacobian_box(&x) {
                jac = j_local;
            }
        }
        Sign::Indeterminate
    }

    /// One contraction of the box `x` known to hold exactly one zero of the
    /// leading subsystem on its free dimensions.
    fn refine_step(&self, x: &[Interval], fixed: u64) -> Option<Vec<Interval>> {
        let free = free_dims(self.n, fixed);
        let w = free_width(x, &free);
        let mut cur = x.to_vec();
        if let Some(k) = self.krawczyk(x, &free) {
            let nx: Option<Vec<Interval>> = x
                .iter()
                .zip(&k)
                .map(|(a, b)| a.intersect(b))
                .collect();
            match nx {
                // The zero cannot escape a box it was proven to be in.
                None => return None,
                Some(nx) => {
                    if free_width(&nx, &free) <= 0.5 * w {
                        return Some(nx);
                    }
                    cur = nx;
                }
            }
        }
        // Bisection fallback on the widest free dimension.
        let d = *free
            .iter()
            .max_by(|&&a, &&b| cur[a].width().total_cmp(&cur[b].width()).then(b.cmp(&a)))?;
        let m = cur[d].mid();
        let mut left = cur.clone();
        left[d] = Interval::new(cur[d].lo(), m);
        let mut right = cur.clone();
        right[d] = Interval::new(m, cur[d].hi());
        match self.exist(&left, fixed) {
            Res::Unique(_) => Some(left),
            Res::Empty => Some(right),
            Res::Unknown => match self.exist(&right, fixed) {
                Res::Unique(_) => Some(right),
                Res::Empty => Some(left),
                Res::Unknown => None,
            },
        }
    }

    /// Krawczyk image of `x` for the leading `free.len()` functions over the
    /// free dimensions. Fixed dimensions are returned unchanged.
    fn krawczyk(&self, x: &[Interval], free: &[usize]) -> Option<Vec<Interval>> {
        let m = free.len();
        let rows: Vec<usize> = (0..m).collect();
        let jx = self.g.jacobian_box(x).ok()?.select(&rows, free);
        let y: Vec<f64> = x.iter().map(Interval::mid).collect();
        let gy = self.g.eval_box(&point_box(&y)).ok()?;
        let c = invert_matrix(&jx.mid()).ok()?;
        let ca = jx.left_mul_real(&c);
        let mut out = x.to_vec();
        for (a, &da) in free.iter().enumerate() {
            let mut acc = Interval::point(y[da]);
            for r in 0..m {
                acc = acc - gy[r] * c[(a, r)];
            }
            for (b, &db) in free.iter().enumerate() {
                let id = if a == b { Interval::ONE } else { Interval::ZERO };
                acc = acc + (id - ca.get(a, b)) * (x[db] - Interval::point(y[db]));
            }
            out[da] = acc;
        }
        Some(out)
    }
}

/// Decides whether the S-M system `g` has zero, one, or an undetermined
/// number of zeros in `b`. `jac` must enclose the Jacobian of `g` on `b`.
pub fn existence_with_jacobian(
    g: &dyn SquareSystem,
    b: &NBox,
    jac: IntervalMatrix,
    eps_b: f64,
) -> ExistenceOutcome {
    let n = g.dim();
    assert_eq!(b.dim(), n, "box dimension");
    assert!(n <= 63, "dimension too large");
    let engine = Engine {
        g,
        n,
        jac,
        eps_b,
        vertices: RefCell::new(HashMap::new()),
    };
    match engine.exist(b.dims(), 0) {
        Res::Unique(faces) => ExistenceOutcome::Unique { faces },
        Res::Empty => ExistenceOutcome::Empty,
        Res::Unknown => ExistenceOutcome::Unknown,
    }
}

/// Existence test for a system already verified to be S-M on `b`.
pub fn existence(g: &dyn SquareSystem, b: &NBox, eps_b: f64) -> ExistenceOutcome {
    match g.jacobian_box(b.dims()) {
        Ok(jac) => existence_with_jacobian(g, b, jac, eps_b),
        Err(_) => ExistenceOutcome::Unknown,
    }
}

/// Common strict sign of component `j` of `g` over all vertices of `b`.
pub fn vertex_sign(g: &dyn SquareSystem, j: usize, b: &NBox) -> Sign {
    let signs = b.vertices().into_iter().map(|v| match g.eval_box(&point_box(&v)) {
        Ok(vals) => vals[j].sign(),
        Err(_) => Sign::Indeterminate,
    });
    Sign::common(signs)
}

/// Shrinks `b`, which holds the unique zero of the S-M system `g`, to width
/// at most `eps_b`. Returns the smallest box reached if contraction stalls.
pub fn refine_face_root(g: &dyn SquareSystem, b: &NBox, eps_b: f64) -> NBox {
    let n = g.dim();
    let jac = match g.jacobian_box(b.dims()) {
        Ok(j) => j,
        Err(_) => return b.clone(),
    };
    let engine = Engine {
        g,
        n,
        jac,
        eps_b,
        vertices: RefCell::new(HashMap::new()),
    };
    let free: Vec<usize> = (0..n).collect();
    let mut x = b.dims().to_vec();
    for _ in 0..(64 * n + 64) {
        if free_width(&x, &free) <= eps_b {
            break;
        }
        match engine.refine_step(&x, 0) {
            Some(nx) => x = nx,
            None => break,
        }
    }
    NBox::new(x).expect("non-empty box")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::is_sm_system;
    use crate::funcsys::FuncSystem;

    fn example4() -> FuncSystem {
        FuncSystem::parse(
            &["x", "y", "z"],
            &["x - y + z", "y^2 + x + y + 2*z", "x^2 + y*z - 3*x - y + z"],
        )
        .unwrap()
    }

    #[test]
    fn example4_unique() {
        let f = example4();
        let b = NBox::cube(3, -0.1, 0.1);
        assert!(is_sm_system(&f, &b));
        let out = existence(&f, &b, 1e-6);
        match out {
            ExistenceOutcome::Unique { faces: Some(faces) } => {
                assert_eq!(faces[0].dim, 0);
                assert_eq!(faces[1].dim, 0);
            }
            other => panic!("expected a unique zero, got {other:?}"),
        }
    }

    #[test]
    fn vertex_sign_examples() {
        let g = FuncSystem::parse(&["x", "y"], &["y^2 + x + y + 0.2", "x"]).unwrap();
        assert_eq!(vertex_sign(&g, 0, &NBox::cube(2, -0.1, 0.1)), Sign::Pos);
        let h = FuncSystem::parse(&["x", "y"], &["x + y", "x - y"]).unwrap();
        assert_eq!(vertex_sign(&h, 0, &NBox::cube(2, 1.0, 2.0)), Sign::Pos);
        assert_eq!(vertex_sign(&h, 1, &NBox::cube(2, 0.0, 1.0)), Sign::Indeterminate);
    }

    #[test]
    fn univariate_and_empty() {
        let g = FuncSystem::parse(&["x"], &["x - 0.5"]).unwrap();
        assert!(existence(&g, &NBox::cube(1, 0.0, 1.0), 1e-6).is_unique());
        let e = FuncSystem::parse(&["x", "y"], &["x - 5", "y - 5"]).unwrap();
        assert_eq!(existence(&e, &NBox::cube(2, 0.0, 1.0), 1e-6), ExistenceOutcome::Empty);
    }

    #[test]
    fn zero_on_boundary_is_unknown() {
        let g = FuncSystem::parse(&["x"], &["x - 1"]).unwrap();
        assert_eq!(existence(&g, &NBox::cube(1, 0.0, 1.0), 1e-6), ExistenceOutcome::Unknown);
    }

    #[test]
    fn refine_examples() {
        let g = FuncSystem::parse(&["x"], &["x - 0.25"]).unwrap();
        let r = refine_face_root(&g, &NBox::cube(1, 0.0, 1.0), 1e-3);
        assert!(r.width() <= 1e-3 && r.contains_point(&[0.25]));

        // face x = 0.1 of the running example
        let f = example4();
        let face = f.restrict(0, 0.1).unwrap();
        let b = NBox::cube(2, -0.1, 0.1);
        let r = refine_face_root(&face, &b, 1e-9);
        assert!(r.width() <= 1e-9);
        // y - z = 0.1 and y^2 + y + 2 z + 0.1 = 0  =>  y^2 + 3 y - 0.1 = 0
        let y = (-3.0 + (9.0f64 + 0.4).sqrt()) / 2.0;
        assert!(r.inflate(1e-15).contains_point(&[y, y - 0.1]), "{r}");
    }
}
