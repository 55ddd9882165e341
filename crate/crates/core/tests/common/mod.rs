//! Independent oracles shared by the property suites and the acceptance
//! harness. Each check returns how many cases it ran and how many broke
//! the property, so callers decide whether to assert or report.

#![allow(dead_code)]

use std::path::PathBuf;

use astro_float::{BigFloat, Consts, RoundingMode};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smroot::criterion::precondition;
use smroot::existence::ExistenceOutcome;
use smroot::funcsys::file::SystemFile;
use smroot::generate::generate;
use smroot::interval::det;
use smroot::isolator::{candidates, isolate, newton, rotation_for, Config, Method, Pipeline, Stats};
use smroot::{FuncSystem, Interval, IntervalMatrix, NBox, SquareSystem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub cases: usize,
    pub violations: usize,
}

impl Tally {
    pub fn record(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.cases += other.cases;
        self.violations += other.violations;
    }
}

pub fn system_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(name)
}

pub fn load_system(name: &str) -> (FuncSystem, NBox, Option<f64>) {
    let text = std::fs::read_to_string(system_path(name)).expect("system file exists");
    let file = SystemFile::from_json(&text).expect("system file parses");
    let (f, b) = file.load().expect("system file is valid");
    (f, b, file.precision)
}

// ---------------------------------------------------------------------------
// interval inclusion against 256-bit arithmetic

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn encloses(iv: Interval, exact: &BigFloat) -> bool {
    !exact.is_nan() && big(iv.lo()) <= *exact && *exact <= big(iv.hi())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sqr,
    Cube,
    Pow4,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
}

pub const ALL_OPS: [Op; 12] = [
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::Div,
    Op::Sqr,
    Op::Cube,
    Op::Pow4,
    Op::Sqrt,
    Op::Exp,
    Op::Ln,
    Op::Sin,
    Op::Cos,
];

fn random_interval(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Interval {
    let a = rng.gen_range(lo..hi);
    // mix tiny, moderate and wide intervals
    let w = match rng.gen_range(0..3) {
        0 => 0.0,
        1 => rng.gen_range(0.0..1e-6) * (1.0 + a.abs()),
        _ => rng.gen_range(0.0..(hi - lo) / 4.0),
    };
    Interval::new(a, (a + w).min(hi).max(a))
}

fn sample(rng: &mut ChaCha8Rng, x: Interval) -> f64 {
    match rng.gen_range(0..4) {
        0 => x.lo(),
        1 => x.hi(),
        _ => (x.lo() + rng.gen::<f64>() * (x.hi() - x.lo())).clamp(x.lo(), x.hi()),
    }
}

/// Samples `samples` point pairs per operation and checks that the
/// interval result encloses the 256-bit value of the operation at the
/// points.
pub fn inclusion_fuzz(op: Op, samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cc = Consts::new().expect("constants cache");
    let mut t = Tally::default();
    let (lo, hi) = match op {
        Op::Exp => (-40.0, 40.0),
        Op::Ln | Op::Sqrt => (1e-12, 1e6),
        Op::Sin | Op::Cos => (-200.0, 200.0),
        _ => (-1e3, 1e3),
    };
    let per_interval = 8;
    let mut done = 0;
    while done < samples {
        let x = random_interval(&mut rng, lo, hi);
        let y = match op {
            Op::Div => {
                let y = random_interval(&mut rng, 0.5, 1e3);
                if rng.gen_bool(0.5) {
                    -y
                } else {
                    y
                }
            }
            _ => random_interval(&mut rng, lo, hi),
        };
        let r = match op {
            Op::Add => x + y,
            Op::Sub => x - y,
            Op::Mul => x * y,
            Op::Div => x.div(y).expect("divisor excludes zero"),
            Op::Sqr => x.sqr(),
            Op::Cube => x.powi(3),
            Op::Pow4 => x.powi(4),
            Op::Sqrt => x.sqrt().expect("non-negative"),
            Op::Exp => x.exp(),
            Op::Ln => x.ln().expect("positive"),
            Op::Sin => x.sin(),
            Op::Cos => x.cos(),
        };
        for _ in 0..per_interval.min(samples - done) {
            let (a, b) = (big(sample(&mut rng, x)), big(sample(&mut rng, y)));
            let exact = match op {
                Op::Add => a.add(&b, PREC, RM),
                Op::Sub => a.sub(&b, PREC, RM),
                Op::Mul => a.mul(&b, PREC, RM),
                Op::Div => a.div(&b, PREC, RM),
                Op::Sqr => a.mul(&a, PREC, RM),
                Op::Cube => a.powi(3, PREC, RM),
                Op::Pow4 => a.powi(4, PREC, RM),
                Op::Sqrt => a.sqrt(PREC, RM),
                Op::Exp => a.exp(PREC, RM, &mut cc),
                Op::Ln => a.ln(PREC, RM, &mut cc),
                Op::Sin => a.sin(PREC, RM, &mut cc),
                Op::Cos => a.cos(PREC, RM, &mut cc),
            };
            t.record(encloses(r, &exact));
            done += 1;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// interval determinant against exact determinants of member matrices

fn exact_det(m: &[Vec<f64>]) -> BigFloat {
    // entries are f64 in a bounded range, so 4096 bits keep every
    // cofactor expansion exact
    const P: usize = 4096;
    fn rec(m: &[Vec<BigFloat>], rows: &[usize], cols: &[usize]) -> BigFloat {
        if rows.len() == 1 {
            return m[rows[0]][cols[0]].clone();
        }
        let mut acc = BigFloat::from_f64(0.0, P);
        for (k, &c) in cols.iter().enumerate() {
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = m[rows[0]][c].mul(&rec(m, &rows[1..], &rest), P, RM);
            acc = if k % 2 == 0 { acc.add(&term, P, RM) } else { acc.sub(&term, P, RM) };
        }
        acc
    }
    let n = m.len();
    let bm: Vec<Vec<BigFloat>> = m
        .iter()
        .map(|r| r.iter().map(|&x| BigFloat::from_f64(x, P)).collect())
        .collect();
    let idx: Vec<usize> = (0..n).collect();
    rec(&bm, &idx, &idx)
}

/// Random interval matrices of order 2 to 5; a random member (including
/// vertex members) must have its exact determinant inside `det`.
pub fn det_containment(matrices: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for _ in 0..matrices {
        let n = rng.gen_range(2..=5);
        let bounds: Vec<Vec<(f64, f64)>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let a = rng.gen_range(-10.0..10.0);
                        let w = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..2.0) };
                        (a, a + w)
                    })
                    .collect()
            })
            .collect();
        let rows: Vec<&[(f64, f64)]> = bounds.iter().map(|r| r.as_slice()).collect();
        let m = IntervalMatrix::from_bounds(&rows);
        let d = det(&m);
        let member: Vec<Vec<f64>> = bounds
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&(a, b)| match rng.gen_range(0..3) {
                        0 => a,
                        1 => b,
                        _ => (a + rng.gen::<f64>() * (b - a)).clamp(a, b),
                    })
                    .collect()
            })
            .collect();
        let exact = exact_det(&member);
        t.record(BigFloat::from_f64(d.lo(), 4096) <= exact && exact <= BigFloat::from_f64(d.hi(), 4096));
    }
    t
}

// ---------------------------------------------------------------------------
// symbolic Jacobian against central differences

pub fn fd_gradients(f: &FuncSystem, b: &NBox, points: usize, seed: u64, rel_tol: f64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = f.dim();
    let mut t = Tally::default();
    for _ in 0..points {
        let p: Vec<f64> = b.dims().iter().map(|d| rng.gen_range(d.lo()..=d.hi())).collect();
        let j = f.jacobian_point(&p).expect("jacobian evaluates");
        for k in 0..n {
            let h = 1e-6 * (1.0 + p[k].abs());
            let mut up = p.clone();
            let mut dn = p.clone();
            up[k] += h;
            dn[k] -= h;
            let (fu, fd) = (f.eval_point(&up).unwrap(), f.eval_point(&dn).unwrap());
            for i in 0..n {
                let fdv = (fu[i] - fd[i]) / (up[k] - dn[k]);
                let scale = 1.0f64.max(j[(i, k)].abs()).max(fu[i].abs().max(fd[i].abs()) / h * 1e-9);
                t.record((fdv - j[(i, k)]).abs() <= rel_tol * scale);
            }
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Newton-from-a-grid root oracle

/// Real roots of a system in `b`, found by polishing from every cell of a
/// `grid^n` lattice whose corner values change sign in every component.
/// Two-dimensional only; that is all the oracle is used for.
pub fn grid_roots(f: &FuncSystem, b: &NBox, grid: usize) -> Vec<Vec<f64>> {
    assert_eq!(f.dim(), 2);
    let d = b.dims();
    let xs: Vec<f64> = (0..=grid).map(|k| d[0].lo() + (d[0].hi() - d[0].lo()) * k as f64 / grid as f64).collect();
    let ys: Vec<f64> = (0..=grid).map(|k| d[1].lo() + (d[1].hi() - d[1].lo()) * k as f64 / grid as f64).collect();
    let vals: Vec<Vec<Vec<f64>>> = xs
        .iter()
        .map(|&x| ys.iter().map(|&y| f.eval_point(&[x, y]).unwrap()).collect())
        .collect();
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let cell = (d[0].width().max(d[1].width())) / grid as f64;
    for i in 0..grid {
        for j in 0..grid {
            let corners = [&vals[i][j], &vals[i + 1][j], &vals[i][j + 1], &vals[i + 1][j + 1]];
            let changes = (0..2).all(|c| {
                let lo = corners.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            });
            if !changes {
                continue;
            }
            let start = [(xs[i] + xs[i + 1]) / 2.0, (ys[j] + ys[j + 1]) / 2.0];
            let Some((p, r)) = newton(f, &start, 60) else { continue };
            if r > 1e-12 || (p[0] - start[0]).abs() > 2.0 * cell || (p[1] - start[1]).abs() > 2.0 * cell {
                continue;
            }
            if !roots.iter().any(|q| (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9) {
                roots.push(p);
            }
        }
    }
    roots
}

fn random_quadratic_system(rng: &mut ChaCha8Rng) -> FuncSystem {
    let mut eq = || {
        let c: Vec<f64> = (0..6).map(|_| (rng.gen_range(-40..=40) as f64) / 8.0).collect();
        format!(
            "{}*x^2 + {}*x*y + {}*y^2 + {}*x + {}*y + {}",
            c[0], c[1], c[2], c[3], c[4], c[5] / 4.0
        )
    };
    let (a, b) = (eq(), eq());
    FuncSystem::parse(&["x", "y"], &[a, b]).unwrap()
}

/// Existence outcomes on boxes around and near oracle roots of 50 seeded
/// quadratic systems. `Unique` must contain exactly one oracle root and
/// `Empty` none. Roots within `1e-7` of the box boundary are skipped, as
/// the oracle cannot place them reliably.
pub fn existence_vs_grid(systems: usize, seed: u64) -> (Tally, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    let mut unique = 0;
    let region = NBox::cube(2, -2.0, 2.0);
    let v = rotation_for(2, &Config::default()).unwrap().matrix();
    for _ in 0..systems {
        let f = random_quadratic_system(&mut rng);
        let roots = grid_roots(&f, &region, 400);
        let pipeline = Pipeline {
            f: &f,
            v: v.clone(),
            epsilon: 1e-6,
            epsilon_b: 1e-9,
            method: Method::StrongMonotone,
            miranda: None,
        };
        let mut centres: Vec<Vec<f64>> = roots.clone();
        centres.extend((0..6).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]));
        for c in centres {
            for _ in 0..4 {
                let r = 10f64.powf(rng.gen_range(-3.0..-0.5));
                let shift = [rng.gen_range(-r..r), rng.gen_range(-r..r)];
                let b = NBox::around(&[c[0] + shift[0] * 0.9, c[1] + shift[1] * 0.9], r);
                let inside: Vec<&Vec<f64>> = roots.iter().filter(|p| b.contains_point(p)).collect();
                let near_edge = roots.iter().any(|p| {
                    b.inflate(1e-7).contains_point(p) && !b.inflate(-1e-7).contains_point(p)
                });
                if near_edge {
                    continue;
                }
                match pipeline.certify(&b, &mut Stats::default()) {
                    Some(ExistenceOutcome::Unique { .. }) => {
                        unique += 1;
                        t.record(inside.len() == 1);
                    }
                    Some(ExistenceOutcome::Empty) => t.record(inside.is_empty()),
                    _ => {}
                }
            }
        }
    }
    (t, unique)
}

// ---------------------------------------------------------------------------
// preconditioner zero preservation

/// `G = V J^{-1}(m(B)) F` must vanish at Newton-oracle roots of `F` for
/// boxes around them.
pub fn zero_preservation(systems: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    let v = rotation_for(2, &Config::default()).unwrap().matrix();
    for _ in 0..systems {
        let f = random_quadratic_system(&mut rng);
        for p in grid_roots(&f, &NBox::cube(2, -2.0, 2.0), 200) {
            let b = NBox::around(&[p[0] + 0.01, p[1] - 0.02], 0.05);
            let Ok(g) = precondition(&f, &b, &v) else { continue };
            let gp = g.eval_point(&p).unwrap();
            t.record(gp.iter().all(|x| x.abs() < 1e-10));
        }
    }
    t
}

// ---------------------------------------------------------------------------
// certified box disjointness

pub fn disjointness(boxes: &[NBox]) -> Tally {
    let mut t = Tally::default();
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            t.record(!a.interiors_overlap(b));
        }
    }
    t
}

/// Certified boxes, including re-certified refined points, of a run.
pub fn all_certified_boxes(f: &FuncSystem, b: &NBox, cfg: &Config) -> Vec<NBox> {
    let r = isolate(f, b, cfg).unwrap();
    let mut out = r.certified.clone();
    out.extend(r.refined.iter().filter_map(|p| p.certified_box.clone()));
    out
}

pub fn n2d_system(degree: u32, seed: u64) -> FuncSystem {
    generate(format!("N2D{degree}").parse().unwrap(), 10, 10, seed).unwrap()
}

// ---------------------------------------------------------------------------
// sleeve candidates against oracle roots

pub fn sleeve_covers_roots(systems: usize, seed: u64) -> Tally {
    let mut t = Tally::default();
    let b = NBox::cube(2, -1.0, 1.0);
    for s in 0..systems as u64 {
        let f = n2d_system(5, seed + s);
        let cands = candidates(&f, &b, 8).unwrap();
        for p in grid_roots(&f, &b, 400) {
            t.record(cands.iter().any(|c| c.contains_point(&p)));
        }
    }
    t
}

// ---------------------------------------------------------------------------
// worker-count independence

pub fn worker_independence(f: &FuncSystem, b: &NBox, eps: f64) -> bool {
    let run = |workers| {
        let cfg = Config {
            workers,
            ..Config::with_epsilon(eps)
        };
        let r = isolate(f, b, &cfg).unwrap();
        (r.certified, r.suspected, r.refined)
    };
    let one = run(1);
    run(4) == one && run(8) == one
}

pub fn newton_point_in(f: &FuncSystem, b: &NBox) -> Option<(Vec<f64>, f64)> {
    newton(f, &b.midpoint(), 100).filter(|(p, _)| b.contains_point(p))
}

pub fn dmatrix(rows: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}
