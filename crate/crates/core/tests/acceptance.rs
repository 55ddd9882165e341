//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Built without the libtest harness so the lines always
//! reach the test log.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use smroot::criterion::{is_om_matrix, is_sm_system, last_row_cofactors, precondition};
use smroot::existence::{existence, ExistenceOutcome};
use smroot::generate::generate;
use smroot::interval::{det, LeadingMinors};
use smroot::isolator::{isolate, Config, IsolationResult, Method};
use smroot::{FuncSystem, Interval, IntervalMatrix, NBox, SquareSystem};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn iv(a: f64, b: f64) -> Interval {
    Interval::new(a, b)
}

fn certified_count(r: &IsolationResult) -> usize {
    r.certified.len() + r.refined.iter().filter(|p| p.certified).count()
}

// --------------------------------------------------------------------------

const TABLE4: [(&str, usize); 6] = [
    ("table4_8.json", 8),
    ("table4_16.json", 16),
    ("table4_24.json", 24),
    ("table4_32.json", 32),
    ("table4_40.json", 40),
    ("table4_48.json", 48),
];

fn table4_goldens() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, expected) in TABLE4 {
        let (f, b, _) = load_system(name);
        let t = Instant::now();
        let r = isolate(&f, &b, &Config::with_epsilon(1e-6)).unwrap();
        let count = certified_count(&r);
        let polished = r
            .certified
            .iter()
            .all(|c| newton_point_in(&f, c).is_some_and(|(_, res)| res < 1e-10));
        ok &= count == expected && polished && r.complete;
        parts.push(format!(
            "{expected}:{count}{} ({:.1}s)",
            if polished { "" } else { " unpolished" },
            t.elapsed().as_secs_f64()
        ));
    }
    check(ok, format!("expected:found {}", parts.join(", ")))
}

// --------------------------------------------------------------------------

const ELBOW_PRINTED: [[(f64, f64); 6]; 16] = [
    [(0.0625, 0.0644531), (0.0957031, 0.0976562), (0.148438, 0.150391), (0.107422, 0.109375), (0.277344, 0.279297), (0.230469, 0.232422)],
    [(0.0625, 0.0644531), (0.128906, 0.130859), (0.0820312, 0.0839844), (0.140625, 0.142578), (0.275391, 0.277344), (0.224609, 0.226562)],
    [(0.0625, 0.0644531), (0.0957031, 0.0976562), (0.148438, 0.150391), (0.107422, 0.109375), (0.277344, 0.279297), (0.787109, 0.789062)],
    [(0.0625, 0.0644531), (0.128906, 0.130859), (0.0820312, 0.0839844), (0.140625, 0.142578), (0.275391, 0.277344), (0.783203, 0.785156)],
    [(0.560547, 0.5625), (0.400391, 0.402344), (0.347656, 0.349609), (0.390625, 0.392578), (0.220703, 0.222656), (0.289062, 0.291016)],
    [(0.560547, 0.5625), (0.400391, 0.402344), (0.347656, 0.349609), (0.390625, 0.392578), (0.220703, 0.222656), (0.728516, 0.730469)],
    [(0.561523, 0.5625), (0.368164, 0.369141), (0.415039, 0.416016), (0.357422, 0.358398), (0.22168, 0.222656), (0.285156, 0.286133)],
    [(0.561523, 0.5625), (0.390625, 0.391602), (0.394531, 0.395508), (0.329102, 0.330078), (0.304688, 0.305664), (0.257812, 0.258789)],
    [(0.561523, 0.5625), (0.368164, 0.369141), (0.415039, 0.416016), (0.357422, 0.358398), (0.22168, 0.222656), (0.724609, 0.725586)],
    [(0.561523, 0.5625), (0.390625, 0.391602), (0.394531, 0.395508), (0.329102, 0.330078), (0.304688, 0.305664), (0.693359, 0.694336)],
    [(0.562012, 0.5625), (0.40332, 0.403809), (0.371582, 0.37207), (0.339844, 0.340332), (0.308105, 0.308594), (0.25293, 0.253418)],
    [(0.562012, 0.5625), (0.40332, 0.403809), (0.371582, 0.37207), (0.339844, 0.340332), (0.308105, 0.308594), (0.688965, 0.689453)],
    [(0.0634766, 0.0637207), (0.107178, 0.107422), (0.103516, 0.10376), (0.169189, 0.169434), (0.193115, 0.193359), (0.195068, 0.195312)],
    [(0.0634766, 0.0637207), (0.0952148, 0.095459), (0.126953, 0.127197), (0.158691, 0.158936), (0.19043, 0.190674), (0.190674, 0.190918)],
    [(0.0634766, 0.0637207), (0.107178, 0.107422), (0.103516, 0.10376), (0.169189, 0.169434), (0.193115, 0.193359), (0.756348, 0.756592)],
    [(0.0634766, 0.0637207), (0.0952148, 0.095459), (0.126953, 0.127197), (0.158691, 0.158936), (0.19043, 0.190674), (0.751465, 0.751709)],
];

fn elbow() -> Outcome {
    let (f, b, _) = load_system("elbow.json");
    let t = Instant::now();
    let fine = isolate(&f, &b, &Config::with_epsilon(1e-6)).unwrap();
    let fine_s = t.elapsed().as_secs_f64();

    // one point per found root: polished centres of certified boxes plus
    // the refined points
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut verified = 0;
    for c in &fine.certified {
        if let Some((p, res)) = newton_point_in(&f, c) {
            if res < 1e-10 {
                verified += 1;
            }
            points.push(p);
        } else {
            points.push(c.midpoint());
        }
    }
    verified += fine.refined.iter().filter(|p| p.certified).count();
    points.extend(fine.refined.iter().map(|p| p.point.clone()));
    let total = fine.certified.len() + fine.refined.len();

    let mut matches = Vec::new();
    for printed in &ELBOW_PRINTED {
        let bx = NBox::from_bounds(printed).unwrap().inflate(1e-3);
        matches.push(points.iter().filter(|p| bx.contains_point(p)).count());
    }
    let all_matched = matches.iter().all(|&m| m == 1);

    let t = Instant::now();
    let coarse = isolate(&f, &b, &Config::with_epsilon(1e-3)).unwrap();
    let coarse_s = t.elapsed().as_secs_f64();
    let coarse_certified = certified_count(&coarse);

    check(
        verified >= 16 && total == 16 && all_matched && coarse_certified >= 10,
        format!(
            "eps=1e-6: {verified} verified, certified {} + refined {} = {total}, printed boxes matched {}/16 ({fine_s:.0}s); \
             eps=1e-3: {coarse_certified} certified ({} boxes + {} re-certified, {coarse_s:.0}s)",
            fine.certified.len(),
            fine.refined.len(),
            matches.iter().filter(|&&m| m == 1).count(),
            coarse.certified.len(),
            coarse_certified - coarse.certified.len(),
        ),
    )
}

// --------------------------------------------------------------------------

fn worked_examples() -> Outcome {
    let mut notes = Vec::new();

    // (a) T_1 determinant on [0.10, 0.11]^3
    let x = iv(0.10, 0.11);
    let t1 = IntervalMatrix::from_rows(vec![
        vec![Interval::point(2.0) * x, Interval::point(-4.0) * x],
        vec![x, -x],
    ])
    .unwrap();
    let d = det(&t1);
    let a = d.contains_interval(&iv(0.0158, 0.0284)) && d.width() <= 0.013;
    notes.push(format!("(a) det T1 = {d}"));

    // (b) O-M and S-M matrices
    let om = IntervalMatrix::from_bounds(&[
        &[(1.0, 2.0), (3.0, 4.0), (-1.0, 1.0)],
        &[(3.0, 4.0), (-1.0, 1.0), (5.0, 6.0)],
        &[(1.0, 2.0), (-2.0, -1.0), (-2.0, -1.0)],
    ]);
    let cof = last_row_cofactors(&om);
    let sm = IntervalMatrix::from_bounds(&[
        &[(3.0, 4.0), (1.0, 2.0), (1.0, 2.0)],
        &[(1.0, 2.0), (3.0, 4.0), (-2.0, -1.0)],
        &[(1.0, 2.0), (-2.0, -1.0), (-2.0, -1.0)],
    ]);
    let minors = LeadingMinors::compute(&sm, 3, true);
    let b = is_om_matrix(&om)
        && cof[0].contains_interval(&iv(14.0, 25.0))
        && cof[1].contains_interval(&iv(-16.0, -1.0))
        && cof[2].contains_interval(&iv(-18.0, -7.0))
        && minors.as_ref().is_ok_and(|m| {
            m.get(&[0, 2]).is_some_and(|v| v.contains_interval(&iv(-12.0, -4.0)))
                && m.get(&[0, 1]).is_some_and(|v| v.contains_interval(&iv(5.0, 15.0)))
        })
        && det(&sm).contains_interval(&iv(-72.0, -16.0));
    notes.push(format!("(b) {}", if b { "ok" } else { "mismatch" }));

    // (c) running example on [-0.1, 0.1]^3
    let f4 = FuncSystem::parse(
        &["x", "y", "z"],
        &["x - y + z", "y^2 + x + y + 2*z", "x^2 + y*z - 3*x - y + z"],
    )
    .unwrap();
    let b4 = NBox::cube(3, -0.1, 0.1);
    let c = is_sm_system(&f4, &b4) && existence(&f4, &b4, 1e-9).is_unique();
    notes.push(format!("(c) {}", if c { "unique" } else { "not certified" }));

    // (d) preconditioning with the given U
    let (f2, b2, _) = load_system("example2.json");
    let u = dmatrix(&[&[3.0, 1.0, 1.0], &[1.0, -3.0, 1.0], &[1.0, 1.0, -3.0]]);
    let g = precondition(&f2, &b2, &u).unwrap();
    let cert = existence(&g, &b2, 1e-9);
    let root = [-0.080966, 0.049827, 0.055071];
    // U J^{-1}(m(B)) F at two points, computed independently in numpy
    let frozen: [([f64; 3], [f64; 3]); 2] = [
        ([-0.08, 0.05, 0.05], [-0.0017436197913717794, -0.004411974117161529, 0.016404137262850504]),
        ([0.0, 0.0, 0.0], [0.13796809465055565, 0.17231946278197618, 0.20337841329435077]),
    ];
    let frozen_ok = frozen.iter().all(|(p, want)| {
        let got = g.eval_point(p).unwrap();
        got.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12)
    });
    let d_ok = matches!(cert, ExistenceOutcome::Unique { .. }) && b2.contains_point(&root) && frozen_ok;
    notes.push(format!("(d) {cert:?}, preconditioned values {}", if frozen_ok { "match" } else { "differ" }));

    check(a && b && c && d_ok, notes.join("; "))
}

// --------------------------------------------------------------------------

const SWEEP: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];

fn precision_sweep() -> Outcome {
    let b = NBox::cube(2, -100.0, 100.0);
    let mut ok = true;
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let f = n2d_system(9, seed);
        let runs: Vec<(usize, usize)> = SWEEP
            .iter()
            .map(|&eps| {
                let r = isolate(&f, &b, &Config::with_epsilon(eps)).unwrap();
                (r.suspected.len(), certified_count(&r))
            })
            .collect();
        let monotone = runs.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 >= w[0].1);
        ok &= monotone;
        let (s, c): (Vec<_>, Vec<_>) = runs.iter().copied().unzip();
        rows.push(format!("seed {seed} suspected {s:?} certified {c:?}"));
    }
    check(ok, rows.join("; "))
}

// --------------------------------------------------------------------------

fn property_suites() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut add = |name: &str, t: Tally, extra: bool| {
        ok &= t.violations == 0 && t.cases > 0 && extra;
        lines.push(format!("{name} {}/{}", t.violations, t.cases));
    };

    let mut inc = Tally::default();
    for (k, op) in ALL_OPS.into_iter().enumerate() {
        inc.merge(inclusion_fuzz(op, 100_000, 100 + k as u64));
    }
    add("inclusion", inc, inc.cases == 100_000 * ALL_OPS.len());
    let dt = det_containment(10_000, 7);
    add("det", dt, dt.cases == 10_000);

    let (elbow, be, _) = load_system("elbow.json");
    let mut fd = fd_gradients(&elbow, &be, 50, 1, 1e-6);
    for seed in 0..5 {
        fd.merge(fd_gradients(&n2d_system(5, seed), &NBox::cube(2, -1.0, 1.0), 50, seed, 1e-6));
    }
    add("fd-gradients", fd, true);
    add("zero-preservation", zero_preservation(30, 11), true);

    let (t16, b16, _) = load_system("table4_16.json");
    add("disjoint", disjointness(&all_certified_boxes(&t16, &b16, &Config::with_epsilon(1e-6))), true);
    let (ex, unique) = existence_vs_grid(50, 5);
    add("existence-vs-grid", ex, unique >= 50);

    let (t8, b8, _) = load_system("table4_8.json");
    let same = worker_independence(&t8, &b8, 1e-6);
    ok &= same;
    lines.push(format!("workers 1/4/8 {}", if same { "identical" } else { "differ" }));

    check(ok, format!("violations/cases: {}", lines.join(", ")))
}

// --------------------------------------------------------------------------

fn miranda_comparison() -> Outcome {
    let b = NBox::cube(3, -4.0, 4.0);
    let (mut sm_total, mut mk_total, mut sm_hits) = (0, 0, 0);
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let f = generate("N3D9".parse().unwrap(), 10, 10, seed).unwrap();
        let run = |method| {
            let cfg = Config {
                method,
                ..Config::with_epsilon(1e-4)
            };
            certified_count(&isolate(&f, &b, &cfg).unwrap())
        };
        let (sm, mk) = (run(Method::StrongMonotone), run(Method::Miranda));
        sm_total += sm;
        mk_total += mk;
        sm_hits += usize::from(sm >= 1);
        rows.push(format!("{sm}/{mk}"));
    }
    check(
        mk_total < sm_total && sm_hits >= 4,
        format!("S-M/Miranda certified per seed {}; totals {sm_total}/{mk_total}", rows.join(" ")),
    )
}

// --------------------------------------------------------------------------

fn multiple_root() -> Outcome {
    let (f, b, _) = load_system("double_root.json");
    let r = isolate(&f, &b, &Config::with_epsilon(1e-6)).unwrap();
    let near = |bx: &NBox| bx.inflate(1e-3).contains_point(&[0.0, 0.0]);
    let no_cert = !r.certified.iter().any(near) && !r.refined.iter().any(|p| p.certified);
    let clustered = !r.suspected.is_empty() && r.suspected.iter().all(near);
    let refined = r
        .refined
        .iter()
        .any(|p| !p.certified && p.point.iter().all(|x| x.abs() < 1e-4));
    check(
        no_cert && clustered && refined,
        format!(
            "certified {}, suspected {} (all near origin: {clustered}), refined {:?}",
            r.certified.len(),
            r.suspected.len(),
            r.refined.iter().map(|p| (p.point.clone(), p.certified)).collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 Table 4 root counts", table4_goldens),
        ("2 elbow manipulator", elbow),
        ("3 worked examples", worked_examples),
        ("4 precision sweep", precision_sweep),
        ("5 property suites", property_suites),
        ("6 Miranda comparison", miranda_comparison),
        ("7 multiple root", multiple_root),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {name}: PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {name}: FAIL [{secs:.1}s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
