//! Newton refinement of suspected boxes.
//!
//! Best effort only: clusters of suspected boxes are polished from their
//! box midpoints, duplicates are merged and every surviving point gets one
//! more certification attempt on a small box around it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Pipeline;
use crate::existence::ExistenceOutcome;
use crate::funcsys::SquareSystem;
use crate::interval::NBox;
use crate::isolator::Stats;

pub const NEWTON_STEPS: usize = 100;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Half-widths, in units of the termination width, of the boxes tried in
/// turn when re-certifying a refined point. The first box has width `4 eps`.
pub const RECERTIFY_RADII: [f64; 5] = [2.0, 0.5, 0.125, 0.031_25, 0.007_812_5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedRoot {
    pub point: Vec<f64>,
    /// `max_i |f_i(point)|`.
    pub residual: f64,
    /// Index of the suspected cluster the point came from.
    pub cluster: usize,
    pub certified: bool,
    /// The box certified around the point, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_box: Option<NBox>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton from `x0`. The damping factor halves whenever a step
/// fails to lower the residual and resets after a successful one.
/// Returns the last point and its residual.
pub fn newton(f: &dyn SquareSystem, x0: &[f64], steps: usize) -> Option<(Vec<f64>, f64)> {
    let mut x = x0.to_vec();
    let mut r = inf_norm(&f.eval_point(&x).ok()?);
    for _ in 0..steps {
        if r < RESIDUAL_TOLERANCE * 1e-3 {
            break;
        }
        let fx = DVector::from_vec(f.eval_point(&x).ok()?);
        let j: DMatrix<f64> = f.jacobian_point(&x).ok()?;
        let dx = j.lu().solve(&fx)?;
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let y: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - t * d).collect();
            if let Ok(fy) = f.eval_point(&y) {
                let ry = inf_norm(&fy);
                if ry.is_finite() && ry < r {
                    x = y;
                    r = ry;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    r.is_finite().then_some((x, r))
}

/// Groups boxes whose closures intersect. Returns a cluster id per box,
/// numbered in order of first appearance.
pub fn clusters(boxes: &[NBox]) -> Vec<usize> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| boxes[a].dims()[0].lo().total_cmp(&boxes[b].dims()[0].lo()));
    for (k, &a) in order.iter().enumerate() {
        let hi = boxes[a].dims()[0].hi();
        for &b in &order[k + 1..] {
            if boxes[b].dims()[0].lo() > hi {
                break;
            }
            if boxes[a].touches(&boxes[b]) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut label = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        ids[i] = label[r];
    }
    ids
}

/// Polishes suspected clusters into points, discards points already
/// inside a certified box and retries certification around the rest.
pub fn postprocess_suspected(
    pipeline: &Pipeline<'_>,
    b0: &NBox,
    suspected: &[NBox],
    certified: &[NBox],
) -> Vec<RefinedRoot> {
    let eps = pipeline.epsilon;
    let ids = clusters(suspected);
    let ncl = ids.iter().copied().max().map_or(0, |m| m + 1);
    let mut hulls: Vec<Option<(NBox, f64)>> = vec![None; ncl];
    for (b, &c) in suspected.iter().zip(&ids) {
        hulls[c] = Some(match hulls[c].take() {
            None => (b.clone(), b.width()),
            Some((h, w)) => (h.hull(b), w.max(b.width())),
        });
    }

    let mut points: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    for (b, &c) in suspected.iter().zip(&ids) {
        let Some((p, r)) = newton(pipeline.f, &b.midpoint(), NEWTON_STEPS) else {
            continue;
        };
        let (hull, w) = hulls[c].as_ref().expect("every cluster has a box");
        if r >= RESIDUAL_TOLERANCE || !hull.inflate(*w).contains_point(&p) || !b0.contains_point(&p) {
            continue;
        }
        let dup = points.iter_mut().find(|(q, _, _)| {
            q.iter().zip(&p).all(|(a, b)| (a - b).abs() < 10.0 * eps)
        });
        match dup {
            Some(slot) if r < slot.1 => *slot = (p, r, c),
            Some(_) => {}
            None => points.push((p, r, c)),
        }
    }

    points.retain(|(p, _, _)| !certified.iter().any(|b| b.inflate(eps).contains_point(p)));
    points.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut taken: Vec<NBox> = certified.to_vec();
    let mut stats = Stats::default();
    points
        .into_iter()
        .map(|(point, residual, cluster)| {
            let bx = RECERTIFY_RADII.iter().map(|f| f * eps).find_map(|r| {
                let bx = NBox::around(&point, r);
                if taken.iter().any(|t| t.interiors_overlap(&bx)) {
                    return None;
                }
                matches!(
                    pipeline.certify(&bx, &mut stats),
                    Some(ExistenceOutcome::Unique { .. })
                )
                .then_some(bx)
            });
            if let Some(b) = &bx {
                taken.push(b.clone());
            }
            RefinedRoot {
                point,
                residual,
                cluster,
                certified: bx.is_some(),
                certified_box: bx,
            }
        })
        .collect()
}
