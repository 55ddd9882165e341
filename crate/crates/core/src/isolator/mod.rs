//! Subdivision loop: exclusion, preconditioning, S-M check and existence
//! test per box, with optional sleeve-polynomial seeding and Newton
//! post-processing of suspected boxes.

pub mod candidates;
pub mod postprocess;
mod sched;
pub mod transform;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criterion::{check_sm_system, default_scale, make_sm_rotation, precondition, RotationError, SMRotation, SmCheck};
use crate::existence::{existence_with_jacobian, ExistenceOutcome};
use crate::funcsys::{FuncSystem, SquareSystem};
use crate::interval::NBox;
use crate::miranda::{MirandaOutcome, MirandaTest};

pub use candidates::{candidates, CandidateError};
pub use postprocess::{newton, postprocess_suspected, RefinedRoot};
pub use transform::{invert_coordinates, scale_coordinates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CandidateStrategy {
    #[default]
    Plain,
    Sleeve,
}

/// Certification test applied to boxes that survive exclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Preconditioned S-M check followed by the face-recursion existence
    /// test.
    #[default]
    StrongMonotone,
    /// Miranda sign conditions on opposite faces plus a Jacobian
    /// determinant test.
    Miranda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Boxes narrower than this are not split further.
    pub epsilon: f64,
    /// Target width when refining face zeros; `None` means `epsilon / 4`.
    pub epsilon_b: Option<f64>,
    /// Diagonal magnitude of the S-M rotation; `None` means `max(n, 3)`.
    pub rotation_scale: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    pub max_boxes: u64,
    pub candidates: CandidateStrategy,
    /// Cells per dimension for the sleeve grid.
    pub sleeve_grid: usize,
    pub postprocess: bool,
    /// Number of times every dimension of the start box is halved before
    /// the loop starts.
    pub presplit_depth: usize,
    /// Let rotation retries pick random diagonal signs.
    pub randomize_rotation_signs: bool,
    pub method: Method,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            epsilon: 1e-6,
            epsilon_b: None,
            rotation_scale: None,
            seed: 0,
            workers: 1,
            max_boxes: 200_000_000,
            candidates: CandidateStrategy::Plain,
            sleeve_grid: 8,
            postprocess: true,
            presplit_depth: 1,
            randomize_rotation_signs: false,
            method: Method::StrongMonotone,
        }
    }
}

impl Config {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Config {
            epsilon,
            ..Config::default()
        }
    }

    pub fn effective_epsilon_b(&self) -> f64 {
        self.epsilon_b.unwrap_or(self.epsilon / 4.0)
    }

    pub fn validate(&self, b0: &NBox) -> Result<(), IsolateError> {
        let eb = self.effective_epsilon_b();
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(IsolateError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(eb > 0.0 && eb <= self.epsilon) {
            return Err(IsolateError::Config(format!(
                "epsilon_b must lie in (0, epsilon], got {eb}"
            )));
        }
        if self.epsilon >= b0.width() {
            return Err(IsolateError::Config(format!(
                "epsilon {} is not smaller than the box width {}",
                self.epsilon,
                b0.width()
            )));
        }
        if self.workers == 0 {
            return Err(IsolateError::Config("workers must be at least 1".into()));
        }
        if self.sleeve_grid == 0 {
            return Err(IsolateError::Config("sleeve grid must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IsolateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("box has {got} dimensions but the system has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub boxes_processed: u64,
    pub excluded: u64,
    pub splits: u64,
    pub not_invertible: u64,
    pub sm_failures: u64,
    pub sm_passed: u64,
    pub unique: u64,
    pub empty: u64,
    pub unknown: u64,
    pub initial_boxes: u64,
    pub wall_time_ms: f64,
    pub postprocess_time_ms: f64,
}

impl Stats {
    fn merge(&mut self, o: &Stats) {
        self.boxes_processed += o.boxes_processed;
        self.excluded += o.excluded;
        self.splits += o.splits;
        self.not_invertible += o.not_invertible;
        self.sm_failures += o.sm_failures;
        self.sm_passed += o.sm_passed;
        self.unique += o.unique;
        self.empty += o.empty;
        self.unknown += o.unknown;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationResult {
    /// Boxes holding exactly one simple zero each, in canonical order.
    pub certified: Vec<NBox>,
    /// Boxes that could be neither excluded nor certified.
    pub suspected: Vec<NBox>,
    pub refined: Vec<RefinedRoot>,
    pub stats: Stats,
    /// `false` when the box budget ran out.
    pub complete: bool,
    pub rotation: SMRotation,
    pub warnings: Vec<String>,
}

impl IsolationResult {
    /// Certified boxes plus refined points that were certified afterwards.
    pub fn certified_root_count(&self) -> usize {
        self.certified.len() + self.refined.iter().filter(|r| r.certified).count()
    }
}

/// Some component of `F` keeps a strict sign on `b`, so `b` holds no zero.
/// Evaluation failures never exclude.
pub fn exclusion(f: &dyn SquareSystem, b: &NBox) -> bool {
    match f.eval_box(b.dims()) {
        Ok(v) => v.iter().any(|x| !x.contains_zero()),
        Err(_) => false,
    }
}

/// What the loop does with a box.
#[derive(Debug, Clone, PartialEq)]
pub enum BoxVerdict {
    Excluded,
    Certified,
    Empty,
    Suspected,
    Split(NBox, NBox),
}

/// Shared, read-only state of one isolation run.
pub struct Pipeline<'a> {
    pub f: &'a FuncSystem,
    pub v: DMatrix<f64>,
    pub epsilon: f64,
    pub epsilon_b: f64,
    pub method: Method,
    /// Prepared baseline test; built on demand when absent.
    pub miranda: Option<MirandaTest<'a>>,
}

impl Pipeline<'_> {
    fn split_or_suspect(&self, b: &NBox, stats: &mut Stats) -> BoxVerdict {
        if b.width() > self.epsilon {
            stats.splits += 1;
            let (l, r) = b.split().expect("positive width");
            BoxVerdict::Split(l, r)
        } else {
            BoxVerdict::Suspected
        }
    }

    /// Certification attempt on a box that survived exclusion.
    pub fn certify(&self, b: &NBox, stats: &mut Stats) -> Option<ExistenceOutcome> {
        match self.method {
            Method::StrongMonotone => {
                let g = match precondition(self.f, b, &self.v) {
                    Ok(g) => g,
                    Err(_) => {
                        stats.not_invertible += 1;
                        return None;
                    }
                };
                match check_sm_system(&g, b) {
                    SmCheck::Verified(jac) => {
                        stats.sm_passed += 1;
                        Some(existence_with_jacobian(&g, b, jac, self.epsilon_b))
                    }
                    _ => {
                        stats.sm_failures += 1;
                        None
                    }
                }
            }
            Method::Miranda => match self
                .miranda
                .as_ref()
                .map_or_else(|| MirandaTest::new(self.f).certify(b), |t| t.certify(b))
            {
                MirandaOutcome::Unique => {
                    stats.sm_passed += 1;
                    Some(ExistenceOutcome::Unique { faces: None })
                }
                MirandaOutcome::NotInvertible => {
                    stats.not_invertible += 1;
                    None
                }
                MirandaOutcome::Fail => {
                    stats.sm_failures += 1;
                    None
                }
            },
        }
    }

    pub fn process(&self, b: &NBox, stats: &mut Stats) -> BoxVerdict {
        stats.boxes_processed += 1;
        if exclusion(self.f, b) {
            stats.excluded += 1;
            return BoxVerdict::Excluded;
        }
        match self.certify(b, stats) {
            Some(ExistenceOutcome::Unique { .. }) => {
                stats.unique += 1;
                BoxVerdict::Certified
            }
            Some(ExistenceOutcome::Empty) => {
                stats.empty += 1;
                BoxVerdict::Empty
            }
            // undecided boxes get another chance on smaller pieces
            Some(ExistenceOutcome::Unknown) => {
                stats.unknown += 1;
                self.split_or_suspect(b, stats)
            }
            None => self.split_or_suspect(b, stats),
        }
    }
}

#[derive(Default)]
struct Acc {
    certified: Vec<NBox>,
    suspected: Vec<NBox>,
    stats: Stats,
}

pub fn rotation_for(n: usize, cfg: &Config) -> Result<SMRotation, RotationError> {
    let scale = cfg.rotation_scale.unwrap_or_else(|| default_scale(n));
    make_sm_rotation(n, scale, cfg.seed, cfg.randomize_rotation_signs)
}

/// Isolates the real zeros of `f` in `b0`.
pub fn isolate(f: &FuncSystem, b0: &NBox, cfg: &Config) -> Result<IsolationResult, IsolateError> {
    let n = f.dim();
    if b0.dim() != n {
        return Err(IsolateError::Dimension {
            expected: n,
            got: b0.dim(),
        });
    }
    cfg.validate(b0)?;
    let start = Instant::now();
    let rotation = rotation_for(n, cfg)?;
    let mut warnings = Vec::new();

    let initial = match cfg.candidates {
        CandidateStrategy::Plain => b0.presplit(cfg.presplit_depth),
        CandidateStrategy::Sleeve => match candidates(f, b0, cfg.sleeve_grid) {
            Ok(c) => c,
            Err(e) => {
                warnings.push(format!("{e}; using plain subdivision"));
                b0.presplit(cfg.presplit_depth)
            }
        },
    };

    let pipeline = Pipeline {
        f,
        v: rotation.matrix(),
        epsilon: cfg.epsilon,
        epsilon_b: cfg.effective_epsilon_b(),
        method: cfg.method,
        miranda: (cfg.method == Method::Miranda).then(|| MirandaTest::new(f)),
    };
    let initial_boxes = initial.len() as u64;
    let outcome = sched::run(initial, cfg.workers, cfg.max_boxes, Acc::default, |b, children, acc: &mut Acc| {
        match pipeline.process(&b, &mut acc.stats) {
            BoxVerdict::Certified => acc.certified.push(b),
            BoxVerdict::Suspected => acc.suspected.push(b),
            BoxVerdict::Split(l, r) => {
                children.push(l);
                children.push(r);
            }
            BoxVerdict::Excluded | BoxVerdict::Empty => {}
        }
    });

    let mut stats = Stats {
        initial_boxes,
        ..Stats::default()
    };
    let mut certified = Vec::new();
    let mut suspected = Vec::new();
    for acc in outcome.per_worker {
        stats.merge(&acc.stats);
        certified.extend(acc.certified);
        suspected.extend(acc.suspected);
    }
    debug_assert_eq!(stats.boxes_processed, outcome.processed);
    certified.sort_by(NBox::canonical_cmp);
    suspected.sort_by(NBox::canonical_cmp);
    stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    if outcome.truncated {
        warnings.push(format!("stopped after {} boxes", cfg.max_boxes));
    }

    let refined = if cfg.postprocess && !suspected.is_empty() {
        let t = Instant::now();
        let r = postprocess_suspected(&pipeline, b0, &suspected, &certified);
        stats.postprocess_time_ms = t.elapsed().as_secs_f64() * 1e3;
        r
    } else {
        Vec::new()
    };

    Ok(IsolationResult {
        certified,
        suspected,
        refined,
        stats,
        complete: !outcome.truncated,
        rotation,
        warnings,
    })
}
