//! Depth-first work queue with work stealing.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};

use crossbeam_deque::{Injector, Steal, Stealer, Worker};

use crate::interval::NBox;

pub(crate) struct RunOutcome<T> {
    pub per_worker: Vec<T>,
    pub processed: u64,
    pub truncated: bool,
}

/// Runs `work` on every box until the queue drains. `work` receives a box,
/// a buffer for child boxes to enqueue and the worker's accumulator.
pub(crate) fn run<T, I, W>(initial: Vec<NBox>, workers: usize, max_boxes: u64, init: I, work: W) -> RunOutcome<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    W: Fn(NBox, &mut Vec<NBox>, &mut T) + Sync,
{
    if workers <= 1 {
        let mut acc = init();
        let mut stack: Vec<NBox> = initial.into_iter().rev().collect();
        let mut children = Vec::new();
        let mut processed = 0u64;
        let mut truncated = false;
        while let Some(b) = stack.pop() {
            if processed >= max_boxes {
                truncated = true;
                break;
            }
            processed += 1;
            work(b, &mut children, &mut acc);
            stack.extend(children.drain(..).rev());
        }
        return RunOutcome {
            per_worker: vec![acc],
            processed,
            truncated,
        };
    }

    let injector = Injector::new();
    let pending = AtomicUsize::new(initial.len());
    for b in initial {
        injector.push(b);
    }
    let processed = AtomicU64::new(0);
    let truncated = AtomicBool::new(false);
    let locals: Vec<Worker<NBox>> = (0..workers).map(|_| Worker::new_lifo()).collect();
    let stealers: Vec<Stealer<NBox>> = locals.iter().map(Worker::stealer).collect();

    let per_worker = std::thread::scope(|s| {
        let handles: Vec<_> = locals
            .into_iter()
            .enumerate()
            .map(|(me, local)| {
                let (injector, stealers, pending) = (&injector, &stealers, &pending);
                let (processed, truncated, init, work) = (&processed, &truncated, &init, &work);
                s.spawn(move || {
                    let mut acc = init();
                    let mut children = Vec::new();
                    loop {
                        let task = local.pop().or_else(|| steal(&local, injector, stealers, me));
                        let Some(b) = task else {
                            if pending.load(Ordering::Acquire) == 0 {
                                break;
                            }
                            std::thread::yield_now();
                            continue;
                        };
                        let over = truncated.load(Ordering::Relaxed)
                            || processed.fetch_add(1, Ordering::Relaxed) >= max_boxes;
                        if over {
                            truncated.store(true, Ordering::Relaxed);
                        } else {
                            work(b, &mut children, &mut acc);
                            pending.fetch_add(children.len(), Ordering::AcqRel);
                            for c in children.drain(..).rev() {
                                local.push(c);
                            }
                        }
                        pending.fetch_sub(1, Ordering::AcqRel);
                    }
                    acc
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let processed = processed.load(Ordering::Relaxed).min(max_boxes);
    RunOutcome {
        per_worker,
        processed,
        truncated: truncated.load(Ordering::Relaxed),
    }
}

fn steal(local: &Worker<NBox>, injector: &Injector<NBox>, stealers: &[Stealer<NBox>], me: usize) -> Option<NBox> {
    loop {
        let mut retry = false;
        match injector.steal_batch_and_pop(local) {
            Steal::Success(b) => return Some(b),
            Steal::Retry => retry = true,
            Steal::Empty => {}
        }
        for (i, s) in stealers.iter().enumerate() {
            if i == me {
                continue;
            }
            match s.steal() {
                Steal::Success(b) => return Some(b),
                Steal::Retry => retry = true,
                Steal::Empty => {}
            }
        }
        if !retry {
            return None;
        }
    }
}
