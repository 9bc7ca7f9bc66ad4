//! Multi-threaded scene correction.
//!
//! Tracks are independent once association is done, so jobs are handed out
//! to scoped workers through a shared counter. Each outcome lands in the
//! slot of its job, which makes the result identical for any thread count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use annofix_core::pipeline::{
    assemble, plan_scene, CorrectionConfig, CorrectionResult, PipelineError, TrackDiagnostics,
    TrackOutcome,
};
use annofix_core::scene::Scene;

/// Called once per finished track with the number of tracks done so far
/// and the total.
pub type Progress<'a> = dyn Fn(&TrackDiagnostics, usize, usize) + Sync + 'a;

pub fn available_threads() -> usize {
    thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

pub fn correct_scene_parallel(
    scene: &Scene,
    cfg: &CorrectionConfig,
    threads: usize,
    progress: Option<&Progress<'_>>,
) -> Result<CorrectionResult, PipelineError> {
    let jobs = plan_scene(scene, cfg)?;
    let total = jobs.len();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<TrackOutcome>>> = (0..total).map(|_| Mutex::new(None)).collect();
    let workers = threads.clamp(1, total.max(1));

    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = job.solve(cfg);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(report) = progress {
                    report(&outcome.diagnostics, finished, total);
                }
                *slots[i].lock().expect("worker panicked") = Some(outcome);
            });
        }
    });

    let outcomes = slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("worker panicked")
                .expect("every job is solved")
        })
        .collect();
    Ok(assemble(scene, outcomes))
}
