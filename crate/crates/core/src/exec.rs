//! Execution context injected by the host: wall-clock timing for phase
//! accounting and a worker pool for per-device series generation.
//!
//! Per-device series generation inside one window is independent across
//! devices; a parallel implementation must return results indexed by job so
//! the merge stays deterministic. The core ships a sequential executor; the
//! host crate provides threaded and wall-clock implementations.

use alloc::vec::Vec;

use crate::series::{SeriesError, SeriesVector};

/// Monotonic time source in seconds. [`NoClock`] returns zero everywhere,
/// which collapses all phase timings without touching control flow.
pub trait Clock {
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

pub type DeviceSasResult = Result<SeriesVector, SeriesError>;

/// Indexed map over device jobs. Implementations may run jobs on any number
/// of workers but must place the result of job `i` at index `i`.
pub trait ParallelExec {
    fn map_indexed(
        &self,
        jobs: usize,
        f: &(dyn Fn(usize) -> DeviceSasResult + Sync),
    ) -> Vec<DeviceSasResult>;
}

/// In-order execution on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ParallelExec for Sequential {
    fn map_indexed(
        &self,
        jobs: usize,
        f: &(dyn Fn(usize) -> DeviceSasResult + Sync),
    ) -> Vec<DeviceSasResult> {
        (0..jobs).map(f).collect()
    }
}
