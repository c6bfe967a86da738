//! Standard-library execution context: wall-clock phase timing and a scoped
//! worker pool for per-device series generation.

use std::time::Instant;

use sassim_core::exec::{Clock, DeviceSasResult, ParallelExec};

pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Scoped-thread worker pool. Results are merged by job index, so the
/// outcome is independent of scheduling.
pub struct WorkerPool {
    pub workers: usize,
}

impl WorkerPool {
    /// Worker count from `SASSIM_WORKERS` (default 1 = sequential).
    pub fn from_env() -> Self {
        let workers = std::env::var("SASSIM_WORKERS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(1)
            .max(1);
        Self { workers }
    }
}

impl ParallelExec for WorkerPool {
    fn map_indexed(
        &self,
        jobs: usize,
        f: &(dyn Fn(usize) -> DeviceSasResult + Sync),
    ) -> Vec<DeviceSasResult> {
        if self.workers <= 1 || jobs <= 1 {
            return (0..jobs).map(f).collect();
        }
        let workers = self.workers.min(jobs);
        let mut slots: Vec<Option<DeviceSasResult>> = (0..jobs).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(workers);
            for w in 0..workers {
                handles.push(scope.spawn(move || {
                    let mut local = Vec::new();
                    let mut i = w;
                    while i < jobs {
                        local.push((i, f(i)));
                        i += workers;
                    }
                    local
                }));
            }
            for handle in handles {
                for (i, r) in handle.join().expect("worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("job completed")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sassim_core::series::{PowerSeries, SeriesVector};

    #[test]
    fn pool_preserves_job_order() {
        let pool = WorkerPool { workers: 4 };
        let out = pool.map_indexed(17, &|i| {
            Ok(SeriesVector::new(vec![PowerSeries::constant(0.0, i as f64, 1)]).unwrap())
        });
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap().component(0).coeff(0), i as f64);
        }
    }
}
