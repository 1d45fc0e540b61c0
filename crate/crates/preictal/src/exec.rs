//! Thread-pool executor for cross-validation jobs.

use rayon::prelude::*;

use preictal_core::train::Executor;

use crate::error::{Error, Result};

/// Runs jobs on a private rayon pool; results come back in job order, so the
/// thread count never changes an outcome.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }
}

impl Executor for Parallel {
    fn map<T: Send>(&self, count: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        self.pool.install(|| (0..count).into_par_iter().map(job).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_job_order() {
        let exec = Parallel::new(4).unwrap();
        let out = exec.map(100, &|i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert!(Parallel::new(0).is_err());
    }
}
