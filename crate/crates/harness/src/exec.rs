//! Rayon-backed [`Executor`]. Results are collected in index order, so the
//! chunked reductions downstream see the same sequence for any thread count.

use std::ops::Range;

use pmlmc_core::estimators::Executor;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

#[derive(Debug)]
pub struct Rayon {
    pool: rayon::ThreadPool,
}

impl Rayon {
    /// `threads == 0` uses one worker per core.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;
        Ok(Rayon { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| range.into_par_iter().map(&f).collect())
    }
}
