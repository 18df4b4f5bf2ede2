//! Thread budget and order-preserving parallel maps.
//!
//! Results are always collected by index and reduced sequentially, so the
//! output of any computation routed through here is independent of the
//! number of threads.

use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone)]
pub struct ThreadBudget {
    threads: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for ThreadBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThreadBudget").field("threads", &self.threads).finish()
    }
}

impl Default for ThreadBudget {
    fn default() -> Self {
        Self::sequential()
    }
}

impl ThreadBudget {
    pub fn sequential() -> Self {
        Self {
            threads: 1,
            pool: None,
        }
    }

    /// `threads == 0` means "all available cores".
    pub fn new(threads: usize) -> Self {
        let threads = if threads == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            threads
        };
        if threads == 1 {
            return Self::sequential();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .ok()
            .map(Arc::new);
        Self { threads, pool }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `(0..n).map(f)` with the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        }
    }

    pub fn run<T: Send, F: FnOnce() -> T + Send>(&self, f: F) -> T {
        match &self.pool {
            None => f(),
            Some(pool) => pool.install(f),
        }
    }
}
