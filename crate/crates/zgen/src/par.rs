use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use zgen_core::harness::ParMap;

/// Harness fan-out over a fixed-size rayon pool.
pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    /// `workers == 0` uses one thread per core.
    pub fn new(workers: usize) -> Self {
        let pool = ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        Pool { pool }
    }
}

impl ParMap for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
