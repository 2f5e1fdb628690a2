//! Data-parallel evaluation with a fixed reduction order.
//!
//! Work over `0..n` is cut into chunks of [`CHUNK`] indices. Chunk boundaries
//! depend only on `n`, each chunk is folded sequentially, and chunk results are
//! combined left to right, so results are bit-identical for any worker count
//! and with the `parallel` feature disabled.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Indices folded per work item.
pub const CHUNK: usize = 1024;

#[derive(Clone, Default)]
pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers())
            .finish()
    }
}

impl Executor {
    /// Runs everything on the calling thread.
    pub fn sequential() -> Self {
        Executor::default()
    }

    /// Uses a dedicated pool of `workers` threads. Without the `parallel`
    /// feature this falls back to sequential execution.
    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidArgument(
                "worker count must be positive".into(),
            ));
        }
        #[cfg(feature = "parallel")]
        {
            if workers == 1 {
                return Ok(Executor::sequential());
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(Executor {
                pool: Some(Arc::new(pool)),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(Executor::sequential())
        }
    }

    /// One worker per available core.
    pub fn available() -> Self {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        Executor::with_workers(n).unwrap_or_default()
    }

    pub fn workers(&self) -> usize {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.current_num_threads();
        }
        1
    }

    /// Maps every index in `0..n`, returning results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Folds `0..n` chunk by chunk and merges chunk accumulators in order.
    ///
    /// `fold` receives a fresh accumulator from `init` for every chunk.
    pub fn fold_chunks<A, I, F, M>(&self, n: usize, init: I, fold: F, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(&mut A, usize) + Sync + Send,
        M: Fn(&mut A, A),
    {
        let chunks = n.div_ceil(CHUNK);
        let partials = self.map(chunks, |c| {
            let mut acc = init();
            let end = ((c + 1) * CHUNK).min(n);
            for i in c * CHUNK..end {
                fold(&mut acc, i);
            }
            acc
        });
        let mut total = init();
        for part in partials {
            merge(&mut total, part);
        }
        total
    }

    /// Fallible variant of [`Executor::map`]; returns the first error in index order.
    pub fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
