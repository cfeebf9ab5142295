//! Execution mode for the data-parallel loops.
//!
//! With the `parallel` feature (default) the map-style loops over windows,
//! classes and grid cells go through rayon. Without it, or when
//! [`Execution::Sequential`] is requested, they run as plain iterators.
//! Only order-preserving maps are parallelized, never floating-point
//! reductions, so results are bit-identical in both modes.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_indexed<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Runs `f` on a pool bounded to `jobs` threads. `jobs == 1` (or a build
/// without the `parallel` feature) runs on the calling thread.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce(Execution) -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs != 1 {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if jobs > 1 {
            builder = builder.num_threads(jobs);
        }
        if let Ok(pool) = builder.build() {
            return pool.install(|| f(Execution::Parallel));
        }
    }
    let _ = jobs;
    f(Execution::Sequential)
}
