//! Parallel-or-sequential execution helpers.
//!
//! With the `parallel` feature (default) work is dispatched through rayon;
//! without it the same helpers run sequentially. Callers are written so that
//! results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Run `f(0), ..., f(n-1)` and collect results in index order.
pub(crate) fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Run `f` inside a thread pool of the given size.
///
/// `threads == 0` uses the default (global) pool; `threads == 1` forces
/// sequential execution. Without the `parallel` feature the closure simply
/// runs on the current thread.
pub(crate) fn with_pool<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match threads {
            0 => f(),
            n => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("failed to build thread pool")
                .install(f),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
