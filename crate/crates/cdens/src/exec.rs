//! Execution helpers: data-parallel maps with a sequential fallback.
//!
//! With the `parallel` feature (default) the maps run on rayon's current
//! thread pool; without it they degrade to plain iterators. Everything that
//! goes through here collects results in index order, so outputs are
//! identical regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..len`, collecting results in index order.
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Cap the global thread pool. A no-op if a pool already exists or the
/// `parallel` feature is disabled.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads >= 1 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

/// Read the `CDE_THREADS` env var and cap the pool accordingly.
pub fn configure_threads_from_env() {
    if let Ok(v) = std::env::var("CDE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            configure_threads(n);
        }
    }
}
