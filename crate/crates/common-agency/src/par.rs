//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan out over rayon's
//! current pool; without it, or inside [`sequential`], they run in order on
//! the calling thread. Every helper returns results in input order, so
//! outputs never depend on the worker count.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQ: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with all helpers on this thread forced to sequential execution.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQ.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQ.with(|c| c.set(prev));
    out
}

fn forced_sequential() -> bool {
    FORCE_SEQ.with(|c| c.get())
}

/// Run `f` with `jobs` workers. `jobs <= 1` means sequential.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    if jobs <= 1 {
        return sequential(f);
    }
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

/// Map over a slice, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Map over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// True when helpers called from this thread would fan out.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !forced_sequential()
}
