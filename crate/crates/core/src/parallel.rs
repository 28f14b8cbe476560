//! Data-parallel map over independent work items (chains, replicates).
//!
//! With the `parallel` feature the map runs on the rayon pool; without it,
//! items run one after another. Output order always follows input order,
//! so results do not depend on the mode or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item, preserving order.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    map_sequential(items, f)
}

/// Sequential reference path, always available.
pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs `f` inside a pool of `threads` workers. Without the `parallel`
/// feature the thread count is ignored.
#[cfg(feature = "parallel")]
pub fn with_threads<U: Send>(threads: usize, f: impl FnOnce() -> U + Send) -> crate::Result<U> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::validation(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<U: Send>(_threads: usize, f: impl FnOnce() -> U + Send) -> crate::Result<U> {
    Ok(f())
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
