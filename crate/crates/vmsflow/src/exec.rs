//! Data-parallel execution helpers.
//!
//! Element loops compute independent per-item values in parallel and merge
//! them afterwards in a fixed order, so results are bit-identical whether the
//! `parallel` feature is on or off and regardless of thread count. The
//! sequential twins stay compiled under every feature set; they are the
//! fallback implementation and the baseline for the criterion benches.

/// Maps `f` over `0..n`, collecting results in index order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled, otherwise
/// falls back to [`map_indexed_seq`]. Output is identical either way.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}

/// Sequential twin of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Configures the global thread pool from the `VMSFLOW_THREADS` environment
/// variable. No-op when the variable is unset, unparsable, or the pool was
/// already built. Without the `parallel` feature this is always a no-op.
pub fn init_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("VMSFLOW_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    // Ignore the error: a pool that already exists keeps its size.
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}
