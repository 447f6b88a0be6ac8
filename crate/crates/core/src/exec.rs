//! Index-ordered map helpers that run data-parallel when the `parallel`
//! feature is enabled and sequentially otherwise.
//!
//! Every parallel loop in this crate is a pure map over an index range whose
//! results are collected in index order and reduced sequentially, so output
//! is bitwise identical regardless of feature flags or thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to each index in `0..n` and collects results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Sequential twin of [`map_indexed`], kept unconditionally so benchmarks can
/// compare the parallel path against a single-threaded baseline in one build.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
