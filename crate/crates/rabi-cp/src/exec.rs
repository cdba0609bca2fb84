//! Data-parallel map helpers.
//!
//! Pipelines and Monte-Carlo loops are embarrassingly parallel over grid
//! points or trial indices. `map_indexed` fans the closure out on the rayon
//! pool when the `parallel` feature is enabled and falls back to a plain
//! sequential loop otherwise. Output order always follows the index order,
//! so results are identical regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for a data-parallel map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Use the rayon pool when compiled with the `parallel` feature.
    Auto,
    /// Force a sequential loop even when the pool is available.
    Sequential,
}

/// Map `f` over `0..len`, preserving index order in the output.
pub fn map_indexed<T, F>(strategy: Strategy, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match strategy {
        Strategy::Sequential => (0..len).map(f).collect(),
        Strategy::Auto => map_auto(len, f),
    }
}

#[cfg(feature = "parallel")]
fn map_auto<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_auto<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}
