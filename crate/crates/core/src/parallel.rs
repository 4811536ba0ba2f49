//! Data-parallel map helpers.
//!
//! With the default `parallel` feature, [`par_map`] fans work out over a
//! rayon pool; without it, the same signature runs sequentially. Work items
//! must not depend on evaluation order — every caller in this crate derives
//! per-item random substreams, so results are identical either way.
//! [`seq_map`] is always sequential and exists so benchmarks can compare the
//! two paths within one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential map with the same signature as [`par_map`].
pub fn seq_map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// True when this build fans [`par_map`] out over threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
