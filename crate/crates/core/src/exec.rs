//! Execution strategy for the data-parallel inner loops.
//!
//! Every fan-out in the crate (per-token oracle queries, enumeration
//! certificates, randomized sweeps) goes through these helpers. With the
//! `parallel` feature disabled, [`Exec::Parallel`] runs sequentially, so
//! results never depend on the feature set: outputs keep input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Inputs shorter than this run sequentially even under [`Exec::Parallel`].
pub const MIN_PARALLEL_LEN: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when work actually fans out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= MIN_PARALLEL_LEN {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && n >= MIN_PARALLEL_LEN {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Order-preserving filter.
pub fn filter<T, F>(exec: Exec, items: &[T], pred: F) -> Vec<T>
where
    T: Copy + Send + Sync,
    F: Fn(&T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= MIN_PARALLEL_LEN {
        return items.par_iter().copied().filter(|x| pred(x)).collect();
    }
    let _ = exec;
    items.iter().copied().filter(|x| pred(x)).collect()
}
