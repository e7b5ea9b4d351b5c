//! Order-preserving parallel map.
//!
//! With the `parallel` feature the closures run on the current rayon pool;
//! outputs are collected in input order, so callers see identical results
//! at any thread count.

use alloc::vec::Vec;

#[cfg(feature = "parallel")]
pub(crate) fn par_map_idx<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map_idx<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}
