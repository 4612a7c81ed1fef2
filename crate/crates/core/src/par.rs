//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) independent work items are
//! fanned out over the rayon pool when the caller asks for it. Without the
//! feature, or with `parallel = false`, every helper runs a plain iterator.
//! Results are always returned in index order, so output never depends on
//! worker scheduling.

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_range<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel && n > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, collecting results in slice order.
pub fn map_slice<S, T, F>(items: &[S], parallel: bool, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), parallel, |i| f(&items[i]))
}

/// True when the crate was built with rayon support.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}
